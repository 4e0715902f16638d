#ifndef ASDA_CONFIG_HPP
#define ASDA_CONFIG_HPP

#include "asda/aggregation.hpp"
#include "asda/core.hpp"
#include "asda/model.hpp"
#include "asda/postprocess.hpp"
#include "asda/training.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace asda {

/// Flat experiment configuration. Defaults: K=4 semantic maps, theta=0.7,
/// L=4 window scales, MAC pooling, tau=0.75, Adam with the learning rate
/// decaying as exp(-0.1*epoch).
struct ExperimentConfig {
    std::uint64_t seed = 0;
    Index epochs = 30;

    // dataset
    Index instances = 20;
    Index views = 10;
    Index image_size = 64;
    double holdout_fraction = 0.2;

    // model
    Index backbone_blocks = 3;
    Index backbone_channels = 32;
    Index backbone_stride = 2;
    bool backbone_trainable = true;
    Index steps = 4;       // K
    double theta = 0.7;
    Index scale_count = 4;  // L
    std::string pooling = "mac";
    double gem_p = 3.0;
    Index descriptor_dim = 512;  // capped at K*C
    std::string proposal_mode = "soft";

    // optimization
    double learning_rate = 1e-6;
    double decay_rate = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 5e-4;
    double tau = 0.75;
    Index batch_tuples = 5;
    Index n_negatives = 5;
    Index tuples_per_epoch = 25;

    // post-processing (evaluation-time switches)
    bool multiscale = false;
    std::vector<double> scales = default_scales();
    bool whitening = false;
    Index whitening_dim = 0;  // 0 = descriptor dim

    Index effective_descriptor_dim() const {
        return std::min(descriptor_dim, steps * backbone_channels);
    }

    void validate() const;
    ModelSpec<double> model_spec() const;
    OptimizerConfig optimizer_config() const;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ConfigField {
    std::string name;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline double parse_double_strict(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: value '" + s + "' for key '" + key + "' is not a number");
    }
    require(used == s.size(), "config: trailing characters in value '" + s + "' for key '" + key + "'");
    return v;
}

inline std::int64_t parse_int_strict(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: value '" + s + "' for key '" + key + "' is not an integer");
    }
    require(used == s.size(), "config: trailing characters in value '" + s + "' for key '" + key + "'");
    return v;
}

inline bool parse_bool_strict(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("config: value '" + s + "' for key '" + key + "' is not a bool");
}

inline const std::vector<ConfigField>& config_fields() {
    auto int_field = [](const std::string& name, Index ExperimentConfig::* member) {
        return ConfigField{
            name,
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
            [member, name](ExperimentConfig& c, const std::string& v) {
                c.*member = static_cast<Index>(parse_int_strict(v, name));
            }};
    };
    auto dbl_field = [](const std::string& name, double ExperimentConfig::* member) {
        return ConfigField{
            name, [member](const ExperimentConfig& c) { return format_double(c.*member); },
            [member, name](ExperimentConfig& c, const std::string& v) {
                c.*member = parse_double_strict(v, name);
            }};
    };
    auto bool_field = [](const std::string& name, bool ExperimentConfig::* member) {
        return ConfigField{
            name,
            [member](const ExperimentConfig& c) { return (c.*member) ? "true" : "false"; },
            [member, name](ExperimentConfig& c, const std::string& v) {
                c.*member = parse_bool_strict(v, name);
            }};
    };
    auto str_field = [](const std::string& name, std::string ExperimentConfig::* member) {
        return ConfigField{name, [member](const ExperimentConfig& c) { return c.*member; },
                           [member](ExperimentConfig& c, const std::string& v) { c.*member = v; }};
    };
    static const std::vector<ConfigField> fields = {
        ConfigField{"seed",
                    [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                    [](ExperimentConfig& c, const std::string& v) {
                        c.seed = static_cast<std::uint64_t>(parse_int_strict(v, "seed"));
                    }},
        int_field("epochs", &ExperimentConfig::epochs),
        int_field("instances", &ExperimentConfig::instances),
        int_field("views", &ExperimentConfig::views),
        int_field("image_size", &ExperimentConfig::image_size),
        dbl_field("holdout_fraction", &ExperimentConfig::holdout_fraction),
        int_field("backbone_blocks", &ExperimentConfig::backbone_blocks),
        int_field("backbone_channels", &ExperimentConfig::backbone_channels),
        int_field("backbone_stride", &ExperimentConfig::backbone_stride),
        bool_field("backbone_trainable", &ExperimentConfig::backbone_trainable),
        int_field("steps", &ExperimentConfig::steps),
        dbl_field("theta", &ExperimentConfig::theta),
        int_field("scale_count", &ExperimentConfig::scale_count),
        str_field("pooling", &ExperimentConfig::pooling),
        dbl_field("gem_p", &ExperimentConfig::gem_p),
        int_field("descriptor_dim", &ExperimentConfig::descriptor_dim),
        str_field("proposal_mode", &ExperimentConfig::proposal_mode),
        dbl_field("learning_rate", &ExperimentConfig::learning_rate),
        dbl_field("decay_rate", &ExperimentConfig::decay_rate),
        dbl_field("beta1", &ExperimentConfig::beta1),
        dbl_field("beta2", &ExperimentConfig::beta2),
        dbl_field("weight_decay", &ExperimentConfig::weight_decay),
        dbl_field("tau", &ExperimentConfig::tau),
        int_field("batch_tuples", &ExperimentConfig::batch_tuples),
        int_field("n_negatives", &ExperimentConfig::n_negatives),
        int_field("tuples_per_epoch", &ExperimentConfig::tuples_per_epoch),
        bool_field("multiscale", &ExperimentConfig::multiscale),
        ConfigField{"scales",
                    [](const ExperimentConfig& c) {
                        std::string s;
                        for (std::size_t i = 0; i < c.scales.size(); ++i)
                            s += (i ? "," : "") + format_double(c.scales[i]);
                        return s;
                    },
                    [](ExperimentConfig& c, const std::string& v) {
                        c.scales.clear();
                        std::stringstream ss(v);
                        std::string item;
                        while (std::getline(ss, item, ','))
                            c.scales.push_back(parse_double_strict(item, "scales"));
                        require(!c.scales.empty(), "config: 'scales' must list at least one ratio");
                    }},
        bool_field("whitening", &ExperimentConfig::whitening),
        int_field("whitening_dim", &ExperimentConfig::whitening_dim),
    };
    return fields;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    require(epochs >= 0, "config: epochs must be non-negative");
    require(instances >= 2, "config: instances must be >= 2");
    require(views >= 2, "config: views must be >= 2");
    require(image_size >= 32, "config: image_size must be >= 32");
    require(holdout_fraction > 0 && holdout_fraction < 1,
            "config: holdout_fraction must lie in (0,1)");
    require(backbone_blocks >= 1, "config: backbone_blocks must be >= 1");
    require(backbone_channels >= 4, "config: backbone_channels must be >= 4");
    require(backbone_stride >= 1, "config: backbone_stride must be >= 1");
    require(steps >= 1, "config: steps (K) must be >= 1");
    require(theta > 0 && theta < 1, "config: theta must lie in (0,1)");
    require(scale_count >= 0 && scale_count <= 5, "config: scale_count (L) must lie in 0..5");
    parse_pooling(pooling);
    require(gem_p >= 1, "config: gem_p must be >= 1");
    require(descriptor_dim >= 1, "config: descriptor_dim must be >= 1");
    require(proposal_mode == "soft" || proposal_mode == "hard",
            "config: proposal_mode must be soft or hard");
    require(learning_rate > 0, "config: learning_rate must be positive");
    require(tau > 0, "config: tau must be positive");
    require(batch_tuples >= 1 && n_negatives >= 1 && tuples_per_epoch >= 1,
            "config: batch/tuple counts must be positive");
    for (double s : scales) require(s > 0, "config: scales must be positive");
    require(whitening_dim >= 0, "config: whitening_dim must be non-negative");
    require(whitening_dim <= effective_descriptor_dim(),
            "config: whitening_dim cannot exceed the descriptor dim");
}

inline ModelSpec<double> ExperimentConfig::model_spec() const {
    ModelSpec<double> spec;
    spec.backbone.blocks = backbone_blocks;
    spec.backbone.channels = backbone_channels;
    spec.backbone.stride = backbone_stride;
    spec.backbone_trainable = backbone_trainable;
    spec.steps = steps;
    spec.theta = theta;
    spec.scale_count = scale_count;
    spec.pooling = parse_pooling(pooling);
    spec.gem_p = gem_p;
    spec.descriptor_dim = effective_descriptor_dim();
    spec.proposal_mode = proposal_mode == "hard" ? ProposalMode::Hard : ProposalMode::Soft;
    return spec;
}

inline OptimizerConfig ExperimentConfig::optimizer_config() const {
    OptimizerConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.decay_rate = decay_rate;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.weight_decay = weight_decay;
    cfg.tau = tau;
    cfg.batch_tuples = batch_tuples;
    cfg.n_negatives = n_negatives;
    cfg.tuples_per_epoch = tuples_per_epoch;
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    for (const auto& f : detail::config_fields()) out += f.name + " = " + f.get(c) + "\n";
    return out;
}

inline void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    for (const auto& f : detail::config_fields())
        if (f.name == key) {
            f.set(c, value);
            return;
        }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Parses "key = value" lines; '#' starts a comment; unknown or repeated keys
/// are errors.
inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        std::string key = line.substr(0, eq == std::string::npos ? line.size() : eq);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
        };
        trim(key);
        if (key.empty() && eq == std::string::npos) continue;
        require(eq != std::string::npos,
                "config line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string value = line.substr(eq + 1);
        trim(value);
        require(!key.empty(), "config line " + std::to_string(line_no) + ": empty key");
        require(seen.insert(key).second,
                "config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        try {
            set_config_key(c, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return c;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config: " + path);
    return parse_config(in);
}

/// Hash over the keys that define the trained model (architecture, seed,
/// dataset and optimization), excluding evaluation-time switches and the
/// epoch budget, so a resumed or re-evaluated run stays compatible.
inline std::uint64_t config_model_hash(const ExperimentConfig& c) {
    static const std::set<std::string> excluded = {"epochs", "multiscale", "scales", "whitening",
                                                   "whitening_dim"};
    Fnv1a h;
    for (const auto& f : detail::config_fields())
        if (!excluded.count(f.name)) {
            h.update_string(f.name);
            h.update_string("=");
            h.update_string(f.get(c));
            h.update_string("\n");
        }
    return h.digest();
}

}  // namespace asda

#endif
