#ifndef ASDA_HARNESS_HPP
#define ASDA_HARNESS_HPP

#include "asda/config.hpp"
#include "asda/evaluation.hpp"
#include "asda/postprocess.hpp"
#include "asda/records.hpp"
#include "asda/synth.hpp"
#include "asda/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace asda {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Training entry point.

template <typename Scalar>
struct TrainOutputs {
    Model<Scalar> model;
    AdamState<Scalar> adam;
    TrainResult<Scalar> result;
    Index completed_epochs = 0;
    std::string checkpoint_path;
    std::string metrics_path;
};

/// Generates the dataset, trains per config, checkpoints after every epoch
/// and writes one metrics CSV row per epoch.
template <typename Scalar>
TrainOutputs<Scalar> run_train(const ExperimentConfig& config, const std::string& out_dir,
                               const std::string& resume_path = "", bool quiet = false) {
    config.validate();
    fs::create_directories(out_dir);
    const std::uint64_t hash = config_model_hash(config);

    const SynthDataset<Scalar> ds = generate_dataset<Scalar>(
        config.seed, static_cast<int>(config.instances), static_cast<int>(config.views),
        config.image_size);
    const DatasetSplit split =
        split_instances(static_cast<int>(config.instances), config.holdout_fraction, config.seed);
    std::vector<ImageTensor<Scalar>> train_images, val_images;
    std::vector<int> train_labels, val_labels;
    collect_views(ds, split.train_instances, train_images, train_labels);
    collect_views(ds, split.val_instances, val_images, val_labels);

    TrainOutputs<Scalar> out;
    out.model = build_model(config.model_spec(), config.seed);
    out.adam = AdamState<Scalar>::zeros(model_param_count(out.model));
    Index start_epoch = 0;
    if (!resume_path.empty()) {
        const RecordFile rec = read_records(resume_path);
        require(rec.config_hash == hash,
                "resume: checkpoint config hash does not match this configuration");
        model_from_records(out.model, rec, &out.adam);
        start_epoch = static_cast<Index>(rec.epoch);
    }

    out.checkpoint_path = (fs::path(out_dir) / "checkpoint.asdackpt").string();
    out.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream metrics(out.metrics_path,
                          start_epoch > 0 ? std::ios::app : std::ios::trunc);
    require(metrics.good(), "cannot open for writing: " + out.metrics_path);
    if (start_epoch == 0) metrics << "epoch,lr,train_loss,val_loss\n";
    metrics << std::setprecision(12);

    const Index epochs_left = std::max<Index>(0, config.epochs - start_epoch);
    auto on_epoch = [&](const Model<Scalar>& m, const AdamState<Scalar>& adam, Index e,
                        const EpochMetrics& row) {
        RecordFile rec = model_to_records(m, &adam);
        rec.config_hash = hash;
        rec.epoch = static_cast<std::uint32_t>(e + 1);  // completed epochs
        write_records(rec, out.checkpoint_path);
        metrics << row.epoch << "," << row.learning_rate << "," << row.train_loss << ","
                << row.val_loss << "\n";
        metrics.flush();
        if (!quiet)
            std::fprintf(stderr, "epoch %lld lr %.3e train %.6f val %.6f\n",
                         static_cast<long long>(row.epoch), row.learning_rate, row.train_loss,
                         row.val_loss);
    };
    const std::function<void(const Model<Scalar>&, const AdamState<Scalar>&, Index,
                             const EpochMetrics&)>
        epoch_cb = on_epoch;
    out.result = train(out.model, train_images, train_labels, val_images, val_labels,
                       config.optimizer_config(), epochs_left, config.seed, &out.adam,
                       start_epoch, epoch_cb);
    out.completed_epochs = start_epoch + static_cast<Index>(out.result.epochs.size());
    if (out.result.epochs.empty()) {
        // no epoch ran; still leave a usable checkpoint for a pure-eval workflow
        RecordFile rec = model_to_records(out.model, &out.adam);
        rec.config_hash = hash;
        rec.epoch = static_cast<std::uint32_t>(start_epoch);
        write_records(rec, out.checkpoint_path);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation over the synthetic protocol (queries = view 0 of each held-out
// instance, database = the remaining held-out views).

struct EvalOptions {
    bool multiscale = false;
    bool whitening = false;
    bool compare_postprocess = false;  // emit SS and MS+LW side by side
};

struct EvalVariantResult {
    std::string variant;
    double map = 0;
    std::vector<std::pair<std::string, double>> per_query;  // (query id, AP)
};

template <typename Scalar>
Descriptor<Scalar> descriptor_with_options(const Model<Scalar>& model,
                                           const ImageTensor<Scalar>& image, bool multiscale,
                                           const std::vector<double>& scales,
                                           const WhiteningProjection<Scalar>* lw) {
    Descriptor<Scalar> d =
        multiscale ? multiscale_descriptor(model, image, scales) : model_forward_image(model, image);
    if (lw) d = apply_whitening(d, *lw);
    return d;
}

/// Same-instance descriptor pairs from the training split, for fitting the
/// learned whitening.
template <typename Scalar>
WhiteningProjection<Scalar> fit_whitening_on_split(const Model<Scalar>& model,
                                                   const SynthDataset<Scalar>& ds,
                                                   const DatasetSplit& split, bool multiscale,
                                                   const std::vector<double>& scales,
                                                   Index output_dim) {
    std::map<int, std::vector<Descriptor<Scalar>>> per_instance;
    std::vector<Descriptor<Scalar>> all;
    for (const auto& v : ds.views) {
        bool in_train = false;
        for (int i : split.train_instances) in_train |= (i == v.instance);
        if (!in_train) continue;
        Descriptor<Scalar> d =
            descriptor_with_options<Scalar>(model, v.image, multiscale, scales, nullptr);
        per_instance[v.instance].push_back(d);
        all.push_back(std::move(d));
    }
    std::vector<std::pair<Descriptor<Scalar>, Descriptor<Scalar>>> pairs;
    for (const auto& [inst, ds_list] : per_instance)
        for (std::size_t a = 0; a < ds_list.size(); ++a)
            for (std::size_t b = a + 1; b < ds_list.size(); ++b)
                pairs.emplace_back(ds_list[a], ds_list[b]);
    return fit_whitening(pairs, all, output_dim);
}

template <typename Scalar>
RecordFile whitening_to_records(const WhiteningProjection<Scalar>& w) {
    RecordFile f;
    f.add_vector("whitening.mean", w.mean);
    f.add_matrix("whitening.projection", w.projection);
    return f;
}

template <typename Scalar>
WhiteningProjection<Scalar> whitening_from_records(const RecordFile& f) {
    WhiteningProjection<Scalar> w;
    w.mean = f.vector<Scalar>("whitening.mean");
    w.projection = f.matrix<Scalar>("whitening.projection");
    require(w.projection.cols() == w.mean.size(), "whitening file: inconsistent dimensions");
    return w;
}

template <typename Scalar>
EvalVariantResult evaluate_synth(const Model<Scalar>& model, const SynthDataset<Scalar>& ds,
                                 const DatasetSplit& split, bool multiscale,
                                 const std::vector<double>& scales,
                                 const WhiteningProjection<Scalar>* lw,
                                 const std::string& variant_name) {
    std::vector<std::size_t> query_ix, db_ix;
    for (std::size_t i = 0; i < ds.views.size(); ++i) {
        bool held_out = false;
        for (int inst : split.eval_instances) held_out |= (inst == ds.views[i].instance);
        if (!held_out) continue;
        if (ds.views[i].view == 0)
            query_ix.push_back(i);
        else
            db_ix.push_back(i);
    }
    require(!query_ix.empty() && !db_ix.empty(), "evaluate: empty evaluation split");
    std::vector<Descriptor<Scalar>> db;
    db.reserve(db_ix.size());
    for (std::size_t i : db_ix)
        db.push_back(descriptor_with_options(model, ds.views[i].image, multiscale, scales, lw));
    EvalVariantResult out;
    out.variant = variant_name;
    std::vector<double> aps;
    for (std::size_t qi : query_ix) {
        const Descriptor<Scalar> q =
            descriptor_with_options(model, ds.views[qi].image, multiscale, scales, lw);
        const Ranking ranking = rank_database(q, db);
        std::set<Index> positives;
        for (std::size_t j = 0; j < db_ix.size(); ++j)
            if (ds.views[db_ix[j]].instance == ds.views[qi].instance)
                positives.insert(static_cast<Index>(j));
        const double ap = average_precision(ranking, positives);
        aps.push_back(ap);
        out.per_query.emplace_back(ds.views[qi].id, ap);
    }
    out.map = mean_average_precision(aps);
    return out;
}

/// Loads a checkpoint (hash-checked), computes descriptors per the requested
/// post-processing, reports mAP, and writes eval.csv plus summary.json.
template <typename Scalar>
std::vector<EvalVariantResult> run_eval(const ExperimentConfig& config,
                                        const std::string& checkpoint_path,
                                        const std::string& out_dir, const EvalOptions& options) {
    config.validate();
    fs::create_directories(out_dir);
    const std::uint64_t hash = config_model_hash(config);
    const RecordFile rec = read_records(checkpoint_path);
    require(rec.config_hash == hash,
            "eval: checkpoint config hash does not match this configuration");
    Model<Scalar> model = build_model(config.model_spec(), config.seed);
    model_from_records<Scalar>(model, rec);

    const SynthDataset<Scalar> ds = generate_dataset<Scalar>(
        config.seed, static_cast<int>(config.instances), static_cast<int>(config.views),
        config.image_size);
    const DatasetSplit split =
        split_instances(static_cast<int>(config.instances), config.holdout_fraction, config.seed);

    const Index lw_dim =
        config.whitening_dim > 0 ? config.whitening_dim : model.descriptor_dim();
    std::vector<EvalVariantResult> results;
    auto run_variant = [&](bool ms, bool lw, const std::string& name) {
        std::optional<WhiteningProjection<Scalar>> proj;
        if (lw) {
            proj = fit_whitening_on_split(model, ds, split, ms, config.scales, lw_dim);
            write_records(whitening_to_records(*proj),
                          (fs::path(out_dir) / "whitening.asdackpt").string());
        }
        results.push_back(evaluate_synth<Scalar>(model, ds, split, ms, config.scales,
                                                 proj ? &*proj : nullptr, name));
    };
    if (options.compare_postprocess) {
        run_variant(false, false, "SS");
        run_variant(true, true, "MS+LW");
    } else {
        std::string name = options.multiscale ? "MS" : "SS";
        if (options.whitening) name += "+LW";
        run_variant(options.multiscale, options.whitening, name);
    }

    std::ofstream csv(fs::path(out_dir) / "eval.csv");
    csv << "variant,mAP,queries\n" << std::setprecision(12);
    nlohmann::json summary;
    summary["config_hash"] = hash;
    summary["checkpoint_epochs"] = rec.epoch;
    for (const auto& r : results) {
        csv << r.variant << "," << r.map << "," << r.per_query.size() << "\n";
        nlohmann::json jr;
        jr["variant"] = r.variant;
        jr["mAP"] = r.map;
        for (const auto& [qid, ap] : r.per_query) jr["per_query"][qid] = ap;
        summary["results"].push_back(jr);
    }
    std::ofstream js(fs::path(out_dir) / "summary.json");
    js << summary.dump(2) << "\n";
    return results;
}

// ---------------------------------------------------------------------------
// File-based evaluation: precomputed descriptors plus a groundtruth file.

inline std::vector<std::pair<std::string, Descriptor<double>>> read_descriptor_dir(
    const std::string& dir) {
    std::vector<std::pair<std::string, Descriptor<double>>> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".asdadsc") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) out.emplace_back(p.stem().string(), read_descriptor<double>(p.string()));
    require(!out.empty(), "no .asdadsc descriptors found in " + dir);
    return out;
}

inline EvalVariantResult run_eval_files(const std::string& query_dir, const std::string& db_dir,
                                        const std::string& gt_path, EvalSetup setup) {
    const auto queries = read_descriptor_dir(query_dir);
    const auto db = read_descriptor_dir(db_dir);
    std::ifstream gt_in(gt_path);
    require(gt_in.good(), "cannot open groundtruth: " + gt_path);
    const auto gt = load_groundtruth(gt_in, setup);
    std::map<std::string, std::size_t> db_index;
    for (std::size_t i = 0; i < db.size(); ++i) db_index[db[i].first] = i;
    std::map<std::string, const Descriptor<double>*> query_index;
    for (const auto& [id, d] : queries) query_index[id] = &d;

    EvalVariantResult out;
    out.variant = setup_name(setup);
    std::vector<double> aps;
    for (const auto& rec : gt) {
        auto qit = query_index.find(rec.query_id);
        require(qit != query_index.end(), "groundtruth query '" + rec.query_id + "' has no descriptor");
        std::vector<Descriptor<double>> vectors;
        std::vector<std::string> names;
        for (const auto& [id, d] : db) {
            if (id == rec.query_id) continue;  // the query never ranks itself
            names.push_back(id);
            vectors.push_back(d);
        }
        const Ranking ranking = rank_database(*qit->second, vectors);
        std::set<Index> positives, ignored;
        std::map<std::string, Index> name_to_ix;
        for (std::size_t i = 0; i < names.size(); ++i) name_to_ix[names[i]] = static_cast<Index>(i);
        for (const auto& id : rec.positives) {
            auto it = name_to_ix.find(id);
            require(it != name_to_ix.end(), "groundtruth positive '" + id + "' not in database");
            positives.insert(it->second);
        }
        for (const auto& id : rec.ignored) {
            auto it = name_to_ix.find(id);
            if (it != name_to_ix.end()) ignored.insert(it->second);
        }
        const double ap = average_precision(ranking, positives, ignored);
        aps.push_back(ap);
        out.per_query.emplace_back(rec.query_id, ap);
    }
    out.map = mean_average_precision(aps);
    return out;
}

// ---------------------------------------------------------------------------
// Ablation sweeps.

enum class AblationAxis { ScaleCount, Dimensionality, Proposal, PoolingStrategy, Postprocess };

inline AblationAxis parse_axis(const std::string& s) {
    if (s == "L" || s == "scales") return AblationAxis::ScaleCount;
    if (s == "D" || s == "dim") return AblationAxis::Dimensionality;
    if (s == "proposal") return AblationAxis::Proposal;
    if (s == "pooling") return AblationAxis::PoolingStrategy;
    if (s == "postprocess") return AblationAxis::Postprocess;
    throw std::invalid_argument("unknown ablation axis: " + s +
                                " (expected L|D|proposal|pooling|postprocess)");
}

inline std::string axis_name(AblationAxis a) {
    switch (a) {
        case AblationAxis::ScaleCount: return "L";
        case AblationAxis::Dimensionality: return "D";
        case AblationAxis::Proposal: return "proposal";
        case AblationAxis::PoolingStrategy: return "pooling";
        case AblationAxis::Postprocess: return "postprocess";
    }
    return "?";
}

struct AblationRow {
    std::string setting;
    double map = 0;
};

/// Minimal SVG bar chart, value labels on top.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<AblationRow>& rows) {
    const int bar_w = 64, gap = 24, h = 320, margin = 56;
    const int w = margin * 2 + static_cast<int>(rows.size()) * (bar_w + gap);
    double max_v = 1e-9;
    for (const auto& r : rows) max_v = std::max(max_v, r.map);
    std::ofstream out(path);
    require(out.good(), "cannot open for writing: " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    out << "<line x1='" << margin - 8 << "' y1='" << h - margin << "' x2='" << w - margin / 2
        << "' y2='" << h - margin << "' stroke='black'/>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double frac = rows[i].map / max_v;
        const int bh = static_cast<int>(frac * (h - 2 * margin));
        const int x = margin + static_cast<int>(i) * (bar_w + gap);
        const int y = h - margin - bh;
        out << "<rect x='" << x << "' y='" << y << "' width='" << bar_w << "' height='" << bh
            << "' fill='#4878a8'/>\n";
        out << "<text x='" << x + bar_w / 2 << "' y='" << y - 4
            << "' text-anchor='middle' font-size='11'>" << std::fixed << std::setprecision(3)
            << rows[i].map << "</text>\n";
        out << "<text x='" << x + bar_w / 2 << "' y='" << h - margin + 16
            << "' text-anchor='middle' font-size='11'>" << rows[i].setting << "</text>\n";
    }
    out << "</svg>\n";
}

/// One (train + eval) run per setting along the chosen axis, all from the
/// same seed; emits ablation_<axis>.csv and an SVG plot.
template <typename Scalar>
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, AblationAxis axis,
                                      const std::string& out_dir, bool quiet = true) {
    base.validate();
    fs::create_directories(out_dir);
    struct Variant {
        std::string label;
        ExperimentConfig config;
        EvalOptions eval;
    };
    std::vector<Variant> variants;
    auto push = [&](const std::string& label, ExperimentConfig c, EvalOptions e = {}) {
        variants.push_back({label, std::move(c), e});
    };
    switch (axis) {
        case AblationAxis::ScaleCount:
            for (Index l = 0; l <= 5; ++l) {
                ExperimentConfig c = base;
                c.scale_count = l;
                push("L=" + std::to_string(l), c);
            }
            break;
        case AblationAxis::Dimensionality:
            for (Index d : {8, 16, 32, 64}) {
                ExperimentConfig c = base;
                c.descriptor_dim = d;
                push("D=" + std::to_string(d), c);
            }
            break;
        case AblationAxis::Proposal: {
            ExperimentConfig hda = base;
            hda.proposal_mode = "hard";
            push("HDA", hda);
            ExperimentConfig sda = base;
            sda.steps = 1;
            push("SDA", sda);
            push("ASDA", base);
            break;
        }
        case AblationAxis::PoolingStrategy:
            for (const char* p : {"avg", "gem", "mac"}) {
                ExperimentConfig c = base;
                c.pooling = p;
                push(p, c);
            }
            break;
        case AblationAxis::Postprocess: {
            push("SS", base);
            EvalOptions mslw;
            mslw.multiscale = true;
            mslw.whitening = true;
            push("MS+LW", base, mslw);
            break;
        }
    }
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        const std::string row_dir = (fs::path(out_dir) / ("row_" + v.label)).string();
        const TrainOutputs<Scalar> tr = run_train<Scalar>(v.config, row_dir, "", quiet);
        const auto results =
            run_eval<Scalar>(v.config, tr.checkpoint_path, row_dir, v.eval);
        rows.push_back({v.label, results.front().map});
    }
    const std::string csv_path =
        (fs::path(out_dir) / ("ablation_" + axis_name(axis) + ".csv")).string();
    std::ofstream csv(csv_path);
    require(csv.good(), "cannot open for writing: " + csv_path);
    csv << "setting,mAP\n" << std::setprecision(12);
    for (const auto& r : rows) csv << r.setting << "," << r.map << "\n";
    write_svg_plot((fs::path(out_dir) / ("ablation_" + axis_name(axis) + ".svg")).string(),
                   "mAP by " + axis_name(axis), rows);
    return rows;
}

}  // namespace asda

#endif
