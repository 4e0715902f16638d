// Command-line front end: dataset generation, training, evaluation,
// ablation sweeps, and single-image description.

#include "asda/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace asda;

/// Builds a config from an optional file plus per-key command-line overrides.
struct ConfigArgs {
    std::string config_path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
        for (const auto& field : detail::config_fields()) {
            const std::string name = field.name;
            cmd->add_option_function<std::string>(
                "--" + name,
                [this, name](const std::string& v) { overrides[name] = v; },
                "override config key '" + name + "'");
        }
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c =
            config_path.empty() ? ExperimentConfig{} : parse_config_file(config_path);
        for (const auto& [k, v] : overrides) set_config_key(c, k, v);
        c.validate();
        return c;
    }
};

int cmd_gen_data(const ExperimentConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto ds = generate_dataset<double>(config.seed, static_cast<int>(config.instances),
                                             static_cast<int>(config.views), config.image_size);
    const auto split = split_instances(static_cast<int>(config.instances),
                                       config.holdout_fraction, config.seed);
    std::vector<std::string> paths;
    paths.reserve(ds.views.size());
    for (const auto& v : ds.views) {
        const std::string p = (fs::path(out_dir) / (v.id + ".ppm")).string();
        write_ppm(v.image, p);
        paths.push_back(p);
    }
    std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
    write_manifest(ds, split, manifest, &paths);
    std::cout << "wrote " << ds.views.size() << " images and manifest.csv to " << out_dir << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& out_dir,
              const std::string& resume) {
    const auto out = run_train<double>(config, out_dir, resume, /*quiet=*/false);
    std::cout << "trained " << out.completed_epochs << " epochs; checkpoint at "
              << out.checkpoint_path << "\n";
    if (out.result.diverged) {
        std::cerr << "training halted on non-finite loss; last good checkpoint retained\n";
        return 2;
    }
    return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& checkpoint,
             const std::string& out_dir, const EvalOptions& options) {
    const auto results = run_eval<double>(config, checkpoint, out_dir, options);
    for (const auto& r : results)
        std::cout << r.variant << " mAP " << r.map << " over " << r.per_query.size()
                  << " queries\n";
    return 0;
}

int cmd_eval_files(const std::string& query_dir, const std::string& db_dir,
                   const std::string& gt_path, const std::string& setup,
                   const std::string& out_dir) {
    const EvalVariantResult r = run_eval_files(query_dir, db_dir, gt_path, parse_setup(setup));
    std::cout << "setup " << r.variant << " mAP " << r.map << " over " << r.per_query.size()
              << " queries\n";
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "eval.csv");
        csv << "query,AP\n" << std::setprecision(12);
        for (const auto& [q, ap] : r.per_query) csv << q << "," << ap << "\n";
        csv << "mAP," << r.map << "\n";
    }
    return 0;
}

int cmd_ablate(const ExperimentConfig& config, const std::string& axis,
               const std::string& out_dir) {
    const auto rows = run_ablation<double>(config, parse_axis(axis), out_dir);
    for (const auto& r : rows) std::cout << r.setting << " mAP " << r.map << "\n";
    std::cout << "wrote ablation_" << axis << ".csv and .svg to " << out_dir << "\n";
    return 0;
}

int cmd_describe(const ExperimentConfig& config, const std::string& checkpoint,
                 const std::string& input, const std::string& output, bool csv, bool multiscale,
                 const std::string& whitening_file) {
    Model<double> model = build_model(config.model_spec(), config.seed);
    const RecordFile rec = read_records(checkpoint);
    require(rec.config_hash == config_model_hash(config),
            "describe: checkpoint config hash does not match this configuration");
    model_from_records(model, rec);
    std::optional<WhiteningProjection<double>> lw;
    if (!whitening_file.empty())
        lw = whitening_from_records<double>(read_records(whitening_file));

    Descriptor<double> d;
    if (input.size() >= 7 && input.substr(input.size() - 7) == ".asdafm") {
        require(!multiscale, "describe: --multiscale needs an image input, not a feature map");
        const FeatureMap<double> f = read_feature_map<double>(input);
        d = model_forward_map(model, f);
        if (lw) d = apply_whitening(d, *lw);
    } else {
        const ImageTensor<double> img = read_ppm<double>(input);
        d = descriptor_with_options(model, img, multiscale, config.scales,
                                    lw ? &*lw : nullptr);
    }
    if (csv)
        write_descriptor_csv(d, output);
    else
        write_descriptor(d, output);
    std::cout << "wrote " << d.size() << "-dim descriptor to " << output << "\n";
    return 0;
}

int cmd_regions(Index height, Index width, Index scales, const std::string& out_path) {
    const RegionSet set = generate_candidate_regions(height, width, scales);
    const std::string csv = region_list_csv(set);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        require(out.good(), "cannot open for writing: " + out_path);
        out << csv;
    }
    for (const auto& w : set.overlap_warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial soft-detection aggregation for image retrieval"};
    app.require_subcommand(1);

    ConfigArgs gen_cfg, train_cfg, eval_cfg, ablate_cfg, describe_cfg;
    std::string out_dir, resume, checkpoint, axis, input, output, whitening_file;
    std::string query_dir, db_dir, gt_path, setup = "custom";
    bool flag_csv = false, flag_compare = false;
    Index r_height = 8, r_width = 8, r_scales = 4;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset as PPM files");
    gen_cfg.attach(gen);
    gen->add_option("--out", out_dir, "output directory")->required();

    CLI::App* tr = app.add_subcommand("train", "train the pipeline end to end");
    train_cfg.attach(tr);
    tr->add_option("--out", out_dir, "output directory")->required();
    tr->add_option("--resume", resume, "checkpoint to resume from");

    CLI::App* ev = app.add_subcommand("eval", "evaluate retrieval mAP");
    eval_cfg.attach(ev);  // --multiscale / --whitening come from the config keys
    ev->add_option("--checkpoint", checkpoint, "trained checkpoint (synthetic protocol)");
    ev->add_option("--out", out_dir, "output directory");
    ev->add_flag("--compare-postprocess", flag_compare, "report SS and MS+LW side by side");
    ev->add_option("--query-dir", query_dir, "precomputed query descriptors (.asdadsc)");
    ev->add_option("--db-dir", db_dir, "precomputed database descriptors (.asdadsc)");
    ev->add_option("--gt", gt_path, "groundtruth file");
    ev->add_option("--setup", setup, "M, H or custom (file-based evaluation)");

    CLI::App* ab = app.add_subcommand("ablate", "sweep one axis and emit a results table");
    ablate_cfg.attach(ab);
    ab->add_option("--axis", axis, "L, D, proposal, pooling or postprocess")->required();
    ab->add_option("--out", out_dir, "output directory")->required();

    CLI::App* de = app.add_subcommand("describe", "one image or feature map -> descriptor file");
    describe_cfg.attach(de);
    de->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    de->add_option("--input", input, "input .ppm image or .asdafm feature map")->required();
    de->add_option("--output", output, "output descriptor path")->required();
    de->add_flag("--csv", flag_csv, "write CSV instead of the binary record");
    de->add_option("--whitening-file", whitening_file, "apply a saved whitening projection");

    CLI::App* rg = app.add_subcommand("regions", "export the candidate region list as CSV");
    rg->add_option("--height", r_height, "feature map height (cells)");
    rg->add_option("--width", r_width, "feature map width (cells)");
    rg->add_option("--scales", r_scales, "number of sliding-window scales L");
    rg->add_option("--out", output, "output CSV path (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_cfg.resolve(), out_dir);
        if (tr->parsed()) return cmd_train(train_cfg.resolve(), out_dir, resume);
        if (ev->parsed()) {
            if (!query_dir.empty() || !db_dir.empty() || !gt_path.empty())
                return cmd_eval_files(query_dir, db_dir, gt_path, setup,
                                      out_dir.empty() ? "" : out_dir);
            require(!checkpoint.empty(), "eval: --checkpoint is required (or use --query-dir/--db-dir/--gt)");
            const ExperimentConfig cfg = eval_cfg.resolve();
            EvalOptions options;
            options.multiscale = cfg.multiscale;
            options.whitening = cfg.whitening;
            options.compare_postprocess = flag_compare;
            return cmd_eval(cfg, checkpoint, out_dir.empty() ? "eval_out" : out_dir, options);
        }
        if (ab->parsed()) return cmd_ablate(ablate_cfg.resolve(), axis, out_dir);
        if (de->parsed()) {
            const ExperimentConfig cfg = describe_cfg.resolve();
            return cmd_describe(cfg, checkpoint, input, output, flag_csv, cfg.multiscale,
                                whitening_file);
        }
        if (rg->parsed()) return cmd_regions(r_height, r_width, r_scales, output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
