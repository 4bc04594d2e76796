#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dropvision/harness.hpp"
#include "dropvision/synth.hpp"

namespace fs = std::filesystem;
using namespace dropvision;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string scale;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "TOML or JSON configuration file");
    cmd->add_option("--seed", f.seed, "override the base seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--scale", f.scale, "model/training presets: desk or full")
        ->check(CLI::IsMember({"desk", "full"}));
}

// File first, then flags on top.
ExperimentConfig experiment_from(const CommonFlags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config.empty()) j = load_config_file(f.config);
    if (!f.scale.empty()) j["scale"] = f.scale;
    ExperimentConfig cfg = j.get<ExperimentConfig>();
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

int fail_usage(const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
}

int fail_runtime(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
}

void print_summary(const ExperimentResult& r) {
    std::printf("pipeline %s: %zu repeat(s)\n", pipeline_to_string(r.pipeline),
                r.runs.size());
    for (const RepeatResult& rr : r.runs)
        std::printf("  repeat %d (seed %llu): accuracy %.4f  auc %.4f\n", rr.repeat,
                    static_cast<unsigned long long>(rr.seed), rr.accuracy, rr.auc_crystals);
    std::printf("  accuracy %.4f +/- %.4f\n", r.mean_accuracy, r.std_accuracy);
    std::printf("  auc      %.4f +/- %.4f\n", r.mean_auc, r.std_auc);
}

void print_finder_table(const FinderEvalTable& table) {
    std::printf("%-12s %6s %10s %10s %10s %10s\n", "source", "n", "dice", "std", "iou",
                "std");
    auto row = [](const SourceStats& s) {
        std::printf("%-12s %6zu %10.4f %10.4f %10.4f %10.4f\n", s.source.c_str(), s.count,
                    s.mean_dice, s.std_dice, s.mean_iou, s.std_iou);
    };
    for (const SourceStats& s : table.per_source) row(s);
    row(table.overall);
}

void persist_result(const ExperimentResult& result, const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec && fs::is_directory(out), "cannot create output directory " + out.string());
    write_result_json(out / "result.json", result);
    emit_plots(result, out);
    std::printf("wrote %s\n", (out / "result.json").string().c_str());
}

int cmd_synth(const CommonFlags& flags, int per_class) {
    SynthConfig cfg;
    std::vector<SourceProfile> profiles = default_source_profiles();
    try {
        if (!flags.config.empty()) {
            const nlohmann::json j = load_config_file(flags.config);
            if (j.contains("config")) {
                j.at("config").get_to(cfg);
                if (j.contains("profiles")) j.at("profiles").get_to(profiles);
                per_class = j.value("per_class", per_class);
            } else {
                j.get_to(cfg);
            }
        }
        if (!flags.scale.empty()) cfg.image_size = flags.scale == "desk" ? 96 : 512;
        if (flags.seed) cfg.seed = *flags.seed;
        require(!flags.out.empty(), "synth requires --out <directory>");
        cfg.validate();
        require(per_class >= 1, "--per-class must be >= 1");
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        generate_dataset(cfg, profiles, per_class, flags.out);
        std::printf("wrote %zu images to %s\n", profiles.size() * 3 * per_class,
                    flags.out.c_str());
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

int cmd_train_finder(const CommonFlags& flags) {
    ExperimentConfig cfg;
    try {
        cfg = experiment_from(flags);
        require(!cfg.dataset_root.empty(), "train-finder requires dataset_root in --config");
        require(!cfg.out_dir.empty(), "train-finder requires --out <directory>");
        cfg.finder.validate();
        cfg.finder_arch().validate();
        cfg.finder_aug.validate();
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        const DatasetManifest manifest = load_manifest(cfg.dataset_root);
        require(manifest.all_have_masks(), "train-finder needs ground-truth masks");
        auto [train_m, eval_m] = split_dataset(
            manifest, {cfg.split.train_fraction, derive_seed(cfg.seed, "split")});
        SegmentationModel model =
            build_unet(cfg.finder_arch(), derive_seed(cfg.seed, "finder-init"));
        FinderTrainConfig fcfg = cfg.finder;
        fcfg.seed = derive_seed(cfg.seed, "finder-train");
        const TrainingLog log = train_finder(model, load_seg_samples(train_m),
                                             load_seg_samples(eval_m), fcfg, cfg.finder_aug);

        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        require(!ec && fs::is_directory(cfg.out_dir),
                "cannot create output directory " + cfg.out_dir.string());
        save_finder_checkpoint(cfg.out_dir / "finder.ckpt", model);
        write_training_log_csv(log, cfg.out_dir / "finder_training.csv");
        const EpochRecord& best = log.records.at(static_cast<std::size_t>(log.best_epoch) - 1);
        std::printf("trained on %zu images, evaluated on %zu\n", train_m.size(),
                    eval_m.size());
        std::printf("best epoch %d: %s %.4f\n", log.best_epoch, log.metric_name.c_str(),
                    best.eval_metric);
        std::printf("wrote %s\n", (cfg.out_dir / "finder.ckpt").string().c_str());
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

int cmd_eval_finder(const CommonFlags& flags, const std::string& weights) {
    ExperimentConfig cfg;
    try {
        cfg = experiment_from(flags);
        require(!cfg.dataset_root.empty(), "eval-finder requires dataset_root in --config");
        require(!weights.empty(), "eval-finder requires --weights <checkpoint>");
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        SegmentationModel model = load_finder_checkpoint(weights);
        const DatasetManifest manifest = load_manifest(cfg.dataset_root);
        require(manifest.all_have_masks(), "eval-finder needs ground-truth masks");
        const FinderEvalTable table = evaluate_finder(model, load_seg_samples(manifest));
        print_finder_table(table);
        if (!cfg.out_dir.empty()) {
            std::error_code ec;
            fs::create_directories(cfg.out_dir, ec);
            require(!ec && fs::is_directory(cfg.out_dir),
                    "cannot create output directory " + cfg.out_dir.string());
            write_finder_table_csv(table, cfg.out_dir / "finder_table.csv");
            std::printf("wrote %s\n", (cfg.out_dir / "finder_table.csv").string().c_str());
        }
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

int cmd_run(const CommonFlags& flags) {
    ExperimentConfig cfg;
    try {
        cfg = experiment_from(flags);
        cfg.validate();
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        const ExperimentResult result = run_pipeline(cfg);
        print_summary(result);
        if (!result.finder_table.per_source.empty()) print_finder_table(result.finder_table);
        if (!cfg.out_dir.empty()) persist_result(result, cfg.out_dir);
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

int cmd_compare(const CommonFlags& flags, std::vector<std::string> pipelines) {
    std::vector<ExperimentConfig> configs;
    try {
        nlohmann::json j = nlohmann::json::object();
        if (!flags.config.empty()) j = load_config_file(flags.config);
        if (pipelines.empty() && j.contains("pipelines"))
            j.at("pipelines").get_to(pipelines);
        j.erase("pipelines");
        require(pipelines.size() >= 2,
                "compare needs >= 2 pipelines (--pipelines or a 'pipelines' config key)");
        if (!flags.scale.empty()) j["scale"] = flags.scale;
        ExperimentConfig base = j.get<ExperimentConfig>();
        if (flags.seed) base.seed = *flags.seed;
        base.out_dir.clear(); // per-pipeline trees are written below
        for (const std::string& name : pipelines) {
            ExperimentConfig cfg = base;
            cfg.pipeline = pipeline_from_string(name);
            cfg.validate();
            configs.push_back(std::move(cfg));
        }
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        const ComparisonReport report = compare_pipelines(configs);
        std::printf("%-15s %10s %10s %10s %10s %12s\n", "pipeline", "acc", "std", "auc",
                    "std", "auc_delta");
        for (const ComparisonRow& row : report.rows)
            std::printf("%-15s %10.4f %10.4f %10.4f %10.4f %+12.4f\n",
                        pipeline_to_string(row.pipeline), row.mean_accuracy,
                        row.std_accuracy, row.mean_auc, row.std_auc, row.auc_delta);
        if (!flags.out.empty()) {
            write_comparison(report, flags.out);
            std::printf("wrote %s\n", (fs::path(flags.out) / "comparison.csv").string().c_str());
        }
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

int cmd_plot(const CommonFlags& flags, const std::string& result_path) {
    fs::path input, out;
    try {
        require(!result_path.empty(), "plot requires --result <result.json>");
        input = result_path;
        out = flags.out.empty() ? input.parent_path() : fs::path(flags.out);
        require(!out.empty(), "plot: give --out or a result path with a directory");
    } catch (const std::exception& e) {
        return fail_usage(e);
    }
    try {
        const ExperimentResult result = read_result_json(input);
        const std::vector<fs::path> files = emit_plots(result, out);
        for (const fs::path& f : files) std::printf("wrote %s\n", f.string().c_str());
    } catch (const std::exception& e) {
        return fail_runtime(e);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crystallization-drop finder/classifier experiments"};
    app.require_subcommand(1);

    CommonFlags synth_flags;
    int per_class = 50;
    CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    add_common(synth, synth_flags);
    synth->add_option("--per-class", per_class, "images per class and source profile");

    CommonFlags trainf_flags;
    CLI::App* trainf = app.add_subcommand("train-finder", "train the drop segmentation model");
    add_common(trainf, trainf_flags);

    CommonFlags evalf_flags;
    std::string weights;
    CLI::App* evalf =
        app.add_subcommand("eval-finder", "score a trained finder against ground truth");
    add_common(evalf, evalf_flags);
    evalf->add_option("--weights", weights, "finder checkpoint file");

    CommonFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "run one pipeline end to end");
    add_common(run, run_flags);

    CommonFlags compare_flags;
    std::vector<std::string> pipelines;
    CLI::App* compare = app.add_subcommand("compare", "run several pipelines on one dataset");
    add_common(compare, compare_flags);
    compare->add_option("--pipelines", pipelines, "pipelines to compare");

    CommonFlags plot_flags;
    std::string result_path;
    CLI::App* plot = app.add_subcommand("plot", "re-render plots from a stored result");
    add_common(plot, plot_flags);
    plot->add_option("--result", result_path, "result.json produced by 'run'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (synth->parsed()) return cmd_synth(synth_flags, per_class);
    if (trainf->parsed()) return cmd_train_finder(trainf_flags);
    if (evalf->parsed()) return cmd_eval_finder(evalf_flags, weights);
    if (run->parsed()) return cmd_run(run_flags);
    if (compare->parsed()) return cmd_compare(compare_flags, pipelines);
    if (plot->parsed()) return cmd_plot(plot_flags, result_path);
    return kExitUsage;
}
