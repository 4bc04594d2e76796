#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dropvision/augment.hpp"
#include "dropvision/configfile.hpp"
#include "dropvision/crop.hpp"
#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/inception.hpp"
#include "dropvision/metrics.hpp"
#include "dropvision/plot.hpp"
#include "dropvision/training.hpp"
#include "dropvision/unet.hpp"

namespace dropvision {

enum class PipelineKind { FullImage, ManualFinder, UnetFinder };

inline const char* pipeline_to_string(PipelineKind k) {
    switch (k) {
        case PipelineKind::FullImage: return "full_image";
        case PipelineKind::ManualFinder: return "manual_finder";
        case PipelineKind::UnetFinder: return "unet_finder";
    }
    return "?";
}

inline PipelineKind pipeline_from_string(const std::string& s) {
    if (s == "full_image") return PipelineKind::FullImage;
    if (s == "manual_finder") return PipelineKind::ManualFinder;
    if (s == "unet_finder") return PipelineKind::UnetFinder;
    throw Error("unknown pipeline '" + s +
                "' (expected full_image, manual_finder or unet_finder)");
}

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = {{"train_fraction", s.train_fraction}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SplitSpec& s) {
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.seed = j.value("seed", s.seed);
}

struct ExperimentConfig {
    std::filesystem::path dataset_root;
    PipelineKind pipeline = PipelineKind::FullImage;
    std::string scale = "full"; // model/training presets: full (published recipe) | desk
    FinderTrainConfig finder;
    ClassifierTrainConfig classifier;
    FinderAugmentSpec finder_aug;
    ClassifierAugmentSpec classifier_aug;
    SplitSpec split;                    // train/test split of the manifest
    double finder_fraction = 0.5;       // share of the train half held for the finder
    bool share_finder_training = false; // overlap finder and classifier training pools
    int repeats = 5;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir; // empty: nothing persisted

    // Workstation presets; "full" keeps the published training recipe.
    static ExperimentConfig for_scale(const std::string& scale) {
        ExperimentConfig c;
        c.scale = scale;
        if (scale == "desk") {
            c.finder.image_size = UNetConfig::desk().input_size;
            c.finder.epochs = 25;
            c.finder.learning_rate = 1e-3;
            c.classifier.image_size = InceptionConfig::desk().input_size;
            c.classifier.epochs = 30;
            c.classifier.learning_rate = 1e-3;
        }
        return c;
    }

    UNetConfig finder_arch() const {
        UNetConfig arch = scale == "desk" ? UNetConfig::desk() : UNetConfig{};
        arch.input_size = finder.image_size;
        return arch;
    }

    InceptionConfig classifier_arch() const {
        InceptionConfig arch = scale == "desk" ? InceptionConfig::desk() : InceptionConfig{};
        arch.input_size = classifier.image_size;
        return arch;
    }

    void validate() const {
        require(scale == "desk" || scale == "full",
                "ExperimentConfig: scale must be 'desk' or 'full'");
        require(repeats >= 1, "ExperimentConfig: repeats must be >= 1");
        require(finder_fraction > 0.0 && finder_fraction < 1.0,
                "ExperimentConfig: finder_fraction must be in (0,1)");
        require(!dataset_root.empty(), "ExperimentConfig: dataset_root is required");
        finder.validate();
        classifier.validate();
        finder_aug.validate();
        classifier_aug.validate();
        finder_arch().validate();
        classifier_arch().validate();
    }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"dataset_root", c.dataset_root.string()},
         {"pipeline", pipeline_to_string(c.pipeline)},
         {"scale", c.scale},
         {"finder", c.finder},
         {"classifier", c.classifier},
         {"finder_aug", c.finder_aug},
         {"classifier_aug", c.classifier_aug},
         {"split", c.split},
         {"finder_fraction", c.finder_fraction},
         {"share_finder_training", c.share_finder_training},
         {"repeats", c.repeats},
         {"seed", c.seed},
         {"out_dir", c.out_dir.string()}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig::for_scale(j.value("scale", c.scale));
    c.dataset_root = j.value("dataset_root", c.dataset_root.string());
    if (j.contains("pipeline")) c.pipeline = pipeline_from_string(j.at("pipeline"));
    if (j.contains("finder")) j.at("finder").get_to(c.finder);
    if (j.contains("classifier")) j.at("classifier").get_to(c.classifier);
    if (j.contains("finder_aug")) j.at("finder_aug").get_to(c.finder_aug);
    if (j.contains("classifier_aug")) j.at("classifier_aug").get_to(c.classifier_aug);
    if (j.contains("split")) j.at("split").get_to(c.split);
    c.finder_fraction = j.value("finder_fraction", c.finder_fraction);
    c.share_finder_training = j.value("share_finder_training", c.share_finder_training);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir.string());
}

struct FinderSampleEval {
    std::string id, source;
    double dice = 0.0, iou = 0.0;
};

struct SourceStats {
    std::string source;
    std::size_t count = 0;
    double mean_dice = 0.0, std_dice = 0.0, mean_iou = 0.0, std_iou = 0.0;
};

struct FinderEvalTable {
    std::vector<SourceStats> per_source; // sorted by source name
    SourceStats overall;                 // source = "all"
};

struct RepeatResult {
    int repeat = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double auc_crystals = 0.0;
    std::array<double, 3> one_vs_rest_auc{};
    RocCurve roc;
    // Raw per-test-image outputs; every table number is recomputable from these.
    std::vector<std::string> test_ids;
    std::vector<int> true_labels;
    std::vector<std::array<double, 3>> scores;
    TrainingLog classifier_log;
    TrainingLog finder_log;                    // populated for unet_finder only
    std::vector<FinderSampleEval> finder_eval; // idem, over the repeat's test set
};

struct ExperimentResult {
    PipelineKind pipeline = PipelineKind::FullImage;
    std::string dataset_root;
    std::uint64_t base_seed = 0;
    std::vector<RepeatResult> runs;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_auc = 0.0, std_auc = 0.0;
    FinderEvalTable finder_table; // pooled across repeats; empty for non-finder runs
};

namespace detail {

inline SourceStats stats_for(const std::string& source, const std::vector<double>& dices,
                             const std::vector<double>& ious) {
    SourceStats s;
    s.source = source;
    s.count = dices.size();
    s.mean_dice = mean_of(dices);
    s.std_dice = std_of(dices);
    s.mean_iou = mean_of(ious);
    s.std_iou = std_of(ious);
    return s;
}

inline FinderEvalTable tabulate_finder_evals(const std::vector<FinderSampleEval>& rows) {
    require(!rows.empty(), "evaluate_finder: no evaluation samples");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::vector<double> all_dice, all_iou;
    for (const auto& r : rows) {
        groups[r.source].first.push_back(r.dice);
        groups[r.source].second.push_back(r.iou);
        all_dice.push_back(r.dice);
        all_iou.push_back(r.iou);
    }
    FinderEvalTable table;
    for (const auto& [source, dv] : groups)
        table.per_source.push_back(stats_for(source, dv.first, dv.second));
    table.overall = stats_for("all", all_dice, all_iou);
    return table;
}

template <typename MaskFn>
inline std::vector<FinderSampleEval> finder_sample_evals(MaskFn&& mask_for,
                                                         const std::vector<SegSample>& eval) {
    std::vector<FinderSampleEval> rows;
    rows.reserve(eval.size());
    for (const SegSample& s : eval) {
        const BinaryMask predicted = mask_for(s);
        FinderSampleEval row;
        row.id = s.id;
        row.source = s.source_tag;
        row.dice = dice(predicted, s.mask);
        row.iou = iou(predicted, s.mask);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<FinderSampleEval> finder_sample_evals(SegmentationModel& model,
                                                         const std::vector<SegSample>& eval) {
    const UNetConfig& arch = model.config();
    return finder_sample_evals(
        [&](const SegSample& s) {
            const SegSample sized = resize_seg_sample(s, arch.input_size, arch.input_channels);
            auto [mask, scores] = predict_mask(model, sized.image);
            return resize_mask(mask, s.mask.height, s.mask.width);
        },
        eval);
}

} // namespace detail

// Per-source and overall dice/IoU of predicted masks against ground truth.
inline FinderEvalTable evaluate_finder(SegmentationModel& model,
                                       const std::vector<SegSample>& eval) {
    require(!eval.empty(), "evaluate_finder: empty evaluation set");
    return detail::tabulate_finder_evals(detail::finder_sample_evals(model, eval));
}

// Same table for any mask source, e.g. a fixed baseline.
template <typename MaskFn>
    requires std::is_invocable_r_v<BinaryMask, MaskFn, const SegSample&>
inline FinderEvalTable evaluate_finder(MaskFn&& mask_for, const std::vector<SegSample>& eval) {
    require(!eval.empty(), "evaluate_finder: empty evaluation set");
    return detail::tabulate_finder_evals(
        detail::finder_sample_evals(std::forward<MaskFn>(mask_for), eval));
}

namespace detail {

struct PreparedSplit {
    std::vector<LabeledSample> cls_train, cls_test;
    std::vector<SegSample> seg_test; // with masks, for finder scoring
    TrainingLog finder_log;
    std::vector<FinderSampleEval> finder_eval;
};

// Splits one repeat's data, optionally trains the finder, and produces the
// classifier's training/test views (whole images or crops).
inline PreparedSplit prepare_repeat(const ExperimentConfig& cfg,
                                    const DatasetManifest& manifest, std::uint64_t rseed) {
    PreparedSplit out;
    auto [train_manifest, test_manifest] =
        split_dataset(manifest, {cfg.split.train_fraction, derive_seed(rseed, "split")});

    if (cfg.pipeline == PipelineKind::FullImage) {
        out.cls_train = load_labeled_samples(train_manifest);
        out.cls_test = load_labeled_samples(test_manifest);
        return out;
    }

    const int crop_size = cfg.classifier.image_size;
    auto crop_with_truth = [&](const DatasetManifest& m) {
        std::vector<LabeledSample> result;
        result.reserve(m.size());
        for (const auto& e : m.entries) {
            SegSample seg = load_seg_sample(m, e);
            require(e.label.has_value(), "run_pipeline: entry '" + e.id + "' has no label");
            LabeledSample s;
            s.image = extract_drop(seg.image, seg.mask, crop_size);
            s.label = *e.label;
            s.source_tag = e.source_tag;
            s.id = e.id;
            result.push_back(std::move(s));
        }
        return result;
    };

    if (cfg.pipeline == PipelineKind::ManualFinder) {
        out.cls_train = crop_with_truth(train_manifest);
        out.cls_test = crop_with_truth(test_manifest);
        return out;
    }

    // unet_finder: the finder trains on a slice of the train half only, so
    // classification test images stay unseen by it.
    DatasetManifest finder_manifest = train_manifest;
    DatasetManifest cls_manifest = train_manifest;
    if (!cfg.share_finder_training) {
        auto [finder_half, cls_half] = split_dataset(
            train_manifest, {cfg.finder_fraction, derive_seed(rseed, "finder-split")});
        finder_manifest = std::move(finder_half);
        cls_manifest = std::move(cls_half);
    }

    const UNetConfig arch = cfg.finder_arch();
    SegmentationModel finder = build_unet(arch, derive_seed(rseed, "finder-init"));
    FinderTrainConfig fcfg = cfg.finder;
    fcfg.seed = derive_seed(rseed, "finder-train");
    const std::vector<SegSample> seg_train = load_seg_samples(finder_manifest);
    const std::vector<SegSample> seg_eval = load_seg_samples(cls_manifest);
    out.finder_log = train_finder(finder, seg_train, seg_eval, fcfg, cfg.finder_aug);

    out.seg_test = load_seg_samples(test_manifest);
    out.finder_eval = finder_sample_evals(finder, out.seg_test);

    auto crop_with_prediction = [&](const DatasetManifest& m) {
        std::vector<LabeledSample> result;
        result.reserve(m.size());
        for (const auto& e : m.entries) {
            require(e.label.has_value(), "run_pipeline: entry '" + e.id + "' has no label");
            const RasterImage image = read_png(m.root / e.image_path);
            RasterImage sized = image;
            if (arch.input_channels == 1 && sized.channels == 3) sized = to_grayscale(sized);
            if (arch.input_channels == 3 && sized.channels == 1) sized = to_rgb(sized);
            sized = resize_image(sized, arch.input_size, arch.input_size);
            auto [mask, scores] = predict_mask(finder, sized);
            const BinaryMask native = resize_mask(mask, image.height, image.width);
            LabeledSample s;
            s.image = extract_drop(image, native, crop_size);
            s.label = *e.label;
            s.source_tag = e.source_tag;
            s.id = e.id;
            result.push_back(std::move(s));
        }
        return result;
    };
    out.cls_train = crop_with_prediction(cls_manifest);
    out.cls_test = crop_with_prediction(test_manifest);
    return out;
}

} // namespace detail

// Runs one pipeline end to end: repeats independent train/evaluate rounds
// with seeds base_seed + k and aggregates accuracy and ROC statistics.
inline ExperimentResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    DatasetManifest manifest = load_manifest(cfg.dataset_root);
    require(manifest.all_have_labels(), "run_pipeline: every entry needs a class label");
    if (cfg.pipeline != PipelineKind::FullImage)
        require(manifest.all_have_masks(), "run_pipeline: pipeline '" +
                                               std::string(pipeline_to_string(cfg.pipeline)) +
                                               "' requires ground-truth masks");

    ExperimentResult result;
    result.pipeline = cfg.pipeline;
    result.dataset_root = cfg.dataset_root.string();
    result.base_seed = cfg.seed;

    std::vector<double> accuracies, aucs;
    std::vector<FinderSampleEval> pooled_finder;
    for (int k = 0; k < cfg.repeats; ++k) {
        const std::uint64_t rseed = cfg.seed + static_cast<std::uint64_t>(k);
        detail::PreparedSplit split = detail::prepare_repeat(cfg, manifest, rseed);

        ClassifierModel model =
            build_classifier(cfg.classifier_arch(), derive_seed(rseed, "classifier-init"));
        ClassifierTrainConfig ccfg = cfg.classifier;
        ccfg.seed = derive_seed(rseed, "classifier-train");
        TrainingLog cls_log = train_classifier(model, split.cls_train, split.cls_test, ccfg,
                                               cfg.classifier_aug);

        RepeatResult rr;
        rr.repeat = k;
        rr.seed = rseed;
        rr.classifier_log = std::move(cls_log);
        rr.finder_log = std::move(split.finder_log);
        rr.finder_eval = std::move(split.finder_eval);

        std::vector<ClassLabel> pred, truth;
        for (const LabeledSample& s : split.cls_test) {
            const RasterImage sized =
                detail::resize_cls_sample(s, cfg.classifier.image_size, 3).image;
            const ClassScores scores = predict_scores(model, sized);
            rr.test_ids.push_back(s.id);
            rr.true_labels.push_back(static_cast<int>(s.label));
            rr.scores.push_back(scores.values);
            pred.push_back(scores.argmax());
            truth.push_back(s.label);
        }
        rr.accuracy = accuracy(pred, truth);
        for (int c = 0; c < 3; ++c) {
            std::vector<double> class_scores;
            std::vector<bool> positives;
            for (std::size_t i = 0; i < rr.scores.size(); ++i) {
                class_scores.push_back(rr.scores[i][c]);
                positives.push_back(rr.true_labels[i] == c);
            }
            const auto n_pos = std::count(positives.begin(), positives.end(), true);
            require(n_pos > 0 && static_cast<std::size_t>(n_pos) < positives.size(),
                    "run_pipeline: repeat " + std::to_string(k) + ": test split lacks '" +
                        label_to_string(static_cast<ClassLabel>(c)) +
                        "' or contains nothing else; enlarge the dataset or adjust the split");
            rr.one_vs_rest_auc[c] = auc(class_scores, positives);
            if (c == static_cast<int>(ClassLabel::Crystals))
                rr.roc = roc_curve(class_scores, positives);
        }
        rr.auc_crystals = rr.one_vs_rest_auc[static_cast<int>(ClassLabel::Crystals)];

        accuracies.push_back(rr.accuracy);
        aucs.push_back(rr.auc_crystals);
        pooled_finder.insert(pooled_finder.end(), rr.finder_eval.begin(),
                             rr.finder_eval.end());
        result.runs.push_back(std::move(rr));
    }

    result.mean_accuracy = mean_of(accuracies);
    result.std_accuracy = std_of(accuracies);
    result.mean_auc = mean_of(aucs);
    result.std_auc = std_of(aucs);
    if (!pooled_finder.empty())
        result.finder_table = detail::tabulate_finder_evals(pooled_finder);
    return result;
}

inline void to_json(nlohmann::json& j, const FinderSampleEval& r) {
    j = {{"id", r.id}, {"source", r.source}, {"dice", r.dice}, {"iou", r.iou}};
}

inline void from_json(const nlohmann::json& j, FinderSampleEval& r) {
    r.id = j.value("id", r.id);
    r.source = j.value("source", r.source);
    r.dice = j.value("dice", r.dice);
    r.iou = j.value("iou", r.iou);
}

inline void to_json(nlohmann::json& j, const SourceStats& s) {
    j = {{"source", s.source},       {"count", s.count},
         {"mean_dice", s.mean_dice}, {"std_dice", s.std_dice},
         {"mean_iou", s.mean_iou},   {"std_iou", s.std_iou}};
}

inline void from_json(const nlohmann::json& j, SourceStats& s) {
    s.source = j.value("source", s.source);
    s.count = j.value("count", s.count);
    s.mean_dice = j.value("mean_dice", s.mean_dice);
    s.std_dice = j.value("std_dice", s.std_dice);
    s.mean_iou = j.value("mean_iou", s.mean_iou);
    s.std_iou = j.value("std_iou", s.std_iou);
}

inline void to_json(nlohmann::json& j, const EpochRecord& r) {
    j = {{"epoch", r.epoch},
         {"train_loss", r.train_loss},
         {"eval_loss", r.eval_loss},
         {"eval_metric", r.eval_metric}};
}

inline void from_json(const nlohmann::json& j, EpochRecord& r) {
    r.epoch = j.value("epoch", r.epoch);
    r.train_loss = j.value("train_loss", r.train_loss);
    r.eval_loss = j.value("eval_loss", r.eval_loss);
    r.eval_metric = j.value("eval_metric", r.eval_metric);
}

inline void to_json(nlohmann::json& j, const TrainingLog& log) {
    j = {{"metric_name", log.metric_name},
         {"best_epoch", log.best_epoch},
         {"records", log.records}};
}

inline void from_json(const nlohmann::json& j, TrainingLog& log) {
    log.metric_name = j.value("metric_name", log.metric_name);
    log.best_epoch = j.value("best_epoch", log.best_epoch);
    if (j.contains("records")) j.at("records").get_to(log.records);
}

// The ROC curve is not persisted: it is recomputed from the raw scores so
// stored aggregates always have their inputs next to them.
inline void to_json(nlohmann::json& j, const RepeatResult& r) {
    j = {{"repeat", r.repeat},
         {"seed", r.seed},
         {"accuracy", r.accuracy},
         {"auc_crystals", r.auc_crystals},
         {"one_vs_rest_auc", r.one_vs_rest_auc},
         {"test_ids", r.test_ids},
         {"true_labels", r.true_labels},
         {"scores", r.scores},
         {"classifier_log", r.classifier_log},
         {"finder_log", r.finder_log},
         {"finder_eval", r.finder_eval}};
}

inline void from_json(const nlohmann::json& j, RepeatResult& r) {
    r.repeat = j.value("repeat", r.repeat);
    r.seed = j.value("seed", r.seed);
    r.accuracy = j.value("accuracy", r.accuracy);
    r.auc_crystals = j.value("auc_crystals", r.auc_crystals);
    if (j.contains("one_vs_rest_auc")) j.at("one_vs_rest_auc").get_to(r.one_vs_rest_auc);
    if (j.contains("test_ids")) j.at("test_ids").get_to(r.test_ids);
    if (j.contains("true_labels")) j.at("true_labels").get_to(r.true_labels);
    if (j.contains("scores")) j.at("scores").get_to(r.scores);
    if (j.contains("classifier_log")) j.at("classifier_log").get_to(r.classifier_log);
    if (j.contains("finder_log")) j.at("finder_log").get_to(r.finder_log);
    if (j.contains("finder_eval")) j.at("finder_eval").get_to(r.finder_eval);
    if (!r.scores.empty()) {
        std::vector<double> class_scores;
        std::vector<bool> positives;
        for (std::size_t i = 0; i < r.scores.size(); ++i) {
            class_scores.push_back(r.scores[i][static_cast<int>(ClassLabel::Crystals)]);
            positives.push_back(r.true_labels[i] == static_cast<int>(ClassLabel::Crystals));
        }
        r.roc = roc_curve(class_scores, positives);
    }
}

inline void to_json(nlohmann::json& j, const FinderEvalTable& t) {
    j = {{"per_source", t.per_source}, {"overall", t.overall}};
}

inline void from_json(const nlohmann::json& j, FinderEvalTable& t) {
    if (j.contains("per_source")) j.at("per_source").get_to(t.per_source);
    if (j.contains("overall")) j.at("overall").get_to(t.overall);
}

inline void to_json(nlohmann::json& j, const ExperimentResult& r) {
    j = {{"pipeline", pipeline_to_string(r.pipeline)},
         {"dataset_root", r.dataset_root},
         {"base_seed", r.base_seed},
         {"runs", r.runs},
         {"mean_accuracy", r.mean_accuracy},
         {"std_accuracy", r.std_accuracy},
         {"mean_auc", r.mean_auc},
         {"std_auc", r.std_auc},
         {"finder_table", r.finder_table}};
}

inline void from_json(const nlohmann::json& j, ExperimentResult& r) {
    if (j.contains("pipeline")) r.pipeline = pipeline_from_string(j.at("pipeline"));
    r.dataset_root = j.value("dataset_root", r.dataset_root);
    r.base_seed = j.value("base_seed", r.base_seed);
    if (j.contains("runs")) j.at("runs").get_to(r.runs);
    r.mean_accuracy = j.value("mean_accuracy", r.mean_accuracy);
    r.std_accuracy = j.value("std_accuracy", r.std_accuracy);
    r.mean_auc = j.value("mean_auc", r.mean_auc);
    r.std_auc = j.value("std_auc", r.std_auc);
    if (j.contains("finder_table")) j.at("finder_table").get_to(r.finder_table);
}

inline void write_result_json(const std::filesystem::path& path, const ExperimentResult& r) {
    std::ofstream out(path);
    require(out.good(), "write_result_json: cannot write " + path.string());
    nlohmann::json j = r;
    out << j.dump(2) << "\n";
    require(out.good(), "write_result_json: write failed for " + path.string());
}

inline ExperimentResult read_result_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "read_result_json: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("read_result_json: " + path.string() + ": " + e.what());
    }
    return j.get<ExperimentResult>();
}

inline void write_finder_table_csv(const FinderEvalTable& table,
                                   const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "write_finder_table_csv: cannot write " + path.string());
    out << "source,count,mean_dice,std_dice,mean_iou,std_iou\n";
    out.precision(17);
    auto row = [&](const SourceStats& s) {
        out << s.source << ',' << s.count << ',' << s.mean_dice << ',' << s.std_dice << ','
            << s.mean_iou << ',' << s.std_iou << "\n";
    };
    for (const SourceStats& s : table.per_source) row(s);
    row(table.overall);
    require(out.good(), "write_finder_table_csv: write failed for " + path.string());
}

namespace detail {

inline void append_table_text(std::string& text, const ExperimentResult& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "pipeline: %s\n", pipeline_to_string(r.pipeline));
    text += buf;
    text += "repeat  accuracy      auc_crystals\n";
    for (const RepeatResult& rr : r.runs) {
        std::snprintf(buf, sizeof buf, "%-7d %-13.6f %-13.6f\n", rr.repeat, rr.accuracy,
                      rr.auc_crystals);
        text += buf;
    }
    std::snprintf(buf, sizeof buf, "mean    %-13.6f %-13.6f\nstd     %-13.6f %-13.6f\n",
                  r.mean_accuracy, r.mean_auc, r.std_accuracy, r.std_auc);
    text += buf;
}

} // namespace detail

// Writes plots and tables for one experiment: overlaid per-repeat ROC curves,
// accuracy-per-epoch curves, a repeat table with mean/std footer, raw score
// dumps, and (for finder runs) the per-source dice/IoU table.
inline std::vector<std::filesystem::path> emit_plots(const ExperimentResult& result,
                                                     const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec && fs::is_directory(out), "emit_plots: cannot create directory " + out.string());
    std::vector<fs::path> files;

    // ROC: one CSV per repeat plus a combined plot.
    std::vector<PlotSeries> roc_series;
    for (const RepeatResult& rr : result.runs) {
        const fs::path csv = out / ("roc_repeat" + std::to_string(rr.repeat) + ".csv");
        write_roc_csv(csv, rr.roc);
        files.push_back(csv);
        PlotSeries s;
        s.label = "REPEAT " + std::to_string(rr.repeat);
        s.color = plot_color(static_cast<std::size_t>(rr.repeat));
        for (const RocPoint& p : rr.roc.points) {
            s.x.push_back(p.fpr);
            s.y.push_back(p.tpr);
        }
        roc_series.push_back(std::move(s));
    }
    PlotSeries diagonal;
    diagonal.label = "";
    diagonal.color = {150, 150, 150};
    diagonal.x = {0.0, 1.0};
    diagonal.y = {0.0, 1.0};
    roc_series.push_back(std::move(diagonal));
    PlotSpec roc_spec;
    roc_spec.title = std::string("ROC ") + pipeline_to_string(result.pipeline);
    roc_spec.x_label = "false positive rate";
    roc_spec.y_label = "tpr";
    roc_spec.x_lo = 0.0;
    roc_spec.x_hi = 1.0;
    roc_spec.y_lo = 0.0;
    roc_spec.y_hi = 1.0;
    const fs::path roc_png = out / "roc.png";
    write_plot_png(roc_png, roc_spec, roc_series);
    files.push_back(roc_png);

    // Evaluation-metric-per-epoch curves and logs.
    std::vector<PlotSeries> acc_series;
    for (const RepeatResult& rr : result.runs) {
        const fs::path csv = out / ("training_repeat" + std::to_string(rr.repeat) + ".csv");
        write_training_log_csv(rr.classifier_log, csv);
        files.push_back(csv);
        PlotSeries s;
        s.label = "REPEAT " + std::to_string(rr.repeat);
        s.color = plot_color(static_cast<std::size_t>(rr.repeat));
        for (const EpochRecord& rec : rr.classifier_log.records) {
            s.x.push_back(rec.epoch);
            s.y.push_back(rec.eval_metric);
        }
        acc_series.push_back(std::move(s));
        if (!rr.finder_log.records.empty()) {
            const fs::path fcsv = out / ("finder_repeat" + std::to_string(rr.repeat) + ".csv");
            write_training_log_csv(rr.finder_log, fcsv);
            files.push_back(fcsv);
        }
    }
    PlotSpec acc_spec;
    acc_spec.title = std::string("EVAL ACCURACY ") + pipeline_to_string(result.pipeline);
    acc_spec.x_label = "epoch";
    acc_spec.y_label = "acc";
    acc_spec.y_lo = 0.0;
    acc_spec.y_hi = 1.0;
    const fs::path acc_png = out / "accuracy.png";
    write_plot_png(acc_png, acc_spec, acc_series);
    files.push_back(acc_png);

    // Raw per-image scores, one CSV per repeat.
    for (const RepeatResult& rr : result.runs) {
        const fs::path csv = out / ("scores_repeat" + std::to_string(rr.repeat) + ".csv");
        std::ofstream sf(csv);
        require(sf.good(), "emit_plots: cannot write " + csv.string());
        sf << "id,true_label,p_clear,p_crystals,p_precipitate\n";
        sf.precision(17);
        for (std::size_t i = 0; i < rr.scores.size(); ++i)
            sf << rr.test_ids[i] << ','
               << label_to_string(static_cast<ClassLabel>(rr.true_labels[i])) << ','
               << rr.scores[i][0] << ',' << rr.scores[i][1] << ',' << rr.scores[i][2] << "\n";
        require(sf.good(), "emit_plots: write failed for " + csv.string());
        files.push_back(csv);
    }

    // Repeat table with mean/std footer.
    {
        const fs::path csv = out / "results.csv";
        std::ofstream rf(csv);
        require(rf.good(), "emit_plots: cannot write " + csv.string());
        rf << "repeat,seed,accuracy,auc_crystals\n";
        rf.precision(17);
        for (const RepeatResult& rr : result.runs)
            rf << rr.repeat << ',' << rr.seed << ',' << rr.accuracy << ','
               << rr.auc_crystals << "\n";
        rf << "mean,," << result.mean_accuracy << ',' << result.mean_auc << "\n";
        rf << "std,," << result.std_accuracy << ',' << result.std_auc << "\n";
        require(rf.good(), "emit_plots: write failed for " + csv.string());
        files.push_back(csv);

        std::string text;
        detail::append_table_text(text, result);
        const fs::path txt = out / "results.txt";
        std::ofstream tf(txt);
        require(tf.good(), "emit_plots: cannot write " + txt.string());
        tf << text;
        files.push_back(txt);
    }

    if (!result.finder_table.per_source.empty()) {
        const fs::path csv = out / "finder_table.csv";
        write_finder_table_csv(result.finder_table, csv);
        files.push_back(csv);
    }
    return files;
}

struct ComparisonRow {
    PipelineKind pipeline = PipelineKind::FullImage;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_auc = 0.0, std_auc = 0.0;
    double auc_delta = 0.0; // vs the full_image baseline
};

struct ComparisonReport {
    std::vector<ExperimentResult> results;
    std::vector<ComparisonRow> rows;
    RasterImage roc_overlay; // first-repeat ROC of each pipeline
};

// Runs several configurations over one dataset and aligns their statistics.
inline ComparisonReport compare_pipelines(const std::vector<ExperimentConfig>& configs) {
    require(configs.size() >= 2, "compare_pipelines: need at least two configurations");
    for (const ExperimentConfig& c : configs)
        require(c.dataset_root == configs.front().dataset_root,
                "compare_pipelines: configurations use different datasets");

    ComparisonReport report;
    for (const ExperimentConfig& c : configs) report.results.push_back(run_pipeline(c));

    std::size_t baseline = 0;
    for (std::size_t i = 0; i < report.results.size(); ++i)
        if (report.results[i].pipeline == PipelineKind::FullImage) {
            baseline = i;
            break;
        }
    const double base_auc = report.results[baseline].mean_auc;

    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < report.results.size(); ++i) {
        const ExperimentResult& r = report.results[i];
        ComparisonRow row;
        row.pipeline = r.pipeline;
        row.mean_accuracy = r.mean_accuracy;
        row.std_accuracy = r.std_accuracy;
        row.mean_auc = r.mean_auc;
        row.std_auc = r.std_auc;
        row.auc_delta = r.mean_auc - base_auc;
        report.rows.push_back(row);

        PlotSeries s;
        s.label = pipeline_to_string(r.pipeline);
        s.color = plot_color(i);
        if (!r.runs.empty())
            for (const RocPoint& p : r.runs.front().roc.points) {
                s.x.push_back(p.fpr);
                s.y.push_back(p.tpr);
            }
        series.push_back(std::move(s));
    }
    PlotSpec spec;
    spec.title = "ROC COMPARISON";
    spec.x_label = "false positive rate";
    spec.y_label = "tpr";
    spec.x_lo = 0.0;
    spec.x_hi = 1.0;
    spec.y_lo = 0.0;
    spec.y_hi = 1.0;
    report.roc_overlay = render_line_plot(spec, series);
    return report;
}

// Persists a comparison: per-pipeline result trees plus the aligned table.
inline std::vector<std::filesystem::path> write_comparison(const ComparisonReport& report,
                                                           const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec && fs::is_directory(out),
            "write_comparison: cannot create directory " + out.string());
    std::vector<fs::path> files;

    for (const ExperimentResult& r : report.results) {
        const fs::path dir = out / pipeline_to_string(r.pipeline);
        fs::create_directories(dir, ec);
        require(!ec, "write_comparison: cannot create directory " + dir.string());
        write_result_json(dir / "result.json", r);
        files.push_back(dir / "result.json");
        const auto emitted = emit_plots(r, dir);
        files.insert(files.end(), emitted.begin(), emitted.end());
    }

    const fs::path csv = out / "comparison.csv";
    std::ofstream cf(csv);
    require(cf.good(), "write_comparison: cannot write " + csv.string());
    cf << "pipeline,mean_accuracy,std_accuracy,mean_auc,std_auc,auc_delta_vs_full_image\n";
    cf.precision(17);
    for (const ComparisonRow& row : report.rows)
        cf << pipeline_to_string(row.pipeline) << ',' << row.mean_accuracy << ','
           << row.std_accuracy << ',' << row.mean_auc << ',' << row.std_auc << ','
           << row.auc_delta << "\n";
    require(cf.good(), "write_comparison: write failed for " + csv.string());
    files.push_back(csv);

    const fs::path png = out / "roc_comparison.png";
    write_png(png, report.roc_overlay);
    files.push_back(png);
    return files;
}

} // namespace dropvision
