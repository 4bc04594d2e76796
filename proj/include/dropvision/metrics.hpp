#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"

namespace dropvision {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn_ = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn_ + tn; }
};

inline ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& truth) {
    require(pred.same_shape(truth), "confusion_counts: mask dimensions differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool t = truth.values[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn_;
        else
            ++c.tn;
    }
    return c;
}

// TP / (TP + FP + FN). Both masks empty counts as perfect agreement.
inline double iou(const ConfusionCounts& c) {
    const std::size_t denom = c.tp + c.fp + c.fn_;
    if (denom == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double iou(const BinaryMask& pred, const BinaryMask& truth) {
    return iou(confusion_counts(pred, truth));
}

// 2|X ∩ Y| / (|X| + |Y|). Both sets empty counts as 1.
inline double dice(const BinaryMask& pred, const BinaryMask& truth) {
    const ConfusionCounts c = confusion_counts(pred, truth);
    const std::size_t denom = 2 * c.tp + c.fp + c.fn_;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

// Per sample: average of the foreground IoU and the background IoU (the two
// segmentation classes), then averaged across samples. Set
// include_background = false to average the foreground class only.
inline double mean_iou(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& truths,
                       bool include_background = true) {
    require(!preds.empty(), "mean_iou: empty mask list");
    require(preds.size() == truths.size(), "mean_iou: list lengths differ");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const ConfusionCounts c = confusion_counts(preds[i], truths[i]);
        const double fg = iou(c);
        if (include_background) {
            // complementing both masks swaps tp <-> tn
            const ConfusionCounts bg{c.tn, c.fn_, c.fp, c.tp};
            total += 0.5 * (fg + iou(bg));
        } else {
            total += fg;
        }
    }
    return total / static_cast<double>(preds.size());
}

inline double accuracy(const std::vector<ClassLabel>& pred_labels,
                       const std::vector<ClassLabel>& true_labels) {
    require(!pred_labels.empty(), "accuracy: empty label list");
    require(pred_labels.size() == true_labels.size(), "accuracy: list lengths differ");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred_labels.size(); ++i)
        if (pred_labels[i] == true_labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred_labels.size());
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    std::vector<double> thresholds; // matching cutoff per point
};

// Threshold sweep over the distinct score values from high to low; a sample
// is predicted positive when score >= threshold. The curve is anchored at
// (0,0) and (1,1) with +/- infinity sentinels.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positives) {
    require(scores.size() == positives.size(), "roc_curve: list lengths differ");
    require(!scores.empty(), "roc_curve: empty input");
    const std::size_t n_pos = static_cast<std::size_t>(
        std::count(positives.begin(), positives.end(), true));
    const std::size_t n_neg = scores.size() - n_pos;
    require(n_pos > 0 && n_neg > 0, "roc_curve: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocCurve curve;
    const double inf = std::numeric_limits<double>::infinity();
    curve.points.push_back({0.0, 0.0});
    curve.thresholds.push_back(inf);

    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        // consume every sample tied at this score
        while (i < order.size() && scores[order[i]] == threshold) {
            if (positives[order[i]])
                ++tp;
            else
                ++fp;
            ++i;
        }
        const RocPoint pt{static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)};
        const RocPoint& last = curve.points.back();
        if (pt.fpr != last.fpr || pt.tpr != last.tpr) {
            curve.points.push_back(pt);
            curve.thresholds.push_back(threshold);
        }
    }
    if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) {
        curve.points.push_back({1.0, 1.0});
        curve.thresholds.push_back(-inf);
    }
    return curve;
}

// Trapezoidal area under the curve.
inline double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return std::clamp(area, 0.0, 1.0);
}

inline double auc(const std::vector<double>& scores, const std::vector<bool>& positives) {
    return auc(roc_curve(scores, positives));
}

inline void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
    std::ofstream out(path);
    require(out.good(), "write_roc_csv: cannot write " + path.string());
    out << "threshold,fpr,tpr\n";
    out.precision(17);
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const double t = curve.thresholds[i];
        if (std::isinf(t))
            out << (t > 0 ? "inf" : "-inf");
        else
            out << t;
        out << ',' << curve.points[i].fpr << ',' << curve.points[i].tpr << "\n";
    }
    require(out.good(), "write_roc_csv: write failed for " + path.string());
}

inline RocCurve read_roc_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "read_roc_csv: cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "read_roc_csv: empty file");
    RocCurve curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_row(line);
        require(fields.size() == 3, "read_roc_csv: malformed row '" + line + "'");
        double t;
        if (fields[0] == "inf")
            t = std::numeric_limits<double>::infinity();
        else if (fields[0] == "-inf")
            t = -std::numeric_limits<double>::infinity();
        else
            t = std::stod(fields[0]);
        curve.thresholds.push_back(t);
        curve.points.push_back({std::stod(fields[1]), std::stod(fields[2])});
    }
    return curve;
}

inline double mean_of(const std::vector<double>& v) {
    require(!v.empty(), "mean_of: empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
inline double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (const double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace dropvision
