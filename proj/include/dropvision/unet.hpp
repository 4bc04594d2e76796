#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "dropvision/augment.hpp"
#include "dropvision/checkpoint.hpp"
#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/layers.hpp"
#include "dropvision/metrics.hpp"
#include "dropvision/optim.hpp"
#include "dropvision/rng.hpp"
#include "dropvision/tensor.hpp"
#include "dropvision/training.hpp"

namespace dropvision {

struct UNetConfig {
    int depth = 4;
    int base_channels = 64;
    int input_size = 512;
    int input_channels = 3;
    bool batch_norm = true;

    void validate() const {
        require(depth >= 1, "UNetConfig: depth must be >= 1");
        require(base_channels >= 1, "UNetConfig: base_channels must be >= 1");
        require(input_channels == 1 || input_channels == 3,
                "UNetConfig: input_channels must be 1 or 3");
        const int factor = 1 << depth;
        require(input_size >= factor && input_size % factor == 0,
                "UNetConfig: input_size " + std::to_string(input_size) +
                    " not divisible by 2^depth = " + std::to_string(factor));
    }

    // Reduced architecture for workstation-scale runs.
    static UNetConfig desk() {
        UNetConfig cfg;
        cfg.depth = 3;
        cfg.base_channels = 8;
        cfg.input_size = 128;
        return cfg;
    }
};

inline void to_json(nlohmann::json& j, const UNetConfig& c) {
    j = {{"depth", c.depth},
         {"base_channels", c.base_channels},
         {"input_size", c.input_size},
         {"input_channels", c.input_channels},
         {"batch_norm", c.batch_norm}};
}

inline void from_json(const nlohmann::json& j, UNetConfig& c) {
    c.depth = j.value("depth", c.depth);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.input_size = j.value("input_size", c.input_size);
    c.input_channels = j.value("input_channels", c.input_channels);
    c.batch_norm = j.value("batch_norm", c.batch_norm);
}

struct StageInfo {
    std::string name;
    int channels = 0;
};

// Encoder–decoder segmentation network with skip concatenations. Encoder
// stage k carries base*2^k channels; each decoder stage halves the channel
// count after fusing its skip connection. Emits one logit plane; scores come
// from a sigmoid over it.
class SegmentationModel {
  public:
    explicit SegmentationModel(const UNetConfig& cfg) : cfg_(cfg), final_("final", 1, 1, 1) {
        cfg.validate();
        int in_c = cfg.input_channels;
        for (int k = 0; k < cfg.depth; ++k) {
            const int out_c = cfg.base_channels << k;
            enc_.push_back(make_double_conv("enc" + std::to_string(k), in_c, out_c));
            pools_.emplace_back(2, 2);
            in_c = out_c;
        }
        const int bottleneck_c = cfg.base_channels << cfg.depth;
        bottleneck_ = make_double_conv("bottleneck", in_c, bottleneck_c);
        int cur = bottleneck_c;
        for (int k = 0; k < cfg.depth; ++k) {
            const int half = cur / 2;
            const std::string name = "dec" + std::to_string(k);
            auto up = std::make_unique<nn::Sequential>();
            up->emplace<nn::UpsampleNearest2x>();
            up->emplace<nn::Conv2d>(name + ".up", cur, half, 2, 1, true, true);
            ups_.push_back(std::move(up));
            // Skip from encoder stage depth-1-k doubles the channels back.
            dec_.push_back(make_double_conv(name, half * 2, half));
            cur = half;
        }
        final_ = nn::Conv2d("final", cur, 1, 1, 1, true, true);
        skips_.resize(cfg.depth);
        skip_grads_.resize(cfg.depth);
    }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "unet-init"));
        for (auto& e : enc_) e->init(rng);
        bottleneck_->init(rng);
        for (auto& u : ups_) u->init(rng);
        for (auto& d : dec_) d->init(rng);
        final_.init(rng);
    }

    nn::Tensor forward(const nn::Tensor& x, bool training) {
        require(x.c == cfg_.input_channels, "SegmentationModel: channel mismatch");
        require(x.h == cfg_.input_size && x.w == cfg_.input_size,
                "SegmentationModel: input size mismatch");
        nn::Tensor cur = x;
        for (int k = 0; k < cfg_.depth; ++k) {
            cur = enc_[k]->forward(cur, training);
            skips_[k] = cur;
            cur = pools_[k].forward(cur, training);
        }
        cur = bottleneck_->forward(cur, training);
        for (int k = 0; k < cfg_.depth; ++k) {
            cur = ups_[k]->forward(cur, training);
            cur = nn::concat_channels(cur, skips_[cfg_.depth - 1 - k]);
            cur = dec_[k]->forward(cur, training);
        }
        return final_.forward(cur, training);
    }

    nn::Tensor backward(const nn::Tensor& dlogits) {
        nn::Tensor cur = final_.backward(dlogits);
        for (int k = cfg_.depth - 1; k >= 0; --k) {
            cur = dec_[k]->backward(cur);
            auto [dup, dskip] = nn::split_channels(cur, cur.c / 2);
            skip_grads_[cfg_.depth - 1 - k] = std::move(dskip);
            cur = ups_[k]->backward(dup);
        }
        cur = bottleneck_->backward(cur);
        for (int k = cfg_.depth - 1; k >= 0; --k) {
            cur = pools_[k].backward(cur);
            const nn::Tensor& sg = skip_grads_[k];
            for (std::size_t i = 0; i < cur.numel(); ++i) cur.v[i] += sg.v[i];
            cur = enc_[k]->backward(cur);
        }
        return cur;
    }

    std::vector<nn::Param*> parameters() {
        std::vector<nn::Param*> out;
        for (auto& e : enc_) e->collect_params(out);
        bottleneck_->collect_params(out);
        for (std::size_t k = 0; k < ups_.size(); ++k) {
            ups_[k]->collect_params(out);
            dec_[k]->collect_params(out);
        }
        final_.collect_params(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t total = 0;
        for (const nn::Param* p : parameters()) total += p->numel();
        return total;
    }

    // Channel plan: encoder stages, bottleneck, then decoder stages.
    std::vector<StageInfo> stage_listing() const {
        std::vector<StageInfo> out;
        for (int k = 0; k < cfg_.depth; ++k)
            out.push_back({"enc" + std::to_string(k), cfg_.base_channels << k});
        out.push_back({"bottleneck", cfg_.base_channels << cfg_.depth});
        int cur = cfg_.base_channels << cfg_.depth;
        for (int k = 0; k < cfg_.depth; ++k) {
            cur /= 2;
            out.push_back({"dec" + std::to_string(k), cur});
        }
        return out;
    }

    const UNetConfig& config() const { return cfg_; }

  private:

    std::unique_ptr<nn::Sequential> make_double_conv(const std::string& name, int in_c,
                                                     int out_c) {
        auto seq = std::make_unique<nn::Sequential>();
        for (int i = 0; i < 2; ++i) {
            const std::string cname = name + ".conv" + std::to_string(i);
            seq->emplace<nn::Conv2d>(cname, i == 0 ? in_c : out_c, out_c, 3, 1, true,
                                     !cfg_.batch_norm);
            if (cfg_.batch_norm) seq->emplace<nn::BatchNorm2d>(name + ".bn" + std::to_string(i), out_c);
            seq->emplace<nn::ReLU>();
        }
        return seq;
    }

    UNetConfig cfg_;
    std::vector<std::unique_ptr<nn::Sequential>> enc_;
    std::vector<nn::MaxPool2d> pools_;
    std::unique_ptr<nn::Sequential> bottleneck_;
    std::vector<std::unique_ptr<nn::Sequential>> ups_;
    std::vector<std::unique_ptr<nn::Sequential>> dec_;
    nn::Conv2d final_;
    std::vector<nn::Tensor> skips_, skip_grads_;
};

inline SegmentationModel build_unet(const UNetConfig& cfg, std::uint64_t seed = 0) {
    SegmentationModel model(cfg);
    model.init(seed);
    return model;
}

struct FinderTrainConfig {
    int batch_size = 6;
    int image_size = 512;
    int epochs = 300;
    std::string optimizer = "adam";
    double learning_rate = 1e-5;
    std::string loss = "binary_cross_entropy";
    std::string eval_metric = "mean_iou";
    std::uint64_t seed = 0;

    void validate() const {
        require(batch_size >= 1 && image_size >= 1 && epochs >= 1 && learning_rate > 0.0,
                "FinderTrainConfig: all quantities must be positive");
    }
};

inline void to_json(nlohmann::json& j, const FinderTrainConfig& c) {
    j = {{"batch_size", c.batch_size}, {"image_size", c.image_size},
         {"epochs", c.epochs},         {"optimizer", c.optimizer},
         {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, FinderTrainConfig& c) {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.image_size = j.value("image_size", c.image_size);
    c.epochs = j.value("epochs", c.epochs);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
}

namespace detail {

inline SegSample resize_seg_sample(const SegSample& s, int size, int channels) {
    SegSample out = s;
    RasterImage img = s.image;
    if (channels == 1 && img.channels == 3) img = to_grayscale(img);
    if (channels == 3 && img.channels == 1) img = to_rgb(img);
    out.image = resize_image(img, size, size);
    out.mask = resize_mask(s.mask, size, size);
    return out;
}

inline std::unique_ptr<nn::Optimizer> make_optimizer(const std::string& kind, double lr) {
    if (kind == "adam") return std::make_unique<nn::Adam>(lr);
    if (kind == "rmsprop") return std::make_unique<nn::RMSprop>(lr);
    throw Error("unknown optimizer '" + kind + "' (expected adam or rmsprop)");
}

struct ParamSnapshot {
    std::vector<std::vector<float>> values;

    static ParamSnapshot capture(const std::vector<nn::Param*>& params) {
        ParamSnapshot s;
        for (const nn::Param* p : params) s.values.push_back(p->w);
        return s;
    }
    void restore(const std::vector<nn::Param*>& params) const {
        require(values.size() == params.size(), "ParamSnapshot: parameter count changed");
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->w = values[i];
    }
};

} // namespace detail

// Scores an image with the trained model. The image must already be at the
// model's input size; channel layout is converted as needed.
inline std::pair<BinaryMask, ScoreMap> predict_mask(SegmentationModel& model,
                                                    const RasterImage& image,
                                                    double threshold = 0.5) {
    const UNetConfig& cfg = model.config();
    require(image.height == cfg.input_size && image.width == cfg.input_size,
            "predict_mask: image size mismatch (expected " + std::to_string(cfg.input_size) +
                ", got " + std::to_string(image.height) + "x" + std::to_string(image.width) + ")");
    RasterImage img = image;
    if (cfg.input_channels == 1 && img.channels == 3) img = to_grayscale(img);
    if (cfg.input_channels == 3 && img.channels == 1) img = to_rgb(img);
    nn::Tensor x = nn::image_to_tensor_unit(img);
    nn::Tensor logits = model.forward(x, false);
    ScoreMap scores = ScoreMap::make(logits.h, logits.w);
    for (int y = 0; y < logits.h; ++y)
        for (int xx = 0; xx < logits.w; ++xx)
            scores.at(y, xx, 0) = nn::stable_sigmoid(logits.at(0, 0, y, xx));
    BinaryMask mask = binarize_mask(scores, threshold);
    return {std::move(mask), std::move(scores)};
}

// Trains with BCE on augmented batches and keeps the weights from the epoch
// with the best evaluation mean IoU.
inline TrainingLog train_finder(SegmentationModel& model, const std::vector<SegSample>& train,
                                const std::vector<SegSample>& eval_set,
                                const FinderTrainConfig& cfg, const FinderAugmentSpec& aug) {
    cfg.validate();
    aug.validate();
    require(!train.empty(), "train_finder: empty training set");
    require(!eval_set.empty(), "train_finder: empty evaluation set");
    const UNetConfig& arch = model.config();
    require(cfg.image_size == arch.input_size,
            "train_finder: cfg.image_size must match the model input size");

    std::vector<SegSample> tr, ev;
    tr.reserve(train.size());
    ev.reserve(eval_set.size());
    for (const auto& s : train)
        tr.push_back(detail::resize_seg_sample(s, cfg.image_size, arch.input_channels));
    for (const auto& s : eval_set)
        ev.push_back(detail::resize_seg_sample(s, cfg.image_size, arch.input_channels));

    std::vector<nn::Param*> params = model.parameters();
    auto opt = detail::make_optimizer(cfg.optimizer, cfg.learning_rate);

    TrainingLog log;
    log.metric_name = "eval_mean_iou";
    double best_metric = -1.0;
    detail::ParamSnapshot best;

    std::vector<int> order(tr.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng erng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        erng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bsz =
                std::min<std::size_t>(cfg.batch_size, order.size() - start);
            nn::Tensor x = nn::Tensor::zeros(static_cast<int>(bsz), arch.input_channels,
                                             cfg.image_size, cfg.image_size);
            nn::Tensor t = nn::Tensor::zeros(static_cast<int>(bsz), 1, cfg.image_size,
                                             cfg.image_size);
            for (std::size_t b = 0; b < bsz; ++b) {
                const SegSample& raw = tr[order[start + b]];
                SegSample s = augment_finder_sample(raw, aug, erng);
                nn::copy_image_into_batch(x, static_cast<int>(b),
                                          nn::image_to_tensor_unit(s.image));
                float* tp = t.sample(static_cast<int>(b));
                for (std::size_t i = 0; i < s.mask.values.size(); ++i)
                    tp[i] = static_cast<float>(s.mask.values[i]);
            }
            nn::Tensor logits = model.forward(x, true);
            nn::Tensor dlogits;
            const double loss = nn::bce_with_logits(logits, t, &dlogits);
            require(std::isfinite(loss), "train_finder: non-finite loss at epoch " +
                                             std::to_string(epoch));
            nn::zero_grads(params);
            model.backward(dlogits);
            opt->step(params);
            loss_sum += loss * static_cast<double>(bsz);
            seen += bsz;
        }

        double eval_loss_sum = 0.0;
        std::vector<BinaryMask> preds, truths;
        for (const SegSample& s : ev) {
            nn::Tensor x = nn::image_to_tensor_unit(s.image);
            nn::Tensor logits = model.forward(x, false);
            nn::Tensor t = nn::Tensor::zeros(1, 1, logits.h, logits.w);
            for (std::size_t i = 0; i < s.mask.values.size(); ++i)
                t.v[i] = static_cast<float>(s.mask.values[i]);
            eval_loss_sum += nn::bce_with_logits(logits, t, nullptr);
            ScoreMap scores = ScoreMap::make(logits.h, logits.w);
            for (std::size_t i = 0; i < scores.values.size(); ++i)
                scores.values[i] = nn::stable_sigmoid(logits.v[i]);
            preds.push_back(binarize_mask(scores, 0.5));
            truths.push_back(s.mask);
        }
        const double metric = mean_iou(preds, truths);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.eval_loss = eval_loss_sum / static_cast<double>(ev.size());
        rec.eval_metric = metric;
        log.records.push_back(rec);
        if (metric > best_metric) {
            best_metric = metric;
            best = detail::ParamSnapshot::capture(params);
            log.best_epoch = epoch;
        }
    }
    best.restore(params);
    return log;
}

inline void save_finder_checkpoint(const std::filesystem::path& path, SegmentationModel& model) {
    nlohmann::json cfg = model.config();
    save_checkpoint(path, "unet", cfg, model.parameters());
}

inline SegmentationModel load_finder_checkpoint(const std::filesystem::path& path) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.kind == "unet",
            "load_finder_checkpoint: '" + path.string() + "' holds a '" + ckpt.kind +
                "' model, not a unet");
    UNetConfig cfg = ckpt.config.get<UNetConfig>();
    SegmentationModel model(cfg);
    apply_checkpoint(ckpt, model.parameters());
    return model;
}

} // namespace dropvision
