#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dropvision/augment.hpp"
#include "dropvision/checkpoint.hpp"
#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/layers.hpp"
#include "dropvision/optim.hpp"
#include "dropvision/rng.hpp"
#include "dropvision/tensor.hpp"
#include "dropvision/training.hpp"
#include "dropvision/unet.hpp"

namespace dropvision {

struct InceptionConfig {
    int input_size = 299;
    int num_classes = 3;
    std::string scale = "full"; // "full" or "desk"
    std::string pretrained_weights; // checkpoint path, empty = random init
    int input_channels = 3;

    void validate() const {
        require(input_size >= 32, "InceptionConfig: input_size must be >= 32");
        require(num_classes >= 2, "InceptionConfig: num_classes must be >= 2");
        require(scale == "full" || scale == "desk",
                "InceptionConfig: scale must be 'full' or 'desk'");
        require(input_channels == 1 || input_channels == 3,
                "InceptionConfig: input_channels must be 1 or 3");
    }

    // Reduced architecture for workstation-scale runs.
    static InceptionConfig desk() {
        InceptionConfig cfg;
        cfg.scale = "desk";
        cfg.input_size = 64;
        return cfg;
    }
};

inline void to_json(nlohmann::json& j, const InceptionConfig& c) {
    j = {{"input_size", c.input_size},
         {"num_classes", c.num_classes},
         {"scale", c.scale},
         {"pretrained_weights", c.pretrained_weights},
         {"input_channels", c.input_channels}};
}

inline void from_json(const nlohmann::json& j, InceptionConfig& c) {
    c.input_size = j.value("input_size", c.input_size);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.scale = j.value("scale", c.scale);
    c.pretrained_weights = j.value("pretrained_weights", c.pretrained_weights);
    c.input_channels = j.value("input_channels", c.input_channels);
}

// Per-class probabilities, fixed three-class task order.
struct ClassScores {
    std::array<double, kNumClasses> values{};

    double at(ClassLabel l) const { return values[static_cast<int>(l)]; }
    double& at(ClassLabel l) { return values[static_cast<int>(l)]; }
    double sum() const { return values[0] + values[1] + values[2]; }

    // Argmax with ties broken by fixed class order Clear < Crystals < Precipitate.
    ClassLabel argmax() const {
        int best = 0;
        for (int i = 1; i < kNumClasses; ++i)
            if (values[i] > values[best]) best = i;
        return static_cast<ClassLabel>(best);
    }
};

namespace nn {

// Parallel multi-size filter bank: 1x1, reduced 3x3, reduced 5x5, and a pooled
// 1x1 branch, concatenated along channels. The 1x1 reductions run each larger
// filter on a narrowed input.
class InceptionBlock final : public Layer {
  public:
    InceptionBlock(const std::string& name, int in_channels, std::array<int, 4> widths)
        : widths_(widths) {
        require(in_channels >= 1, "InceptionBlock: in_channels must be >= 1");
        for (int w : widths) require(w >= 1, "InceptionBlock: branch widths must be >= 1");
        const int r1 = std::max(1, widths[1] / 2);
        const int r2 = std::max(1, widths[2] / 2);

        b0_ = std::make_unique<Sequential>();
        add_conv(*b0_, name + ".b0", in_channels, widths[0], 1);

        b1_ = std::make_unique<Sequential>();
        add_conv(*b1_, name + ".b1.red", in_channels, r1, 1);
        add_conv(*b1_, name + ".b1", r1, widths[1], 3);

        b2_ = std::make_unique<Sequential>();
        add_conv(*b2_, name + ".b2.red", in_channels, r2, 1);
        add_conv(*b2_, name + ".b2", r2, widths[2], 5);

        b3_ = std::make_unique<Sequential>();
        b3_->emplace<AvgPool2dSame>(3, 1);
        add_conv(*b3_, name + ".b3", in_channels, widths[3], 1);
    }

    int out_channels() const { return widths_[0] + widths_[1] + widths_[2] + widths_[3]; }

    Tensor forward(const Tensor& x, bool training) override {
        Tensor y0 = b0_->forward(x, training);
        Tensor y1 = b1_->forward(x, training);
        Tensor y2 = b2_->forward(x, training);
        Tensor y3 = b3_->forward(x, training);
        Tensor out = concat_channels(y0, y1);
        out = concat_channels(out, y2);
        return concat_channels(out, y3);
    }

    Tensor backward(const Tensor& dy) override {
        auto [d01, d3] = split_channels(dy, widths_[0] + widths_[1] + widths_[2]);
        auto [d02, d2] = split_channels(d01, widths_[0] + widths_[1]);
        auto [d0, d1] = split_channels(d02, widths_[0]);
        Tensor dx = b0_->backward(d0);
        accumulate(dx, b1_->backward(d1));
        accumulate(dx, b2_->backward(d2));
        accumulate(dx, b3_->backward(d3));
        return dx;
    }

    void collect_params(std::vector<Param*>& out) override {
        b0_->collect_params(out);
        b1_->collect_params(out);
        b2_->collect_params(out);
        b3_->collect_params(out);
    }

    void init(Rng& rng) override {
        b0_->init(rng);
        b1_->init(rng);
        b2_->init(rng);
        b3_->init(rng);
    }

  private:
    static void add_conv(Sequential& seq, const std::string& name, int in_c, int out_c,
                         int k) {
        seq.emplace<Conv2d>(name + ".conv", in_c, out_c, k, 1, true, false);
        seq.emplace<BatchNorm2d>(name + ".bn", out_c);
        seq.emplace<ReLU>();
    }

    static void accumulate(Tensor& acc, const Tensor& t) {
        for (std::size_t i = 0; i < acc.numel(); ++i) acc.v[i] += t.v[i];
    }

    std::array<int, 4> widths_;
    std::unique_ptr<Sequential> b0_, b1_, b2_, b3_;
};

} // namespace nn

inline std::unique_ptr<nn::InceptionBlock> build_inception_block(int in_channels,
                                                                 std::array<int, 4> widths) {
    return std::make_unique<nn::InceptionBlock>("block", in_channels, widths);
}

// Stem convolutions, a stack of inception blocks with interleaved pooling,
// global average pooling, and a dense classification head. Emits raw logits;
// probabilities come from a softmax over them.
class ClassifierModel {
  public:
    explicit ClassifierModel(const InceptionConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        net_ = std::make_unique<nn::Sequential>();
        int c = cfg.scale == "desk" ? build_desk_trunk() : build_full_trunk();
        net_->emplace<nn::GlobalAvgPool>();
        net_->emplace<nn::Dense>("head.fc", c, cfg.num_classes);
    }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, "inception-init"));
        net_->init(rng);
    }

    nn::Tensor forward(const nn::Tensor& x, bool training) {
        require(x.c == cfg_.input_channels, "ClassifierModel: channel mismatch");
        require(x.h == cfg_.input_size && x.w == cfg_.input_size,
                "ClassifierModel: input size mismatch");
        return net_->forward(x, training);
    }

    nn::Tensor backward(const nn::Tensor& dlogits) { return net_->backward(dlogits); }

    std::vector<nn::Param*> parameters() {
        std::vector<nn::Param*> out;
        net_->collect_params(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t total = 0;
        for (const nn::Param* p : parameters()) total += p->numel();
        return total;
    }

    // Inception blocks only, in trunk order.
    const std::vector<StageInfo>& block_listing() const { return blocks_; }

    const InceptionConfig& config() const { return cfg_; }

  private:
    void add_stem_conv(int index, int in_c, int out_c, int k, int stride) {
        const std::string name = "stem.conv" + std::to_string(index);
        net_->emplace<nn::Conv2d>(name, in_c, out_c, k, stride, true, false);
        net_->emplace<nn::BatchNorm2d>("stem.bn" + std::to_string(index), out_c);
        net_->emplace<nn::ReLU>();
    }

    int add_block(int in_c, std::array<int, 4> widths) {
        const std::string name = "blk" + std::to_string(blocks_.size());
        auto* blk = net_->emplace<nn::InceptionBlock>(name, in_c, widths);
        blocks_.push_back({name, blk->out_channels()});
        return blk->out_channels();
    }

    int build_desk_trunk() {
        add_stem_conv(0, cfg_.input_channels, 16, 3, 2);
        net_->emplace<nn::MaxPool2d>(2, 2);
        add_stem_conv(1, 16, 32, 3, 1);
        net_->emplace<nn::MaxPool2d>(2, 2);
        int c = add_block(32, {16, 24, 8, 8});
        c = add_block(c, {24, 32, 12, 12});
        net_->emplace<nn::MaxPool2d>(2, 2);
        c = add_block(c, {32, 48, 16, 16});
        return c;
    }

    int build_full_trunk() {
        add_stem_conv(0, cfg_.input_channels, 32, 3, 2);
        add_stem_conv(1, 32, 32, 3, 1);
        add_stem_conv(2, 32, 64, 3, 1);
        net_->emplace<nn::MaxPool2d>(2, 2);
        add_stem_conv(3, 64, 80, 1, 1);
        add_stem_conv(4, 80, 192, 3, 1);
        net_->emplace<nn::MaxPool2d>(2, 2);
        int c = 192;
        for (int i = 0; i < 3; ++i) c = add_block(c, {64, 96, 32, 32});
        net_->emplace<nn::MaxPool2d>(2, 2);
        for (int i = 0; i < 5; ++i) c = add_block(c, {96, 128, 48, 48});
        net_->emplace<nn::MaxPool2d>(2, 2);
        for (int i = 0; i < 3; ++i) c = add_block(c, {128, 192, 64, 64});
        return c;
    }

    InceptionConfig cfg_;
    std::unique_ptr<nn::Sequential> net_;
    std::vector<StageInfo> blocks_;
};

inline ClassifierModel build_classifier(const InceptionConfig& cfg, std::uint64_t seed = 0) {
    ClassifierModel model(cfg);
    model.init(seed);
    if (!cfg.pretrained_weights.empty()) {
        Checkpoint ckpt = load_checkpoint(cfg.pretrained_weights);
        require(ckpt.kind == "inception",
                "build_classifier: '" + cfg.pretrained_weights + "' holds a '" + ckpt.kind +
                    "' model, not an inception classifier");
        std::vector<nn::Param*> params = model.parameters();
        load_pretrained(ckpt, params, "head.");
    }
    return model;
}

struct ClassifierTrainConfig {
    int batch_size = 16;
    int image_size = 299;
    int epochs = 300;
    std::string optimizer = "rmsprop";
    double learning_rate = 1e-5;
    std::string loss = "categorical_cross_entropy";
    std::uint64_t seed = 0;

    void validate() const {
        require(batch_size >= 1 && image_size >= 1 && epochs >= 1 && learning_rate > 0.0,
                "ClassifierTrainConfig: all quantities must be positive");
    }
};

inline void to_json(nlohmann::json& j, const ClassifierTrainConfig& c) {
    j = {{"batch_size", c.batch_size}, {"image_size", c.image_size},
         {"epochs", c.epochs},         {"optimizer", c.optimizer},
         {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ClassifierTrainConfig& c) {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.image_size = j.value("image_size", c.image_size);
    c.epochs = j.value("epochs", c.epochs);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
}

namespace detail {

inline LabeledSample resize_cls_sample(const LabeledSample& s, int size, int channels) {
    LabeledSample out = s;
    RasterImage img = s.image;
    if (channels == 1 && img.channels == 3) img = to_grayscale(img);
    if (channels == 3 && img.channels == 1) img = to_rgb(img);
    out.image = resize_image(img, size, size);
    return out;
}

} // namespace detail

// Scores an image with the trained model. The image must already be at the
// model's input size; channel layout is converted as needed.
inline ClassScores predict_scores(ClassifierModel& model, const RasterImage& image) {
    const InceptionConfig& cfg = model.config();
    require(cfg.num_classes == kNumClasses,
            "predict_scores: model is not a three-class classifier");
    require(image.height == cfg.input_size && image.width == cfg.input_size,
            "predict_scores: image size mismatch (expected " + std::to_string(cfg.input_size) +
                ", got " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                ")");
    RasterImage img = image;
    if (cfg.input_channels == 1 && img.channels == 3) img = to_grayscale(img);
    if (cfg.input_channels == 3 && img.channels == 1) img = to_rgb(img);
    nn::Tensor x = nn::image_to_tensor_signed(img);
    nn::Tensor logits = model.forward(x, false);
    const std::vector<double> probs = nn::softmax_row(logits.v.data(), logits.c);
    ClassScores scores;
    for (int i = 0; i < kNumClasses; ++i) scores.values[i] = probs[i];
    return scores;
}

inline ClassLabel predict_label(ClassifierModel& model, const RasterImage& image) {
    return predict_scores(model, image).argmax();
}

// Trains with categorical cross entropy on augmented batches and keeps the
// weights from the epoch with the best evaluation accuracy.
inline TrainingLog train_classifier(ClassifierModel& model,
                                    const std::vector<LabeledSample>& train,
                                    const std::vector<LabeledSample>& eval_set,
                                    const ClassifierTrainConfig& cfg,
                                    const ClassifierAugmentSpec& aug) {
    cfg.validate();
    aug.validate();
    require(!train.empty(), "train_classifier: empty training set");
    require(!eval_set.empty(), "train_classifier: empty evaluation set");
    std::set<ClassLabel> seen_labels;
    for (const auto& s : train) seen_labels.insert(s.label);
    require(seen_labels.size() >= 2,
            "train_classifier: training set contains a single class");
    const InceptionConfig& arch = model.config();
    require(cfg.image_size == arch.input_size,
            "train_classifier: cfg.image_size must match the model input size");

    std::vector<LabeledSample> tr, ev;
    tr.reserve(train.size());
    ev.reserve(eval_set.size());
    for (const auto& s : train)
        tr.push_back(detail::resize_cls_sample(s, cfg.image_size, arch.input_channels));
    for (const auto& s : eval_set)
        ev.push_back(detail::resize_cls_sample(s, cfg.image_size, arch.input_channels));

    std::vector<nn::Param*> params = model.parameters();
    auto opt = detail::make_optimizer(cfg.optimizer, cfg.learning_rate);

    TrainingLog log;
    log.metric_name = "eval_accuracy";
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
            std::vector<int> labels(bsz);
            for (std::size_t b = 0; b < bsz; ++b) {
                const LabeledSample& raw = tr[order[start + b]];
                LabeledSample s = augment_classifier_sample(raw, aug, erng);
                nn::copy_image_into_batch(x, static_cast<int>(b),
                                          nn::image_to_tensor_signed(s.image));
                labels[b] = static_cast<int>(s.label);
            }
            nn::Tensor logits = model.forward(x, true);
            nn::Tensor dlogits;
            const double loss = nn::cce_with_logits(logits, labels, &dlogits);
            require(std::isfinite(loss), "train_classifier: non-finite loss at epoch " +
                                             std::to_string(epoch));
            nn::zero_grads(params);
            model.backward(dlogits);
            opt->step(params);
            loss_sum += loss * static_cast<double>(bsz);
            seen += bsz;
        }

        double eval_loss_sum = 0.0;
        std::size_t correct = 0;
        for (const LabeledSample& s : ev) {
            nn::Tensor x = nn::image_to_tensor_signed(s.image);
            nn::Tensor logits = model.forward(x, false);
            eval_loss_sum += nn::cce_with_logits(logits, {static_cast<int>(s.label)}, nullptr);
            const std::vector<double> probs = nn::softmax_row(logits.v.data(), logits.c);
            int arg = 0;
            for (int i = 1; i < logits.c; ++i)
                if (probs[i] > probs[arg]) arg = i;
            if (arg == static_cast<int>(s.label)) ++correct;
        }
        const double metric = static_cast<double>(correct) / static_cast<double>(ev.size());

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

inline void save_classifier_checkpoint(const std::filesystem::path& path,
                                       ClassifierModel& model) {
    nlohmann::json cfg = model.config();
    save_checkpoint(path, "inception", cfg, model.parameters());
}

inline ClassifierModel load_classifier_checkpoint(const std::filesystem::path& path) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.kind == "inception",
            "load_classifier_checkpoint: '" + path.string() + "' holds a '" + ckpt.kind +
                "' model, not an inception classifier");
    InceptionConfig cfg = ckpt.config.get<InceptionConfig>();
    ClassifierModel model(cfg);
    apply_checkpoint(ckpt, model.parameters());
    return model;
}

} // namespace dropvision
