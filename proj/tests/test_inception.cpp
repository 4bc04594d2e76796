#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dropvision/inception.hpp"

using namespace dropvision;

namespace {

std::string read_file_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RasterImage noise_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    RasterImage img = RasterImage::make(size, size, 3, 0);
    for (auto& p : img.pixels) p = clamp_u8(rng.uniform_int(0, 255));
    return img;
}

// Small class-distinctive textures: flat plate, bright blocks, speckle.
LabeledSample textured_sample(ClassLabel label, int size, std::uint64_t seed) {
    Rng rng(seed);
    LabeledSample s;
    s.label = label;
    s.id = "t" + std::to_string(seed);
    s.image = RasterImage::make(size, size, 3, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            int v = 0;
            switch (label) {
            case ClassLabel::Clear: v = 120 + (x + y) % 3; break;
            case ClassLabel::Crystals: v = ((x / 4 + y / 4) % 2) ? 230 : 40; break;
            case ClassLabel::Precipitate: v = rng.uniform_int(60, 200); break;
            }
            for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = clamp_u8(v);
        }
    return s;
}

void zero_head(ClassifierModel& model) {
    for (nn::Param* p : model.parameters())
        if (p->name.rfind("head.", 0) == 0) std::fill(p->w.begin(), p->w.end(), 0.f);
}

} // namespace

TEST_CASE("inception config validation", "[inception]") {
    InceptionConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.input_size = 16;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = InceptionConfig{};
    cfg.num_classes = 1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = InceptionConfig{};
    cfg.scale = "pocket";
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("scale"));
}

TEST_CASE("inception block output channels equal the width sum", "[inception]") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int in_c = rng.uniform_int(1, 24);
        std::array<int, 4> widths;
        int sum = 0;
        for (int& w : widths) {
            w = rng.uniform_int(1, 16);
            sum += w;
        }
        auto blk = build_inception_block(in_c, widths);
        REQUIRE(blk->out_channels() == sum);
        Rng init_rng(trial + 1);
        blk->init(init_rng);
        nn::Tensor x = nn::Tensor::zeros(1, in_c, 6, 6);
        for (std::size_t i = 0; i < x.numel(); ++i)
            x.v[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        nn::Tensor y = blk->forward(x, false);
        REQUIRE(y.c == sum);
        REQUIRE(y.h == 6);
        REQUIRE(y.w == 6);
    }
}

TEST_CASE("1x1 reduction shrinks the 5x5 branch below the naive filter", "[inception]") {
    const int in_c = 32, out_w = 8;
    auto blk = build_inception_block(in_c, {8, 8, out_w, 8});
    std::vector<nn::Param*> params;
    blk->collect_params(params);
    std::size_t reduce_w = 0, five_w = 0;
    for (const nn::Param* p : params) {
        if (p->name == "block.b2.red.conv.weight") reduce_w = p->numel();
        if (p->name == "block.b2.conv.weight") five_w = p->numel();
    }
    const int r = std::max(1, out_w / 2);
    REQUIRE(reduce_w == static_cast<std::size_t>(in_c * r));
    REQUIRE(five_w == static_cast<std::size_t>(r * 5 * 5 * out_w));
    const std::size_t naive = static_cast<std::size_t>(in_c) * 5 * 5 * out_w;
    CHECK(reduce_w + five_w < naive);
}

TEST_CASE("desk classifier emits a probability vector", "[inception]") {
    InceptionConfig cfg = InceptionConfig::desk();
    ClassifierModel model = build_classifier(cfg, 3);
    REQUIRE(model.block_listing().size() == 3);
    CHECK(model.block_listing()[0].channels == 56);
    CHECK(model.block_listing()[1].channels == 80);
    CHECK(model.block_listing()[2].channels == 112);

    const RasterImage img = noise_image(cfg.input_size, 11);
    ClassScores scores = predict_scores(model, img);
    CHECK(scores.sum() == Catch::Approx(1.0).margin(1e-6));
    for (double v : scores.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    ClassScores again = predict_scores(model, img);
    CHECK(scores.values == again.values);
}

TEST_CASE("zeroed classification head scores all classes equally", "[inception]") {
    ClassifierModel model = build_classifier(InceptionConfig::desk(), 5);
    zero_head(model);
    ClassScores scores = predict_scores(model, noise_image(64, 9));
    for (double v : scores.values) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-12));
    CHECK(predict_label(model, noise_image(64, 9)) == ClassLabel::Clear);
}

TEST_CASE("full-scale classifier accepts a 299x299x3 image", "[inception][slow]") {
    InceptionConfig cfg; // full scale, input 299
    ClassifierModel model = build_classifier(cfg, 1);
    REQUIRE(model.block_listing().size() == 11);
    ClassScores scores = predict_scores(model, noise_image(299, 4));
    CHECK(scores.sum() == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("predict_scores rejects wrong image sizes", "[inception]") {
    ClassifierModel model = build_classifier(InceptionConfig::desk(), 2);
    CHECK_THROWS_WITH(predict_scores(model, noise_image(32, 1)),
                      Catch::Matchers::ContainsSubstring("size mismatch"));
}

TEST_CASE("class score argmax follows fixed-order tie-breaking", "[inception]") {
    ClassScores s;
    s.values = {0.1, 0.7, 0.2};
    CHECK(s.argmax() == ClassLabel::Crystals);
    s.values = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(s.argmax() == ClassLabel::Clear);
    s.values = {0.2, 0.4, 0.4};
    CHECK(s.argmax() == ClassLabel::Crystals);
}

TEST_CASE("softmax preserves the logit argmax under monotone transforms", "[inception]") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<float, 3> z;
        for (float& v : z) v = static_cast<float>(rng.uniform(-5.0, 5.0));
        auto arg_of = [](const std::vector<double>& p) {
            int best = 0;
            for (int i = 1; i < 3; ++i)
                if (p[i] > p[best]) best = i;
            return best;
        };
        const int base = arg_of(nn::softmax_row(z.data(), 3));
        int zarg = 0;
        for (int i = 1; i < 3; ++i)
            if (z[i] > z[zarg]) zarg = i;
        REQUIRE(base == zarg);
        std::array<float, 3> scaled, shifted;
        for (int i = 0; i < 3; ++i) {
            scaled[i] = 2.5f * z[i];
            shifted[i] = z[i] + 7.f;
        }
        REQUIRE(arg_of(nn::softmax_row(scaled.data(), 3)) == base);
        REQUIRE(arg_of(nn::softmax_row(shifted.data(), 3)) == base);
    }
}

TEST_CASE("predict_label matches the score argmax", "[inception]") {
    ClassifierModel model = build_classifier(InceptionConfig::desk(), 17);
    for (int i = 0; i < 20; ++i) {
        const RasterImage img = noise_image(64, 100 + i);
        CHECK(predict_label(model, img) == predict_scores(model, img).argmax());
    }
}

TEST_CASE("classifier rejects single-class training sets", "[inception]") {
    InceptionConfig arch = InceptionConfig::desk();
    arch.input_size = 32;
    ClassifierModel model = build_classifier(arch, 0);
    ClassifierTrainConfig cfg;
    cfg.image_size = 32;
    cfg.epochs = 1;
    std::vector<LabeledSample> only_clear = {textured_sample(ClassLabel::Clear, 32, 1),
                                             textured_sample(ClassLabel::Clear, 32, 2)};
    CHECK_THROWS_WITH(
        train_classifier(model, only_clear, only_clear, cfg, ClassifierAugmentSpec::identity()),
        Catch::Matchers::ContainsSubstring("single class"));
    CHECK_THROWS_WITH(
        train_classifier(model, {}, only_clear, cfg, ClassifierAugmentSpec::identity()),
        Catch::Matchers::ContainsSubstring("empty training set"));
}

TEST_CASE("classifier training defaults mirror the published recipe", "[inception]") {
    ClassifierTrainConfig cfg;
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.image_size == 299);
    CHECK(cfg.epochs == 300);
    CHECK(cfg.optimizer == "rmsprop");
    CHECK(cfg.learning_rate == 1e-5);
    CHECK(cfg.loss == "categorical_cross_entropy");
}

TEST_CASE("classifier memorizes a six-sample training set", "[inception][train]") {
    std::vector<LabeledSample> samples;
    for (int i = 0; i < 2; ++i) {
        samples.push_back(textured_sample(ClassLabel::Clear, 32, 10 + i));
        samples.push_back(textured_sample(ClassLabel::Crystals, 32, 20 + i));
        samples.push_back(textured_sample(ClassLabel::Precipitate, 32, 30 + i));
    }
    InceptionConfig arch = InceptionConfig::desk();
    arch.input_size = 32;
    ClassifierModel model = build_classifier(arch, 7);
    ClassifierTrainConfig cfg;
    cfg.image_size = 32;
    cfg.batch_size = 6;
    cfg.epochs = 100;
    cfg.learning_rate = 1e-3;
    cfg.seed = 7;
    TrainingLog log =
        train_classifier(model, samples, samples, cfg, ClassifierAugmentSpec::identity());

    REQUIRE(log.records.size() == 100);
    CHECK(log.metric_name == "eval_accuracy");
    CHECK(log.records.back().train_loss < log.records.front().train_loss);

    std::size_t correct = 0;
    for (const LabeledSample& s : samples)
        if (predict_label(model, s.image) == s.label) ++correct;
    CHECK(correct == samples.size());
}

TEST_CASE("classifier training is bitwise deterministic", "[inception][train]") {
    std::vector<LabeledSample> samples = {textured_sample(ClassLabel::Clear, 32, 1),
                                          textured_sample(ClassLabel::Crystals, 32, 2),
                                          textured_sample(ClassLabel::Precipitate, 32, 3)};
    InceptionConfig arch = InceptionConfig::desk();
    arch.input_size = 32;
    ClassifierTrainConfig cfg;
    cfg.image_size = 32;
    cfg.batch_size = 3;
    cfg.epochs = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 99;
    ClassifierAugmentSpec aug; // stochastic suite, seeded identically

    ClassifierModel a = build_classifier(arch, 42);
    TrainingLog log_a = train_classifier(a, samples, samples, cfg, aug);
    ClassifierModel b = build_classifier(arch, 42);
    TrainingLog log_b = train_classifier(b, samples, samples, cfg, aug);

    REQUIRE(log_a == log_b);
    const RasterImage probe = noise_image(32, 5);
    CHECK(predict_scores(a, probe).values == predict_scores(b, probe).values);
}

TEST_CASE("classifier checkpoints round-trip and gate on model kind", "[inception]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "dv_inception_ckpt";
    fs::create_directories(dir);

    InceptionConfig arch = InceptionConfig::desk();
    arch.input_size = 32;
    ClassifierModel model = build_classifier(arch, 13);
    const fs::path path = dir / "cls.ckpt";
    save_classifier_checkpoint(path, model);

    ClassifierModel loaded = load_classifier_checkpoint(path);
    const RasterImage probe = noise_image(32, 8);
    CHECK(predict_scores(model, probe).values == predict_scores(loaded, probe).values);

    // Byte-identical re-save.
    const fs::path resaved = dir / "cls2.ckpt";
    save_classifier_checkpoint(resaved, loaded);
    CHECK(read_file_bytes(path) == read_file_bytes(resaved));

    CHECK_THROWS_WITH(load_finder_checkpoint(path),
                      Catch::Matchers::ContainsSubstring("not a unet"));
    fs::remove_all(dir);
}

TEST_CASE("pretrained weights seed every layer except the head", "[inception]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "dv_inception_pre";
    fs::create_directories(dir);

    InceptionConfig arch = InceptionConfig::desk();
    arch.input_size = 32;
    ClassifierModel donor = build_classifier(arch, 55);
    const fs::path path = dir / "donor.ckpt";
    save_classifier_checkpoint(path, donor);

    InceptionConfig warm = arch;
    warm.pretrained_weights = path.string();
    ClassifierModel model = build_classifier(warm, 56);

    auto donor_params = donor.parameters();
    auto model_params = model.parameters();
    REQUIRE(donor_params.size() == model_params.size());
    for (std::size_t i = 0; i < model_params.size(); ++i) {
        if (model_params[i]->name.rfind("head.", 0) == 0) {
            if (model_params[i]->name == "head.fc.weight")
                CHECK(model_params[i]->w != donor_params[i]->w);
        } else {
            CHECK(model_params[i]->w == donor_params[i]->w);
        }
    }
    fs::remove_all(dir);
}
