#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/rng.hpp"
#include "dropvision/tensor.hpp"

namespace dropvision::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// A learnable array with its gradient. Layers own their params and hand out
// pointers for optimizers and checkpointing.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> w;
    std::vector<float> g;
    bool trainable = true;

    Param() = default;
    Param(std::string n, std::vector<int> s, bool train = true)
        : name(std::move(n)), shape(std::move(s)), trainable(train) {
        std::size_t total = 1;
        for (int d : shape) total *= static_cast<std::size_t>(d);
        w.assign(total, 0.f);
        g.assign(total, 0.f);
    }
    std::size_t numel() const { return w.size(); }
};

inline void fill_he_normal(Param& p, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
    for (float& x : p.w) x = static_cast<float>(rng.normal(0.0, stddev));
}

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) std::fill(p->g.begin(), p->g.end(), 0.f);
}

// Same-style padding: output spans ceil(extent/stride); any odd padding goes
// to the bottom/right edge.
struct PadSpec {
    int out = 0, before = 0, after = 0;
};

inline PadSpec same_pad(int extent, int kernel, int stride) {
    PadSpec s;
    s.out = (extent + stride - 1) / stride;
    const int total = std::max(0, (s.out - 1) * stride + kernel - extent);
    s.before = total / 2;
    s.after = total - s.before;
    return s;
}

class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect_params(std::vector<Param*>& out) {}
    virtual void init(Rng& rng) {}
};

// 2D convolution via im2col + GEMM. Weight layout [out_c, in_c*k*k].
class Conv2d final : public Layer {
  public:
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride = 1,
           bool same_padding = true, bool use_bias = true)
        : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), same_(same_padding),
          weight_(name + ".weight", {out_c, in_c, kernel, kernel}),
          bias_(name + ".bias", {out_c}), use_bias_(use_bias) {
        require(in_c >= 1 && out_c >= 1 && kernel >= 1 && stride >= 1, "Conv2d: bad config");
    }

    void init(Rng& rng) override { fill_he_normal(weight_, in_c_ * k_ * k_, rng); }

    Tensor forward(const Tensor& x, bool) override {
        require(x.c == in_c_, "Conv2d: channel mismatch");
        x_ = x;
        const PadSpec py = pad_for(x.h), px = pad_for(x.w);
        out_h_ = py.out;
        out_w_ = px.out;
        Tensor y = Tensor::zeros(x.n, out_c_, out_h_, out_w_);
        const int cols = out_h_ * out_w_;
        const int rows = in_c_ * k_ * k_;
        col_.assign(static_cast<std::size_t>(rows) * cols, 0.f);
        ConstMapMat wmat(weight_.w.data(), out_c_, rows);
        for (int in = 0; in < x.n; ++in) {
            im2col(x, in, py, px);
            MapMat colm(col_.data(), rows, cols);
            MapMat ym(y.sample(in), out_c_, cols);
            ym.noalias() = wmat * colm;
            if (use_bias_)
                for (int oc = 0; oc < out_c_; ++oc) ym.row(oc).array() += bias_.w[oc];
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require(dy.c == out_c_ && dy.h == out_h_ && dy.w == out_w_, "Conv2d: grad shape mismatch");
        const PadSpec py = pad_for(x_.h), px = pad_for(x_.w);
        const int cols = out_h_ * out_w_;
        const int rows = in_c_ * k_ * k_;
        Tensor dx = Tensor::zeros(x_.n, x_.c, x_.h, x_.w);
        MapMat dwmat(weight_.g.data(), out_c_, rows);
        ConstMapMat wmat(weight_.w.data(), out_c_, rows);
        std::vector<float> dcol(static_cast<std::size_t>(rows) * cols);
        for (int in = 0; in < x_.n; ++in) {
            im2col(x_, in, py, px);
            ConstMapMat colm(col_.data(), rows, cols);
            ConstMapMat dym(dy.sample(in), out_c_, cols);
            dwmat.noalias() += dym * colm.transpose();
            if (use_bias_) {
                // Scalar accumulation: vectorized reductions order additions
                // by buffer alignment, breaking bitwise reproducibility.
                const float* d = dy.sample(in);
                for (int oc = 0; oc < out_c_; ++oc) {
                    double s = 0.0;
                    for (int i = 0; i < cols; ++i) s += d[static_cast<std::size_t>(oc) * cols + i];
                    bias_.g[oc] += static_cast<float>(s);
                }
            }
            MapMat dcolm(dcol.data(), rows, cols);
            dcolm.noalias() = wmat.transpose() * dym;
            col2im(dx, in, dcol, py, px);
        }
        return dx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&weight_);
        if (use_bias_) out.push_back(&bias_);
    }

    int out_channels() const { return out_c_; }

  private:
    PadSpec pad_for(int extent) const {
        if (same_) return same_pad(extent, k_, stride_);
        PadSpec s;
        require(extent >= k_, "Conv2d: input smaller than kernel");
        s.out = (extent - k_) / stride_ + 1;
        return s;
    }

    void im2col(const Tensor& x, int in, const PadSpec& py, const PadSpec& px) {
        const int cols = out_h_ * out_w_;
        float* col = col_.data();
        for (int ic = 0; ic < in_c_; ++ic) {
            const float* plane = x.sample(in) + static_cast<std::size_t>(ic) * x.plane();
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    float* row = col + (static_cast<std::size_t>(ic) * k_ * k_ +
                                        static_cast<std::size_t>(ky) * k_ + kx) *
                                           cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        const int sy = oy * stride_ - py.before + ky;
                        float* dst = row + static_cast<std::size_t>(oy) * out_w_;
                        if (sy < 0 || sy >= x.h) {
                            std::fill(dst, dst + out_w_, 0.f);
                            continue;
                        }
                        const float* src = plane + static_cast<std::size_t>(sy) * x.w;
                        for (int ox = 0; ox < out_w_; ++ox) {
                            const int sx = ox * stride_ - px.before + kx;
                            dst[ox] = (sx >= 0 && sx < x.w) ? src[sx] : 0.f;
                        }
                    }
                }
        }
    }

    void col2im(Tensor& dx, int in, const std::vector<float>& dcol, const PadSpec& py,
                const PadSpec& px) {
        const int cols = out_h_ * out_w_;
        for (int ic = 0; ic < in_c_; ++ic) {
            float* plane = dx.sample(in) + static_cast<std::size_t>(ic) * dx.plane();
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    const float* row = dcol.data() + (static_cast<std::size_t>(ic) * k_ * k_ +
                                                      static_cast<std::size_t>(ky) * k_ + kx) *
                                                         cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        const int sy = oy * stride_ - py.before + ky;
                        if (sy < 0 || sy >= dx.h) continue;
                        float* dst = plane + static_cast<std::size_t>(sy) * dx.w;
                        const float* src = row + static_cast<std::size_t>(oy) * out_w_;
                        for (int ox = 0; ox < out_w_; ++ox) {
                            const int sx = ox * stride_ - px.before + kx;
                            if (sx >= 0 && sx < dx.w) dst[sx] += src[ox];
                        }
                    }
                }
        }
    }

    int in_c_, out_c_, k_, stride_;
    bool same_;
    Param weight_, bias_;
    bool use_bias_;
    Tensor x_;
    std::vector<float> col_;
    int out_h_ = 0, out_w_ = 0;
};

// Per-channel batch normalization over (N,H,W) with running statistics.
class BatchNorm2d final : public Layer {
  public:
    explicit BatchNorm2d(std::string name, int channels, float momentum = 0.9f,
                         float eps = 1e-5f)
        : c_(channels), momentum_(momentum), eps_(eps),
          gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
          run_mean_(name + ".running_mean", {channels}, false),
          run_var_(name + ".running_var", {channels}, false) {
        std::fill(gamma_.w.begin(), gamma_.w.end(), 1.f);
        std::fill(run_var_.w.begin(), run_var_.w.end(), 1.f);
    }

    Tensor forward(const Tensor& x, bool training) override {
        require(x.c == c_, "BatchNorm2d: channel mismatch");
        training_ = training;
        Tensor y = Tensor::zeros(x.n, x.c, x.h, x.w);
        const std::size_t plane = x.plane();
        if (training) {
            xhat_ = Tensor::zeros(x.n, x.c, x.h, x.w);
            inv_std_.assign(c_, 0.f);
            const double m = static_cast<double>(x.n) * plane;
            for (int ch = 0; ch < c_; ++ch) {
                double sum = 0.0, sq = 0.0;
                for (int in = 0; in < x.n; ++in) {
                    const float* p = x.sample(in) + ch * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum += p[i];
                        sq += static_cast<double>(p[i]) * p[i];
                    }
                }
                const double mean = sum / m;
                const double var = std::max(0.0, sq / m - mean * mean);
                const float istd = static_cast<float>(1.0 / std::sqrt(var + eps_));
                inv_std_[ch] = istd;
                run_mean_.w[ch] =
                    momentum_ * run_mean_.w[ch] + (1.f - momentum_) * static_cast<float>(mean);
                run_var_.w[ch] =
                    momentum_ * run_var_.w[ch] + (1.f - momentum_) * static_cast<float>(var);
                const float g = gamma_.w[ch], b = beta_.w[ch], mu = static_cast<float>(mean);
                for (int in = 0; in < x.n; ++in) {
                    const float* p = x.sample(in) + ch * plane;
                    float* xh = xhat_.sample(in) + ch * plane;
                    float* o = y.sample(in) + ch * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        xh[i] = (p[i] - mu) * istd;
                        o[i] = g * xh[i] + b;
                    }
                }
            }
        } else {
            for (int ch = 0; ch < c_; ++ch) {
                const float istd = 1.f / std::sqrt(run_var_.w[ch] + eps_);
                const float g = gamma_.w[ch], b = beta_.w[ch], mu = run_mean_.w[ch];
                for (int in = 0; in < x.n; ++in) {
                    const float* p = x.sample(in) + ch * plane;
                    float* o = y.sample(in) + ch * plane;
                    for (std::size_t i = 0; i < plane; ++i) o[i] = g * istd * (p[i] - mu) + b;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require(training_, "BatchNorm2d: backward requires a training-mode forward");
        Tensor dx = Tensor::zeros(dy.n, dy.c, dy.h, dy.w);
        const std::size_t plane = dy.plane();
        const double m = static_cast<double>(dy.n) * plane;
        for (int ch = 0; ch < c_; ++ch) {
            double dg = 0.0, db = 0.0;
            for (int in = 0; in < dy.n; ++in) {
                const float* d = dy.sample(in) + ch * plane;
                const float* xh = xhat_.sample(in) + ch * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    dg += static_cast<double>(d[i]) * xh[i];
                    db += d[i];
                }
            }
            gamma_.g[ch] += static_cast<float>(dg);
            beta_.g[ch] += static_cast<float>(db);
            const float g = gamma_.w[ch], istd = inv_std_[ch];
            const float mean_dy = static_cast<float>(db / m);
            const float mean_dy_xhat = static_cast<float>(dg / m);
            for (int in = 0; in < dy.n; ++in) {
                const float* d = dy.sample(in) + ch * plane;
                const float* xh = xhat_.sample(in) + ch * plane;
                float* o = dx.sample(in) + ch * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    o[i] = g * istd * (d[i] - mean_dy - xh[i] * mean_dy_xhat);
            }
        }
        return dx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
        out.push_back(&run_mean_);
        out.push_back(&run_var_);
    }

  private:
    int c_;
    float momentum_, eps_;
    Param gamma_, beta_, run_mean_, run_var_;
    Tensor xhat_;
    std::vector<float> inv_std_;
    bool training_ = false;
};

class ReLU final : public Layer {
  public:
    Tensor forward(const Tensor& x, bool) override {
        mask_.assign(x.numel(), 0);
        Tensor y = x;
        for (std::size_t i = 0; i < y.numel(); ++i) {
            if (y.v[i] > 0.f)
                mask_[i] = 1;
            else
                y.v[i] = 0.f;
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        require(dy.numel() == mask_.size(), "ReLU: grad shape mismatch");
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.numel(); ++i)
            if (!mask_[i]) dx.v[i] = 0.f;
        return dx;
    }

  private:
    std::vector<std::uint8_t> mask_;
};

// Valid max pooling; caches the argmax of each window.
class MaxPool2d final : public Layer {
  public:
    explicit MaxPool2d(int kernel = 2, int stride = 2) : k_(kernel), s_(stride) {
        require(kernel >= 1 && stride >= 1, "MaxPool2d: bad config");
    }

    Tensor forward(const Tensor& x, bool) override {
        require(x.h >= k_ && x.w >= k_, "MaxPool2d: input smaller than window");
        in_shape_ = {x.n, x.c, x.h, x.w};
        const int oh = (x.h - k_) / s_ + 1, ow = (x.w - k_) / s_ + 1;
        Tensor y = Tensor::zeros(x.n, x.c, oh, ow);
        argmax_.assign(y.numel(), 0);
        std::size_t oi = 0;
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic) {
                const float* plane = x.sample(in) + static_cast<std::size_t>(ic) * x.plane();
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox, ++oi) {
                        float best = -std::numeric_limits<float>::infinity();
                        std::size_t best_at = 0;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx) {
                                const std::size_t at =
                                    static_cast<std::size_t>(oy * s_ + ky) * x.w + ox * s_ + kx;
                                if (plane[at] > best) {
                                    best = plane[at];
                                    best_at = at;
                                }
                            }
                        y.v[oi] = best;
                        argmax_[oi] =
                            (static_cast<std::size_t>(in) * x.c + ic) * x.plane() + best_at;
                    }
            }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        require(dy.numel() == argmax_.size(), "MaxPool2d: grad shape mismatch");
        Tensor dx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        for (std::size_t i = 0; i < dy.numel(); ++i) dx.v[argmax_[i]] += dy.v[i];
        return dx;
    }

  private:
    int k_, s_;
    std::array<int, 4> in_shape_{};
    std::vector<std::size_t> argmax_;
};

// Same-padded average pooling; border windows divide by the count of valid
// cells rather than the full window area.
class AvgPool2dSame final : public Layer {
  public:
    explicit AvgPool2dSame(int kernel = 3, int stride = 1) : k_(kernel), s_(stride) {}

    Tensor forward(const Tensor& x, bool) override {
        in_shape_ = {x.n, x.c, x.h, x.w};
        py_ = same_pad(x.h, k_, s_);
        px_ = same_pad(x.w, k_, s_);
        Tensor y = Tensor::zeros(x.n, x.c, py_.out, px_.out);
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic) {
                const float* plane = x.sample(in) + static_cast<std::size_t>(ic) * x.plane();
                float* out = y.sample(in) + static_cast<std::size_t>(ic) * y.plane();
                for (int oy = 0; oy < py_.out; ++oy)
                    for (int ox = 0; ox < px_.out; ++ox) {
                        double sum = 0.0;
                        int count = 0;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx) {
                                const int sy = oy * s_ - py_.before + ky;
                                const int sx = ox * s_ - px_.before + kx;
                                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                                sum += plane[static_cast<std::size_t>(sy) * x.w + sx];
                                ++count;
                            }
                        out[static_cast<std::size_t>(oy) * px_.out + ox] =
                            static_cast<float>(sum / count);
                    }
            }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        for (int in = 0; in < dx.n; ++in)
            for (int ic = 0; ic < dx.c; ++ic) {
                float* plane = dx.sample(in) + static_cast<std::size_t>(ic) * dx.plane();
                const float* d = dy.sample(in) + static_cast<std::size_t>(ic) * dy.plane();
                for (int oy = 0; oy < py_.out; ++oy)
                    for (int ox = 0; ox < px_.out; ++ox) {
                        int count = 0;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx) {
                                const int sy = oy * s_ - py_.before + ky;
                                const int sx = ox * s_ - px_.before + kx;
                                if (sy >= 0 && sy < dx.h && sx >= 0 && sx < dx.w) ++count;
                            }
                        const float share =
                            d[static_cast<std::size_t>(oy) * px_.out + ox] / count;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx) {
                                const int sy = oy * s_ - py_.before + ky;
                                const int sx = ox * s_ - px_.before + kx;
                                if (sy >= 0 && sy < dx.h && sx >= 0 && sx < dx.w)
                                    plane[static_cast<std::size_t>(sy) * dx.w + sx] += share;
                            }
                    }
            }
        return dx;
    }

  private:
    int k_, s_;
    std::array<int, 4> in_shape_{};
    PadSpec py_, px_;
};

class UpsampleNearest2x final : public Layer {
  public:
    Tensor forward(const Tensor& x, bool) override {
        in_shape_ = {x.n, x.c, x.h, x.w};
        Tensor y = Tensor::zeros(x.n, x.c, x.h * 2, x.w * 2);
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic)
                for (int sy = 0; sy < x.h; ++sy)
                    for (int sx = 0; sx < x.w; ++sx) {
                        const float v = x.at(in, ic, sy, sx);
                        y.at(in, ic, 2 * sy, 2 * sx) = v;
                        y.at(in, ic, 2 * sy, 2 * sx + 1) = v;
                        y.at(in, ic, 2 * sy + 1, 2 * sx) = v;
                        y.at(in, ic, 2 * sy + 1, 2 * sx + 1) = v;
                    }
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        for (int in = 0; in < dx.n; ++in)
            for (int ic = 0; ic < dx.c; ++ic)
                for (int sy = 0; sy < dx.h; ++sy)
                    for (int sx = 0; sx < dx.w; ++sx)
                        dx.at(in, ic, sy, sx) =
                            dy.at(in, ic, 2 * sy, 2 * sx) + dy.at(in, ic, 2 * sy, 2 * sx + 1) +
                            dy.at(in, ic, 2 * sy + 1, 2 * sx) +
                            dy.at(in, ic, 2 * sy + 1, 2 * sx + 1);
        return dx;
    }

  private:
    std::array<int, 4> in_shape_{};
};

// Fully connected layer over [N, C, 1, 1] tensors.
class Dense final : public Layer {
  public:
    Dense(std::string name, int in_features, int out_features)
        : in_(in_features), out_(out_features),
          weight_(name + ".weight", {out_features, in_features}),
          bias_(name + ".bias", {out_features}) {}

    void init(Rng& rng) override { fill_he_normal(weight_, in_, rng); }

    Tensor forward(const Tensor& x, bool) override {
        require(x.c == in_ && x.h == 1 && x.w == 1, "Dense: expected [N,in,1,1] input");
        x_ = x;
        Tensor y = Tensor::zeros(x.n, out_, 1, 1);
        ConstMapMat xm(x.v.data(), x.n, in_);
        ConstMapMat wm(weight_.w.data(), out_, in_);
        MapMat ym(y.v.data(), x.n, out_);
        ym.noalias() = xm * wm.transpose();
        for (int in = 0; in < x.n; ++in)
            for (int o = 0; o < out_; ++o) ym(in, o) += bias_.w[o];
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx = Tensor::zeros(x_.n, in_, 1, 1);
        ConstMapMat dym(dy.v.data(), dy.n, out_);
        ConstMapMat xm(x_.v.data(), x_.n, in_);
        ConstMapMat wm(weight_.w.data(), out_, in_);
        MapMat dwm(weight_.g.data(), out_, in_);
        MapMat dxm(dx.v.data(), dx.n, in_);
        dwm.noalias() += dym.transpose() * xm;
        for (int o = 0; o < out_; ++o) {
            double s = 0.0;
            for (int in = 0; in < dy.n; ++in) s += dy.v[static_cast<std::size_t>(in) * out_ + o];
            bias_.g[o] += static_cast<float>(s);
        }
        dxm.noalias() = dym * wm;
        return dx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

  private:
    int in_, out_;
    Param weight_, bias_;
    Tensor x_;
};

class GlobalAvgPool final : public Layer {
  public:
    Tensor forward(const Tensor& x, bool) override {
        in_shape_ = {x.n, x.c, x.h, x.w};
        Tensor y = Tensor::zeros(x.n, x.c, 1, 1);
        const std::size_t plane = x.plane();
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic) {
                const float* p = x.sample(in) + ic * plane;
                double sum = 0.0;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
                y.at(in, ic, 0, 0) = static_cast<float>(sum / plane);
            }
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = Tensor::zeros(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        const std::size_t plane = dx.plane();
        for (int in = 0; in < dx.n; ++in)
            for (int ic = 0; ic < dx.c; ++ic) {
                const float share = dy.at(in, ic, 0, 0) / static_cast<float>(plane);
                float* p = dx.sample(in) + ic * plane;
                std::fill(p, p + plane, share);
            }
        return dx;
    }

  private:
    std::array<int, 4> in_shape_{};
};

// A linear stack of layers sharing one forward/backward interface.
class Sequential final : public Layer {
  public:
    template <typename L, typename... Args> L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor forward(const Tensor& x, bool training) override {
        Tensor cur = x;
        for (auto& l : layers_) cur = l->forward(cur, training);
        return cur;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor cur = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }
    void collect_params(std::vector<Param*>& out) override {
        for (auto& l : layers_) l->collect_params(out);
    }
    void init(Rng& rng) override {
        for (auto& l : layers_) l->init(rng);
    }
    std::size_t size() const { return layers_.size(); }

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

inline float stable_sigmoid(float z) {
    if (z >= 0.f) return 1.f / (1.f + std::exp(-z));
    const float e = std::exp(z);
    return e / (1.f + e);
}

// Mean binary cross-entropy on logits; fills dlogits with the gradient.
inline double bce_with_logits(const Tensor& logits, const Tensor& targets, Tensor* dlogits) {
    require(logits.same_shape(targets), "bce_with_logits: shape mismatch");
    const double scale = 1.0 / static_cast<double>(logits.numel());
    double loss = 0.0;
    if (dlogits) *dlogits = Tensor::zeros(logits.n, logits.c, logits.h, logits.w);
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const float z = logits.v[i], t = targets.v[i];
        loss += std::max(z, 0.f) - z * t + std::log1p(std::exp(-std::abs(z)));
        if (dlogits) dlogits->v[i] = static_cast<float>((stable_sigmoid(z) - t) * scale);
    }
    return loss * scale;
}

// Mean categorical cross-entropy on [N,C,1,1] logits; fills dlogits.
inline double cce_with_logits(const Tensor& logits, const std::vector<int>& labels,
                              Tensor* dlogits) {
    require(logits.h == 1 && logits.w == 1, "cce_with_logits: expected [N,C,1,1] logits");
    require(static_cast<int>(labels.size()) == logits.n, "cce_with_logits: label count mismatch");
    const double scale = 1.0 / logits.n;
    double loss = 0.0;
    if (dlogits) *dlogits = Tensor::zeros(logits.n, logits.c, 1, 1);
    for (int in = 0; in < logits.n; ++in) {
        require(labels[in] >= 0 && labels[in] < logits.c, "cce_with_logits: label out of range");
        const float* z = logits.sample(in);
        float zmax = z[0];
        for (int c = 1; c < logits.c; ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (int c = 0; c < logits.c; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
        const double lse = zmax + std::log(sum);
        loss += lse - z[labels[in]];
        if (dlogits) {
            float* d = dlogits->sample(in);
            for (int c = 0; c < logits.c; ++c) {
                const double p = std::exp(static_cast<double>(z[c]) - lse);
                d[c] = static_cast<float>((p - (c == labels[in] ? 1.0 : 0.0)) * scale);
            }
        }
    }
    return loss * scale;
}

inline std::vector<double> softmax_row(const float* z, int c) {
    double zmax = z[0];
    for (int i = 1; i < c; ++i) zmax = std::max(zmax, static_cast<double>(z[i]));
    std::vector<double> p(c);
    double sum = 0.0;
    for (int i = 0; i < c; ++i) {
        p[i] = std::exp(static_cast<double>(z[i]) - zmax);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

} // namespace dropvision::nn
