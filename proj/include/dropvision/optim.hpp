#pragma once

#include <cmath>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/layers.hpp"

namespace dropvision::nn {

class Optimizer {
  public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<Param*>& params) = 0;
};

class Adam final : public Optimizer {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        require(lr > 0.0, "Adam: learning rate must be positive");
    }

    void step(const std::vector<Param*>& params) override {
        ensure_state(params);
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Param& p = *params[pi];
            if (!p.trainable) continue;
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (std::size_t i = 0; i < p.numel(); ++i) {
                const double g = p.g[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                const double mh = m[i] / bc1;
                const double vh = v[i] / bc2;
                p.w[i] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

  private:
    void ensure_state(const std::vector<Param*>& params) {
        if (!m_.empty()) {
            require(m_.size() == params.size(), "Adam: parameter set changed between steps");
            return;
        }
        for (const Param* p : params) {
            m_.emplace_back(p->numel(), 0.0);
            v_.emplace_back(p->numel(), 0.0);
        }
    }

    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

class RMSprop final : public Optimizer {
  public:
    explicit RMSprop(double lr, double rho = 0.9, double eps = 1e-7)
        : lr_(lr), rho_(rho), eps_(eps) {
        require(lr > 0.0, "RMSprop: learning rate must be positive");
    }

    void step(const std::vector<Param*>& params) override {
        ensure_state(params);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Param& p = *params[pi];
            if (!p.trainable) continue;
            auto& v = v_[pi];
            for (std::size_t i = 0; i < p.numel(); ++i) {
                const double g = p.g[i];
                v[i] = rho_ * v[i] + (1.0 - rho_) * g * g;
                p.w[i] -= static_cast<float>(lr_ * g / (std::sqrt(v[i]) + eps_));
            }
        }
    }

  private:
    void ensure_state(const std::vector<Param*>& params) {
        if (!v_.empty()) {
            require(v_.size() == params.size(), "RMSprop: parameter set changed between steps");
            return;
        }
        for (const Param* p : params) v_.emplace_back(p->numel(), 0.0);
    }

    double lr_, rho_, eps_;
    std::vector<std::vector<double>> v_;
};

} // namespace dropvision::nn
