#pragma once

// Adam with decoupled weight decay: the decay is applied directly to the
// parameters, not through the gradient.

#include <cmath>
#include <vector>

#include "transdepth/nn.hpp"

namespace td {

class AdamW {
public:
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void step(const ParamList& params) {
        if (m_.empty()) {
            for (const auto& [name, t] : params) {
                m_.emplace_back(t.numel(), 0.0);
                v_.emplace_back(t.numel(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw ValueError("adamw: parameter list changed between steps");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Tensor param = params[pi].second;
            if (!param.has_grad()) continue;
            const auto& g = param.grad();
            auto& w = param.raw_data();
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < w.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w[i]);
            }
        }
    }

    void zero_grad(const ParamList& params) const {
        for (const auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
    }

private:
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace td
