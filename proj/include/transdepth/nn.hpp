#pragma once

// Parameter containers shared by the model modules: named registration for
// checkpointing/optimizers plus the init schemes used throughout.

#include <string>
#include <utility>
#include <vector>

#include "transdepth/ops.hpp"
#include "transdepth/rng.hpp"
#include "transdepth/tensor.hpp"

namespace td {

using ParamList = std::vector<std::pair<std::string, Tensor>>;

inline void register_param(ParamList& out, const std::string& name, const Tensor& t) {
    out.emplace_back(name, t);
}

inline Tensor randn_tensor(Shape shape, double stddev, CounterRng& rng) {
    int64_t n = shape_numel(shape);
    std::vector<double> d(n);
    for (int64_t i = 0; i < n; ++i) d[i] = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(shape), std::move(d));
}

struct Conv2dLayer {
    Tensor w;  // [O,C,k,k]
    Tensor b;  // [O]
    int stride = 1;
    int pad = 0;

    Tensor operator()(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }

    void register_params(ParamList& out, const std::string& prefix) const {
        register_param(out, prefix + ".weight", w);
        register_param(out, prefix + ".bias", b);
    }
};

// he: fan-in He-normal (relu convs); xavier: 1/fan_in normal (linear maps);
// zero: starts as the zero map.
enum class ConvInit { he, xavier, zero };

inline Conv2dLayer make_conv(int c_in, int c_out, int k, int stride, int pad, CounterRng rng,
                             ConvInit init = ConvInit::he) {
    Conv2dLayer l;
    const double fan_in = static_cast<double>(c_in) * k * k;
    const double stddev = init == ConvInit::he ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
    l.w = init == ConvInit::zero ? Tensor::zeros({c_out, c_in, k, k}) : randn_tensor({c_out, c_in, k, k}, stddev, rng);
    l.b = Tensor::zeros({c_out});
    l.w.set_requires_grad(true);
    l.b.set_requires_grad(true);
    l.stride = stride;
    l.pad = pad;
    return l;
}

struct LinearLayer {
    Tensor w;  // [C_in, C_out]
    Tensor b;  // [C_out]

    Tensor operator()(const Tensor& x) const { return linear(x, w, b); }

    void register_params(ParamList& out, const std::string& prefix) const {
        register_param(out, prefix + ".weight", w);
        register_param(out, prefix + ".bias", b);
    }
};

inline LinearLayer make_linear(int c_in, int c_out, CounterRng rng, double stddev = -1.0) {
    LinearLayer l;
    if (stddev < 0.0) stddev = std::sqrt(1.0 / c_in);
    l.w = stddev == 0.0 ? Tensor::zeros({c_in, c_out}) : randn_tensor({c_in, c_out}, stddev, rng);
    l.b = Tensor::zeros({c_out});
    l.w.set_requires_grad(true);
    l.b.set_requires_grad(true);
    return l;
}

struct LayerNormLayer {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-5;

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }

    void register_params(ParamList& out, const std::string& prefix) const {
        register_param(out, prefix + ".gamma", gamma);
        register_param(out, prefix + ".beta", beta);
    }
};

inline LayerNormLayer make_layer_norm(int c) {
    LayerNormLayer l;
    l.gamma = Tensor::full({c}, 1.0);
    l.beta = Tensor::zeros({c});
    l.gamma.set_requires_grad(true);
    l.beta.set_requires_grad(true);
    return l;
}

// Test/ablation helper: overwrite every listed parameter with a constant.
inline void fill_params(const ParamList& params, double value) {
    for (const auto& [name, t] : params) {
        auto& d = const_cast<Tensor&>(t).raw_data();
        std::fill(d.begin(), d.end(), value);
    }
}

}  // namespace td
