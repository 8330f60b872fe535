#pragma once

// Depth loss: L = alpha * sqrt( (1/T) sum g_i^2 - (lambda/T^2) (sum g_i)^2 )
// with g_i = log(pred_i) - log(gt_i) over valid pixels. The radicand is
// non-negative analytically for lambda <= 1 but may dip below zero by
// rounding; it is clamped at 0 with zero gradient there.
//
// Normal loss: mean over valid pixels of arccos(<pred, gt>) with the dot
// clamped to +-(1 - 1e-7), bounding the arccos gradient at the cost of a
// ~4.47e-4 rad floor.

#include <cmath>

#include "transdepth/ops.hpp"
#include "transdepth/tensor.hpp"

namespace td {

struct LossConfig {
    double lambda = 0.85;
    double alpha = 10.0;
    double min_depth = 0.1;
    double max_depth = 10.0;

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("loss: lambda must lie in [0,1]");
        if (alpha <= 0.0) throw ConfigError("loss: alpha must be positive");
        if (!(0.0 < min_depth && min_depth < max_depth)) throw ConfigError("loss: need 0 < min_depth < max_depth");
    }
};

// Ground truth plus validity mask. `values` carries 1.0 (depth) or an
// arbitrary unit vector (normals) at invalid pixels so log/acos stay defined;
// the mask zeroes those contributions.
struct PixelTarget {
    Tensor values;  // [N,1,H,W] depth or [N,3,H,W] normals, constant
    Tensor mask;    // [N,1,H,W] of 0/1, constant
    int64_t valid_count = 0;
};

inline PixelTarget make_depth_target(const Tensor& gt, const Tensor& mask) {
    if (gt.rank() != 4 || gt.dim(1) != 1) throw ShapeError("depth target: [N,1,H,W] expected");
    if (mask.shape() != gt.shape()) throw ShapeError("depth target: mask shape mismatch");
    PixelTarget t;
    std::vector<double> v = gt.data();
    const auto& m = mask.data();
    int64_t count = 0;
    for (size_t i = 0; i < v.size(); ++i) {
        if (m[i] != 0.0) {
            if (v[i] <= 0.0) throw ValueError("depth target: non-positive ground truth at a valid pixel");
            ++count;
        } else {
            v[i] = 1.0;
        }
    }
    t.values = Tensor::from_data(gt.shape(), std::move(v));
    t.mask = mask;
    t.valid_count = count;
    return t;
}

inline PixelTarget make_normal_target(const Tensor& gt, const Tensor& mask) {
    if (gt.rank() != 4 || gt.dim(1) != 3) throw ShapeError("normal target: [N,3,H,W] expected");
    if (mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(0) != gt.dim(0) || mask.dim(2) != gt.dim(2) ||
        mask.dim(3) != gt.dim(3))
        throw ShapeError("normal target: mask must be [N,1,H,W]");
    const int n = gt.dim(0), h = gt.dim(2), w = gt.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const auto& g = gt.data();
    const auto& m = mask.data();
    int64_t count = 0;
    for (int b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            if (m[b * hw + i] == 0.0) continue;
            double nrm = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double v = g[(static_cast<int64_t>(b) * 3 + c) * hw + i];
                nrm += v * v;
            }
            if (std::abs(std::sqrt(nrm) - 1.0) > 1e-6)
                throw ValueError("normal target: ground truth not unit-normalized at a valid pixel");
            ++count;
        }
    PixelTarget t;
    t.values = gt;
    t.mask = mask;
    t.valid_count = count;
    return t;
}

inline Tensor silog_loss(const Tensor& pred, const PixelTarget& target, const LossConfig& cfg) {
    cfg.validate();
    if (pred.shape() != target.values.shape()) throw ShapeError("silog: pred/gt shape mismatch");
    if (target.valid_count < 1) throw ValueError("silog: no valid pixels");
    const auto& pd = pred.data();
    const auto& md = target.mask.data();
    for (size_t i = 0; i < pd.size(); ++i)
        if (md[i] != 0.0 && pd[i] <= 0.0) throw ValueError("silog: non-positive prediction at a valid pixel");
    const double t = static_cast<double>(target.valid_count);
    // replace masked-out predictions with 1 so the log stays defined
    Tensor pred_safe = add(mul(pred, target.mask), add_scalar(neg(target.mask), 1.0));
    Tensor g = sub(log(pred_safe), log(target.values));
    Tensor gm = mul(g, target.mask);
    Tensor s1 = sum_all(gm);
    Tensor s2 = sum_all(mul(gm, gm));
    Tensor radicand = sub(scale(s2, 1.0 / t), scale(mul(s1, s1), cfg.lambda / (t * t)));
    return scale(sqrt_scalar(radicand), cfg.alpha);
}

inline constexpr double kAngularClamp = 1.0 - 1e-7;

inline Tensor angular_loss(const Tensor& pred, const PixelTarget& target) {
    if (pred.shape() != target.values.shape()) throw ShapeError("angular: pred/gt shape mismatch");
    if (target.valid_count < 1) throw ValueError("angular: no valid pixels");
    Tensor dot = sum_axis(mul(pred, target.values), 1);  // [N,1,H,W]
    Tensor ang = acos(clamp(dot, -kAngularClamp, kAngularClamp));
    return scale(sum_all(mul(ang, target.mask)), 1.0 / static_cast<double>(target.valid_count));
}

}  // namespace td
