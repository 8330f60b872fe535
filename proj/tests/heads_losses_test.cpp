#include <gtest/gtest.h>

#include <cmath>

#include "transdepth/grad_check.hpp"
#include "transdepth/heads.hpp"
#include "transdepth/losses.hpp"

using namespace td;

namespace {

Tensor randn(Shape s, uint64_t seed, double stddev = 1.0) {
    CounterRng rng(seed);
    std::vector<double> d(shape_numel(s));
    for (auto& v : d) v = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(s), std::move(d));
}

Tensor uniform_depth(Shape s, uint64_t seed, double lo = 0.5, double hi = 8.0) {
    CounterRng rng(seed);
    std::vector<double> d(shape_numel(s));
    for (auto& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(s), std::move(d));
}

Tensor all_valid(Shape s) { return Tensor::full(std::move(s), 1.0); }

}  // namespace

TEST(DepthHead, ZeroFinalConvGivesMidrangeDepth) {
    PredictionHead h = make_head(Task::depth, 8, 1, 0.1, 10.0, CounterRng(1));
    ParamList p;
    h.out_conv.register_params(p, "out");
    fill_params(p, 0.0);
    Tensor y = h(randn({1, 8, 4, 4}, 2), 8, 8);
    for (double v : y.data()) EXPECT_NEAR(v, 0.5 * (0.1 + 10.0), 1e-12);
}

TEST(DepthHead, OutputAlwaysInRange) {
    PredictionHead h = make_head(Task::depth, 8, 2, 0.1, 10.0, CounterRng(3));
    Tensor y = h(randn({2, 8, 4, 4}, 4, 5.0), 16, 16);
    for (double v : y.data()) {
        EXPECT_GT(v, 0.1);
        EXPECT_LT(v, 10.0);
    }
}

TEST(DepthHead, UnreachableTargetResolutionThrows) {
    PredictionHead h = make_head(Task::depth, 8, 2, 0.1, 10.0, CounterRng(5));
    EXPECT_THROW(h(randn({1, 8, 4, 4}, 6), 24, 24), ShapeError);
}

TEST(DepthHead, GradientCheck) {
    PredictionHead h = make_head(Task::depth, 4, 1, 0.1, 10.0, CounterRng(7));
    Tensor x = randn({1, 4, 2, 2}, 8);
    x.set_requires_grad(true);
    Tensor m = randn({1, 1, 4, 4}, 9, 0.5);
    ParamList params;
    h.register_params(params, "head");
    params.emplace_back("x", x);
    auto f = [&] { return sum_all(mul(h(x, 4, 4), m)); };
    GradCheckOptions opts;
    opts.max_coords_per_param = 16;
    GradReport r = grad_check(f, params, opts);
    EXPECT_LT(r.max_rel_error, 1e-6) << "worst: " << r.worst().first;
}

TEST(NormalHead, UnitNormOutputs) {
    PredictionHead h = make_head(Task::normals, 8, 2, 0.1, 10.0, CounterRng(10));
    Tensor y = h(randn({1, 8, 4, 4}, 11), 16, 16);
    const int64_t hw = 16 * 16;
    for (int64_t i = 0; i < hw; ++i) {
        double n = 0.0;
        for (int c = 0; c < 3; ++c) n += y.data()[c * hw + i] * y.data()[c * hw + i];
        EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    }
}

TEST(NormalHead, ConstantAxisVectorNormalizes) {
    PredictionHead h = make_head(Task::normals, 4, 1, 0.1, 10.0, CounterRng(12));
    ParamList p;
    h.out_conv.register_params(p, "out");
    fill_params(p, 0.0);
    h.out_conv.b.raw_data() = {0.0, 0.0, 2.5};  // pre-normalization (0,0,c)
    Tensor y = h(randn({1, 4, 2, 2}, 13), 4, 4);
    const int64_t hw = 16;
    for (int64_t i = 0; i < hw; ++i) {
        EXPECT_NEAR(y.data()[i], 0.0, 1e-12);
        EXPECT_NEAR(y.data()[hw + i], 0.0, 1e-12);
        EXPECT_NEAR(y.data()[2 * hw + i], 1.0, 1e-12);
    }
}

TEST(NormalHead, GradientCheck) {
    PredictionHead h = make_head(Task::normals, 4, 1, 0.1, 10.0, CounterRng(14));
    Tensor x = randn({1, 4, 2, 2}, 15);
    x.set_requires_grad(true);
    Tensor m = randn({1, 3, 4, 4}, 16, 0.5);
    ParamList params;
    h.register_params(params, "head");
    params.emplace_back("x", x);
    auto f = [&] { return sum_all(mul(h(x, 4, 4), m)); };
    GradCheckOptions opts;
    opts.max_coords_per_param = 16;
    GradReport r = grad_check(f, params, opts);
    EXPECT_LT(r.max_rel_error, 1e-6) << "worst: " << r.worst().first;
}

TEST(SilogLoss, PerfectPredictionIsZero) {
    Tensor gt = uniform_depth({1, 1, 4, 4}, 17);
    PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
    LossConfig cfg;
    EXPECT_EQ(silog_loss(gt, t, cfg).item(), 0.0);
}

TEST(SilogLoss, UniformLogOffset) {
    // g_i = c everywhere -> loss = alpha * |c| * sqrt(1 - lambda)
    Tensor gt = uniform_depth({1, 1, 3, 3}, 18);
    std::vector<double> pd = gt.data();
    for (auto& v : pd) v *= std::exp(0.1);
    Tensor pred = Tensor::from_data(gt.shape(), pd);
    PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
    LossConfig cfg;  // lambda 0.85, alpha 10
    EXPECT_NEAR(silog_loss(pred, t, cfg).item(), 0.3872983346207417, 1e-6);
}

TEST(SilogLoss, TwoPixelAntisymmetricCase) {
    // g = (0.1, -0.1): mean g^2 = 0.01, sum g = 0 -> loss = 10 * 0.1 = 1
    Tensor gt = Tensor::from_data({1, 1, 1, 2}, {2.0, 3.0});
    Tensor pred = Tensor::from_data({1, 1, 1, 2}, {2.0 * std::exp(0.1), 3.0 * std::exp(-0.1)});
    PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
    LossConfig cfg;
    EXPECT_NEAR(silog_loss(pred, t, cfg).item(), 1.0, 1e-12);
}

TEST(SilogLoss, NonPositivePredictionInValidRegionThrows) {
    Tensor gt = Tensor::full({1, 1, 1, 2}, 1.0);
    Tensor pred = Tensor::from_data({1, 1, 1, 2}, {1.0, -0.5});
    PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
    LossConfig cfg;
    EXPECT_THROW(silog_loss(pred, t, cfg), ValueError);
}

TEST(SilogLoss, MaskedPixelsDoNotContribute) {
    Tensor gt = Tensor::from_data({1, 1, 1, 4}, {1.0, 2.0, 3.0, 4.0});
    Tensor mask = Tensor::from_data({1, 1, 1, 4}, {1.0, 1.0, 0.0, 0.0});
    Tensor pred = Tensor::from_data({1, 1, 1, 4}, {1.0, 2.0, 9.9, 0.7});
    PixelTarget t = make_depth_target(gt, mask);
    EXPECT_EQ(t.valid_count, 2);
    LossConfig cfg;
    EXPECT_EQ(silog_loss(pred, t, cfg).item(), 0.0);
}

TEST(SilogLoss, RescaleInvarianceAtLambdaOne) {
    LossConfig cfg;
    cfg.lambda = 1.0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Tensor gt = uniform_depth({1, 1, 3, 3}, 700 + seed);
        Tensor pred = uniform_depth({1, 1, 3, 3}, 800 + seed);
        PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
        const double c = CounterRng(900 + seed).uniform(0.3, 3.0);
        std::vector<double> sd = pred.data();
        for (auto& v : sd) v *= c;
        Tensor scaled = Tensor::from_data(pred.shape(), sd);
        const double a = silog_loss(pred, t, cfg).item();
        const double b = silog_loss(scaled, t, cfg).item();
        ASSERT_NEAR(a, b, 1e-10);
    }
}

TEST(SilogLoss, NonNegativeAndZeroOnlyAtZeroResiduals) {
    LossConfig cfg;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Tensor gt = uniform_depth({1, 1, 2, 3}, 1100 + seed);
        Tensor pred = uniform_depth({1, 1, 2, 3}, 1200 + seed);
        PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
        const double l = silog_loss(pred, t, cfg).item();
        ASSERT_GE(l, 0.0);
        if (pred.data() != gt.data()) {
            ASSERT_GT(l, 0.0);
        }
    }
}

TEST(SilogLoss, GradientCheck) {
    Tensor gt = uniform_depth({1, 1, 3, 3}, 19);
    Tensor pred = uniform_depth({1, 1, 3, 3}, 20);
    pred.set_requires_grad(true);
    PixelTarget t = make_depth_target(gt, all_valid(gt.shape()));
    LossConfig cfg;
    auto f = [&] { return silog_loss(pred, t, cfg); };
    GradReport r = grad_check(f, {{"pred", pred}});
    EXPECT_LT(r.max_rel_error, 1e-6);
}

namespace {

Tensor unit_normals(Shape s, uint64_t seed) {
    CounterRng rng(seed);
    const int n = s[0], h = s[2], w = s[3];
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> d(static_cast<size_t>(n) * 3 * hw);
    for (int b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
            double v[3], nn = 0.0;
            for (auto& x : v) {
                x = rng.normal();
                nn += x * x;
            }
            nn = std::sqrt(nn) + 1e-12;
            for (int c = 0; c < 3; ++c) d[(static_cast<int64_t>(b) * 3 + c) * hw + i] = v[c] / nn;
        }
    return Tensor::from_data(s, std::move(d));
}

}  // namespace

TEST(AngularLoss, IdenticalFieldsHitClampFloor) {
    Tensor n = unit_normals({1, 3, 4, 4}, 21);
    PixelTarget t = make_normal_target(n, all_valid({1, 1, 4, 4}));
    const double floor = std::acos(1.0 - 1e-7);  // ~4.472e-4 rad
    EXPECT_NEAR(angular_loss(n, t).item(), floor, 1e-6);
}

TEST(AngularLoss, PerpendicularAndOpposite) {
    Tensor z = Tensor::zeros({1, 3, 2, 2});
    auto make_axis = [&](int axis, double sign) {
        std::vector<double> d(12, 0.0);
        for (int i = 0; i < 4; ++i) d[axis * 4 + i] = sign;
        return Tensor::from_data({1, 3, 2, 2}, d);
    };
    Tensor x = make_axis(0, 1.0), y = make_axis(1, 1.0), negx = make_axis(0, -1.0);
    PixelTarget t = make_normal_target(x, all_valid({1, 1, 2, 2}));
    EXPECT_NEAR(angular_loss(y, t).item(), 1.5707963267948966, 1e-12);
    EXPECT_NEAR(angular_loss(negx, t).item(), 3.1415926535897931, 1e-3);  // clamp keeps it just under pi
}

TEST(AngularLoss, ZeroValidPixelsThrows) {
    Tensor n = unit_normals({1, 3, 2, 2}, 22);
    Tensor mask = Tensor::zeros({1, 1, 2, 2});
    PixelTarget t;
    t.values = n;
    t.mask = mask;
    t.valid_count = 0;
    EXPECT_THROW(angular_loss(n, t), ValueError);
}

TEST(AngularLoss, GradientCheck) {
    Tensor gt = unit_normals({1, 3, 2, 2}, 23);
    Tensor pred = randn({1, 3, 2, 2}, 24, 0.7);
    pred.set_requires_grad(true);
    PixelTarget t = make_normal_target(gt, all_valid({1, 1, 2, 2}));
    auto f = [&] { return angular_loss(pred, t); };
    GradReport r = grad_check(f, {{"pred", pred}});
    EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(NormalTarget, RejectsUnnormalizedGroundTruth) {
    Tensor bad = Tensor::full({1, 3, 1, 1}, 1.0);  // norm sqrt(3)
    EXPECT_THROW(make_normal_target(bad, all_valid({1, 1, 1, 1})), ValueError);
}
