#include <gtest/gtest.h>

#include <cstring>

#include "transdepth/agd.hpp"
#include "transdepth/grad_check.hpp"

using namespace td;

namespace {

Tensor randn(Shape s, uint64_t seed, double stddev = 1.0) {
    CounterRng rng(seed);
    std::vector<double> d(shape_numel(s));
    for (auto& v : d) v = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(s), std::move(d));
}

constexpr std::array<int, 5> kStageChannels{8, 12, 16, 24, 32};

FeaturePyramid toy_pyramid(uint64_t seed, int base = 32, double stddev = 1.0) {
    FeaturePyramid pyr;
    for (int s = 1; s <= 5; ++s) {
        const int hw = base >> s;
        pyr.f[s - 1] = randn({1, kStageChannels[s - 1], hw, hw}, seed * 10 + s, stddev);
    }
    return pyr;
}

AGDConfig toy_cfg() {
    AGDConfig cfg;
    cfg.common_width = 8;
    return cfg;
}

}  // namespace

TEST(AlignEmitters, SameScaleKeepsGrid) {
    AGDConfig cfg = toy_cfg();
    cfg.emitting_scales = {5};
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(1));
    FeaturePyramid pyr = toy_pyramid(2);
    Tensor f_r = agd.project_receiving(pyr);
    Tensor f_e = agd.align_emitter(pyr, 0, f_r);
    EXPECT_EQ(f_e.shape(), f_r.shape());
}

TEST(AlignEmitters, CoarserGridFromFiner) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(3));
    FeaturePyramid pyr = toy_pyramid(4, 256);  // f3 at 32x32, f5 at 8x8
    Tensor f_r = agd.project_receiving(pyr);
    Tensor f_e = agd.align_emitter(pyr, 0, f_r);  // emitting scale 3
    EXPECT_EQ(f_e.shape(), (Shape{1, 8, 8, 8}));
}

TEST(AlignEmitters, ZeroProjectionOfConstantStaysConstant) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(5));
    ParamList p;
    agd.scales[0].emit_proj.register_params(p, "proj");
    fill_params(p, 0.0);
    FeaturePyramid pyr = toy_pyramid(6);
    pyr.f[2] = Tensor::full({1, kStageChannels[2], 4, 4}, 3.25);
    Tensor f_r = agd.project_receiving(pyr);
    Tensor f_e = agd.align_emitter(pyr, 0, f_r);
    for (double v : f_e.data()) EXPECT_EQ(v, 0.0);
}

TEST(LatentKernels, AllZeroParamsGiveZeroMaps) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(7));
    agd.zero_fusion_params();
    FeaturePyramid pyr = toy_pyramid(8);
    Tensor f_r = agd.project_receiving(pyr);
    Tensor f_e = agd.align_emitter(pyr, 0, f_r);
    LatentKernels k = agd.latent_kernels(f_e, f_r, 0);
    for (double v : k.l.data()) EXPECT_EQ(v, 0.0);
    for (double v : k.i_r_to_e.data()) EXPECT_EQ(v, 0.0);
    for (double v : k.i_e_to_r.data()) EXPECT_EQ(v, 0.0);
}

TEST(LatentKernels, BiasPassthrough) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(9));
    ParamList p;
    agd.scales[0].kernel_l.register_params(p, "l");
    fill_params(p, 0.0);
    auto& bias = agd.scales[0].kernel_l.b.raw_data();
    std::fill(bias.begin(), bias.end(), 2.5);
    FeaturePyramid pyr = toy_pyramid(10);
    Tensor f_r = agd.project_receiving(pyr);
    Tensor f_e = agd.align_emitter(pyr, 0, f_r);
    LatentKernels k = agd.latent_kernels(f_e, f_r, 0);
    for (double v : k.l.data()) EXPECT_EQ(v, 2.5);
}

TEST(LatentKernels, GradientCheck) {
    AGDConfig cfg = toy_cfg();
    cfg.common_width = 4;
    cfg.emitting_scales = {4, 5};
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(11));
    Tensor f_e = randn({1, 4, 2, 2}, 12);
    Tensor f_r = randn({1, 4, 2, 2}, 13);
    f_e.set_requires_grad(true);
    f_r.set_requires_grad(true);
    Tensor m = randn({1, 1, 2, 2}, 14, 0.5);
    ParamList params;
    agd.scales[0].kernel_l.register_params(params, "kernel_l");
    agd.scales[0].kernel_i_re.register_params(params, "kernel_i_re");
    agd.scales[0].kernel_i_er.register_params(params, "kernel_i_er");
    params.emplace_back("f_e", f_e);
    params.emplace_back("f_r", f_r);
    auto f = [&] {
        LatentKernels k = agd.latent_kernels(f_e, f_r, 0);
        return sum_all(mul(add(k.l, add(k.i_r_to_e, k.i_e_to_r)), m));
    };
    GradReport r = grad_check(f, params);
    EXPECT_LT(r.max_rel_error, 1e-6) << "worst: " << r.worst().first;
}

TEST(IntegratedAttention, ZeroKernelsGiveZero) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(15));
    Tensor f_e = randn({1, 8, 2, 2}, 16), f_r = randn({1, 8, 2, 2}, 17);
    LatentKernels k{Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2})};
    Tensor a = agd.integrated_attention(f_e, f_r, k);
    for (double v : a.data()) EXPECT_EQ(v, 0.0);
}

TEST(IntegratedAttention, TermIsolation) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(18));
    Tensor f_e = randn({1, 8, 2, 2}, 19), f_r = randn({1, 8, 2, 2}, 20);
    // I_{e->r} == 1, rest zero -> A = f_r
    LatentKernels k1{Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2}), Tensor::full({1, 1, 2, 2}, 1.0)};
    Tensor a1 = agd.integrated_attention(f_e, f_r, k1);
    EXPECT_EQ(a1.data(), f_r.data());
    // f_r = f_e = 1, L = 1, I = 0 -> A = 1
    Tensor ones = Tensor::full({1, 8, 2, 2}, 1.0);
    LatentKernels k2{Tensor::full({1, 1, 2, 2}, 1.0), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 2})};
    Tensor a2 = agd.integrated_attention(ones, ones, k2);
    for (double v : a2.data()) EXPECT_EQ(v, 1.0);
}

TEST(AttentionGate, ZeroAttentionGivesZeroAlpha) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(21));
    AttentionMaps m = agd.attention_gate(Tensor::zeros({1, 8, 2, 2}), 0);
    for (double v : m.alpha.data()) EXPECT_EQ(v, 0.0);
}

TEST(AttentionGate, ConstantLogitsGiveUniformSpatialGate) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(22));
    ParamList p;
    agd.scales[0].gate_sp.register_params(p, "sp");
    fill_params(p, 0.0);  // zero weights + zero bias -> constant logits
    AttentionMaps m = agd.attention_gate(randn({1, 8, 4, 4}, 23), 0);
    for (double v : m.sp_gate.data()) EXPECT_NEAR(v, 1.0 / 16.0, 1e-15);
}

TEST(AttentionGate, SpatialGateSumsToOne) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(24));
    for (uint64_t seed = 0; seed < 100; ++seed) {
        AttentionMaps m = agd.attention_gate(randn({2, 8, 3, 5}, 600 + seed, 2.0), 0);
        for (int n = 0; n < 2; ++n) {
            double s = 0.0;
            for (int i = 0; i < 15; ++i) s += m.sp_gate.data()[static_cast<size_t>(n) * 15 + i];
            ASSERT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(AttentionGate, ChannelGateStrictlyInsideUnitInterval) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(25));
    AttentionMaps m = agd.attention_gate(randn({1, 8, 4, 4}, 26, 3.0), 0);
    for (double v : m.ch_gate.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(AgdFuse, ZeroFusionParamsYieldStackedReceiving) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(27));
    agd.zero_fusion_params();
    FeaturePyramid pyr = toy_pyramid(28);
    Tensor f_r = agd.project_receiving(pyr);
    Tensor fused = agd.fuse(pyr);
    ASSERT_EQ(fused.shape(), (Shape{1, 24, 1, 1}));
    const int64_t slot = f_r.numel();
    for (int s = 0; s < 3; ++s)
        EXPECT_EQ(0, std::memcmp(fused.data().data() + s * slot, f_r.data().data(), sizeof(double) * slot));
}

TEST(AgdFuse, AllParamsZeroYieldStackedZeros) {
    AGDConfig cfg = toy_cfg();
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(29));
    ParamList p;
    agd.register_params(p, "agd");
    fill_params(p, 0.0);
    FeaturePyramid pyr = toy_pyramid(30);
    Tensor fused = agd.fuse(pyr);
    for (double v : fused.data()) EXPECT_EQ(v, 0.0);
}

TEST(AgdFuse, SingleScaleAtReceivingWithZeroKernelsIsReceiving) {
    AGDConfig cfg = toy_cfg();
    cfg.emitting_scales = {5};
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(31));
    agd.zero_fusion_params();
    FeaturePyramid pyr = toy_pyramid(32);
    Tensor fused = agd.fuse(pyr);
    Tensor f_r = agd.project_receiving(pyr);
    EXPECT_EQ(fused.data(), f_r.data());
}

TEST(AgdFuse, FusedChannelCount) {
    AGDConfig cfg;
    cfg.common_width = 32;
    EXPECT_EQ(cfg.fused_channels(), 96);
    cfg.enabled = false;
    EXPECT_EQ(cfg.fused_channels(), 32);
}

TEST(AgdFuse, MonotoneConfigContract) {
    AGDConfig small = toy_cfg();
    AGDConfig big = toy_cfg();
    big.emitting_scales = {2, 3, 4, 5};
    // identical seeds give identical parameters for the shared scales
    AttentionGateDecoder a_small = make_agd(small, kStageChannels, CounterRng(33));
    AttentionGateDecoder a_big = make_agd(big, kStageChannels, CounterRng(33));
    FeaturePyramid pyr = toy_pyramid(34);
    Tensor f_small = a_small.fuse(pyr);
    Tensor f_big = a_big.fuse(pyr);
    const int64_t slot = static_cast<int64_t>(small.common_width) * f_small.dim(2) * f_small.dim(3);
    // big config slots: scale2 (new), then 3,4,5 matching the small config
    for (int s = 0; s < 3; ++s)
        EXPECT_EQ(0, std::memcmp(f_small.data().data() + s * slot, f_big.data().data() + (s + 1) * slot,
                                 sizeof(double) * slot));
}

TEST(AgdBypass, ProjectedReceivingOnly) {
    AGDConfig cfg = toy_cfg();
    cfg.enabled = false;
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(35));
    FeaturePyramid pyr = toy_pyramid(36);
    Tensor out = agd(pyr);
    EXPECT_EQ(out.shape(), (Shape{1, 8, 1, 1}));
    EXPECT_EQ(out.data(), agd.project_receiving(pyr).data());
}

TEST(AgdBypass, IndependentOfEmittingConfigAndMatchesZeroInitSlots) {
    AGDConfig cfg_a = toy_cfg();
    cfg_a.enabled = false;
    cfg_a.emitting_scales = {5};
    AGDConfig cfg_b = toy_cfg();
    cfg_b.enabled = false;
    cfg_b.emitting_scales = {3, 4, 5};
    AttentionGateDecoder a = make_agd(cfg_a, kStageChannels, CounterRng(37));
    AttentionGateDecoder b = make_agd(cfg_b, kStageChannels, CounterRng(37));
    FeaturePyramid pyr = toy_pyramid(38);
    EXPECT_EQ(a(pyr).data(), b(pyr).data());
    // bypass equals every slot of the zero-fusion AGD
    AGDConfig cfg_c = toy_cfg();
    AttentionGateDecoder c = make_agd(cfg_c, kStageChannels, CounterRng(37));
    c.zero_fusion_params();
    Tensor fused = c.fuse(pyr);
    Tensor bypassed = a(pyr);
    EXPECT_EQ(0, std::memcmp(fused.data().data(), bypassed.data().data(), sizeof(double) * bypassed.numel()));
}

TEST(ApplyLocalKernel, CenterTapEqualsBroadcastMultiply) {
    Tensor f = randn({1, 4, 3, 3}, 39);
    Tensor map1 = randn({1, 1, 3, 3}, 40);
    // k=3 map with only the center tap populated
    std::vector<double> m9(static_cast<size_t>(9) * 9, 0.0);
    for (int i = 0; i < 9; ++i) m9[static_cast<size_t>(4) * 9 + i] = map1.data()[i];
    Tensor map9 = Tensor::from_data({1, 9, 3, 3}, m9);
    Tensor a = apply_local_kernel(map1, f, 1);
    Tensor b = apply_local_kernel(map9, f, 3);
    for (int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(AgdFull, GradientCheckThroughFusion) {
    AGDConfig cfg = toy_cfg();
    cfg.common_width = 4;
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(41));
    FeaturePyramid pyr = toy_pyramid(42, 64);  // receiving grid 2x2
    for (int s = 3; s <= 5; ++s) const_cast<Tensor&>(pyr.scale(s)).set_requires_grad(true);
    ParamList params;
    agd.register_params(params, "agd");
    params.emplace_back("f3", pyr.scale(3));
    params.emplace_back("f4", pyr.scale(4));
    params.emplace_back("f5", pyr.scale(5));
    Tensor m = randn({1, 12, 2, 2}, 43, 0.5);
    auto f = [&] { return sum_all(mul(agd.fuse(pyr), m)); };
    GradCheckOptions opts;
    opts.max_coords_per_param = 10;
    GradReport r = grad_check(f, params, opts);
    EXPECT_LT(r.max_rel_error, 1e-5) << "worst: " << r.worst().first;
}

TEST(AgdFull, GradientCheckWithWideKernels) {
    AGDConfig cfg = toy_cfg();
    cfg.common_width = 4;
    cfg.kernel_size = 3;
    cfg.emitting_scales = {4, 5};
    AttentionGateDecoder agd = make_agd(cfg, kStageChannels, CounterRng(44));
    // moderate feature scale keeps the 9-tap attention logits unsaturated, so
    // finite differences can still resolve the gate gradients
    FeaturePyramid pyr = toy_pyramid(45, 96, 0.5);  // receiving grid 3x3
    ParamList params;
    agd.register_params(params, "agd");
    Tensor m = randn({1, 8, 3, 3}, 46, 0.5);
    auto f = [&] { return sum_all(mul(agd.fuse(pyr), m)); };
    GradCheckOptions opts;
    opts.max_coords_per_param = 8;
    GradReport r = grad_check(f, params, opts);
    EXPECT_LT(r.max_rel_error, 1e-5) << "worst: " << r.worst().first;
    EXPECT_GT(r.coords_checked, 0);
}

TEST(AgdFuse, MessageSourceSwitchChangesOutput) {
    AGDConfig ce = toy_cfg();
    AGDConfig cr = toy_cfg();
    cr.message_source = MessageSource::receive;
    AttentionGateDecoder ae = make_agd(ce, kStageChannels, CounterRng(47));
    AttentionGateDecoder ar = make_agd(cr, kStageChannels, CounterRng(47));
    FeaturePyramid pyr = toy_pyramid(48);
    Tensor oe = ae.fuse(pyr);
    Tensor orr = ar.fuse(pyr);
    bool differs = false;
    for (int64_t i = 0; i < oe.numel(); ++i)
        if (oe.data()[i] != orr.data()[i]) differs = true;
    EXPECT_TRUE(differs);
}
