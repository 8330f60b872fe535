#include <gtest/gtest.h>

#include <cstring>
#include <numeric>

#include "transdepth/grad_check.hpp"
#include "transdepth/model.hpp"
#include "transdepth/transformer.hpp"

using namespace td;

namespace {

Tensor randn(Shape s, uint64_t seed, double stddev = 1.0) {
    CounterRng rng(seed);
    std::vector<double> d(shape_numel(s));
    for (auto& v : d) v = rng.normal(0.0, stddev);
    return Tensor::from_data(std::move(s), std::move(d));
}

Tensor permute_rows(const Tensor& z, const std::vector<int>& perm) {
    const int t = z.dim(0), c = z.dim(1);
    std::vector<double> d(static_cast<size_t>(t) * c);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < c; ++j) d[static_cast<size_t>(i) * c + j] = z.data()[static_cast<size_t>(perm[i]) * c + j];
    return Tensor::from_data({t, c}, std::move(d));
}

TransformerConfig small_cfg() {
    TransformerConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden = 8;
    cfg.num_heads = 2;
    cfg.head_dim = 4;
    cfg.mlp_ratio = 2.0;
    return cfg;
}

}  // namespace

TEST(PatchEmbed, P1IsPerPixelProjection) {
    TransformerConfig cfg = small_cfg();
    TransformerStack t = make_transformer(cfg, 4, CounterRng(1));
    Tensor f = randn({1, 4, 2, 2}, 2);
    TokenMatrix tm = t.patch_embed_single(f);
    ASSERT_EQ(tm.tokens.shape(), (Shape{4, 8}));
    // token (y,x) = W^T f[:,y,x] + b
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            for (int o = 0; o < 8; ++o) {
                double expect = t.embed.b.data()[o];
                for (int c = 0; c < 4; ++c)
                    expect += f.data()[(static_cast<size_t>(c) * 2 + y) * 2 + x] * t.embed.w.data()[static_cast<size_t>(c) * 8 + o];
                EXPECT_NEAR(tm.tokens.data()[(static_cast<size_t>(y) * 2 + x) * 8 + o], expect, 1e-12);
            }
        }
}

TEST(PatchEmbed, P2TokenCount) {
    TransformerConfig cfg = small_cfg();
    cfg.patch_kernel = 2;
    TransformerStack t = make_transformer(cfg, 3, CounterRng(3));
    TokenMatrix tm = t.patch_embed_single(randn({1, 3, 4, 4}, 4));
    EXPECT_EQ(tm.tokens.shape(), (Shape{4, 8}));
}

TEST(PatchEmbed, ZeroProjectionGivesZeroTokens) {
    TransformerConfig cfg = small_cfg();
    TransformerStack t = make_transformer(cfg, 4, CounterRng(5));
    ParamList p;
    t.embed.register_params(p, "embed");
    fill_params(p, 0.0);
    TokenMatrix tm = t.patch_embed_single(randn({1, 4, 2, 2}, 6));
    for (double v : tm.tokens.data()) EXPECT_EQ(v, 0.0);
}

TEST(PatchEmbed, IndivisibleDimsThrow) {
    TransformerConfig cfg = small_cfg();
    cfg.patch_kernel = 2;
    TransformerStack t = make_transformer(cfg, 3, CounterRng(3));
    EXPECT_THROW(t.patch_embed_single(randn({1, 3, 5, 4}, 4)), ShapeError);
}

TEST(AttentionHead, SingleTokenReturnsValue) {
    Tensor z = randn({1, 8}, 7);
    Tensor wq = randn({8, 4}, 8, 0.5), wk = randn({8, 4}, 9, 0.5), wv = randn({8, 4}, 10, 0.5);
    Tensor ah = attention_head(z, wq, wk, wv);
    Tensor v = matmul(z, wv);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(ah.data()[i], v.data()[i], 1e-14);
}

TEST(AttentionHead, ZeroQueryKeyGivesUniformAttention) {
    Tensor z = randn({5, 8}, 11);
    Tensor wq = Tensor::zeros({8, 4}), wk = Tensor::zeros({8, 4});
    Tensor wv = randn({8, 4}, 12, 0.5);
    Tensor ah = attention_head(z, wq, wk, wv);
    Tensor v = matmul(z, wv);
    for (int j = 0; j < 4; ++j) {
        double colmean = 0.0;
        for (int i = 0; i < 5; ++i) colmean += v.data()[static_cast<size_t>(i) * 4 + j];
        colmean /= 5.0;
        for (int i = 0; i < 5; ++i) EXPECT_NEAR(ah.data()[static_cast<size_t>(i) * 4 + j], colmean, 1e-13);
    }
}

TEST(AttentionHead, RowsSumToOne) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Tensor z = randn({4, 8}, 1000 + seed, 2.0);
        Tensor wq = randn({8, 4}, 2000 + seed, 0.7), wk = randn({8, 4}, 3000 + seed, 0.7);
        Tensor rows = attention_rows(z, wq, wk);
        for (int i = 0; i < 4; ++i) {
            double s = 0.0;
            for (int j = 0; j < 4; ++j) s += rows.data()[static_cast<size_t>(i) * 4 + j];
            ASSERT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Msa, ZeroOutputProjectionIsIdentity) {
    TransformerConfig cfg = small_cfg();
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(13));
    auto& wo = const_cast<Tensor&>(p.wo);
    std::fill(wo.raw_data().begin(), wo.raw_data().end(), 0.0);
    Tensor z = randn({4, 8}, 14);
    Tensor out = msa(z, p);
    EXPECT_EQ(out.data(), z.data());
}

TEST(Msa, PermutationEquivariance) {
    TransformerConfig cfg = small_cfg();
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(15));
    Tensor z = randn({4, 8}, 16);
    std::vector<int> perm{2, 0, 3, 1};
    Tensor a = msa(permute_rows(z, perm), p);
    Tensor b = permute_rows(msa(z, p), perm);
    for (int64_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-10);
}

TEST(Msa, SingleHeadReducesToAttentionPlusResidual) {
    TransformerConfig cfg = small_cfg();
    cfg.num_heads = 1;
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(17));
    Tensor z = randn({3, 8}, 18);
    Tensor expect = add(z, matmul(attention_head(z, p.heads[0].wq, p.heads[0].wk, p.heads[0].wv), p.wo));
    Tensor got = msa(z, p);
    EXPECT_EQ(got.data(), expect.data());
}

TEST(TransformerLayer, ZeroWeightsIsIdentity) {
    TransformerConfig cfg = small_cfg();
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(19));
    ParamList zeroed;
    register_param(zeroed, "wo", p.wo);
    p.mlp1.register_params(zeroed, "mlp1");
    p.mlp2.register_params(zeroed, "mlp2");
    fill_params(zeroed, 0.0);
    Tensor z = randn({4, 8}, 20);
    Tensor out = transformer_layer(z, p, false);
    EXPECT_EQ(out.data(), z.data());  // exact by double residual
}

TEST(TransformerLayer, PermutationEquivariance) {
    TransformerConfig cfg = small_cfg();
    for (uint64_t seed = 0; seed < 50; ++seed) {
        TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(100 + seed));
        Tensor z = randn({4, 8}, 200 + seed);
        std::vector<int> perm{3, 1, 0, 2};
        Tensor a = transformer_layer(permute_rows(z, perm), p, false);
        Tensor b = permute_rows(transformer_layer(z, p, false), perm);
        for (int64_t i = 0; i < a.numel(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], 1e-10);
    }
}

TEST(TransformerLayer, GradientCheck) {
    TransformerConfig cfg = small_cfg();
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(21));
    Tensor z = randn({3, 8}, 22);
    z.set_requires_grad(true);
    Tensor m = randn({3, 8}, 23, 0.5);
    ParamList params;
    p.register_params(params, "layer", false);
    params.emplace_back("z", z);
    auto f = [&] { return sum_all(mul(transformer_layer(z, p, false), m)); };
    GradReport r = grad_check(f, params);
    EXPECT_LT(r.max_rel_error, 1e-6) << "worst: " << r.worst().first;
}

TEST(TransformerLayer, PreLnVariantDiffersAndChecks) {
    TransformerConfig cfg = small_cfg();
    cfg.pre_ln = true;
    TransformerLayerParams p = make_transformer_layer(cfg, CounterRng(24));
    Tensor z = randn({3, 8}, 25);
    Tensor a = transformer_layer(z, p, true);
    Tensor b = transformer_layer(z, p, false);
    bool differs = false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) differs = true;
    EXPECT_TRUE(differs);
    z.set_requires_grad(true);
    ParamList params;
    p.register_params(params, "layer", true);
    params.emplace_back("z", z);
    Tensor m = randn({3, 8}, 26, 0.5);
    auto f = [&] { return sum_all(mul(transformer_layer(z, p, true), m)); };
    GradReport r = grad_check(f, params);
    EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(TokensToFeature, RoundTripAtP1WithIdentityProjection) {
    TransformerConfig cfg = small_cfg();
    cfg.hidden = 4;
    TransformerStack t = make_transformer(cfg, 4, CounterRng(27));
    // identity projection
    auto& w = t.embed.w.raw_data();
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < 4; ++i) w[static_cast<size_t>(i) * 4 + i] = 1.0;
    std::fill(t.embed.b.raw_data().begin(), t.embed.b.raw_data().end(), 0.0);
    Tensor f = randn({1, 4, 2, 3}, 28);
    TokenMatrix tm = t.patch_embed_single(f);
    Tensor back = tokens_to_feature(tm);
    EXPECT_EQ(back.data(), f.data());
}

TEST(TokensToFeature, OrderingContract) {
    // 4 tokens from a 2x2 grid land at their source coordinates
    Tensor z = Tensor::from_data({1, 4, 2}, {0, 1, 10, 11, 20, 21, 30, 31});
    Tensor fm = tokens_to_nchw(z, 2, 2);
    EXPECT_EQ(fm.shape(), (Shape{1, 2, 2, 2}));
    // channel 0 plane should be [[0,10],[20,30]]
    EXPECT_EQ(fm.data()[0], 0.0);
    EXPECT_EQ(fm.data()[1], 10.0);
    EXPECT_EQ(fm.data()[2], 20.0);
    EXPECT_EQ(fm.data()[3], 30.0);
}

TEST(TokensToFeature, ShapeContract) {
    Tensor z = randn({1, 16, 32}, 29);
    Tensor fm = tokens_to_nchw(z, 4, 4);
    EXPECT_EQ(fm.shape(), (Shape{1, 32, 4, 4}));
    EXPECT_THROW(tokens_to_nchw(z, 4, 3), ShapeError);
}

namespace {

ModelConfig toy_model_cfg() {
    ModelConfig cfg;
    cfg.backbone.stem_channels = 8;
    cfg.backbone.stage_channels = {8, 12, 16, 24, 32};
    cfg.transformer.num_layers = 2;
    cfg.transformer.hidden = 16;
    cfg.transformer.num_heads = 2;
    cfg.transformer.head_dim = 8;
    cfg.agd.common_width = 16;
    return cfg;
}

Tensor toy_image(int n, int h, int w, uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> d(static_cast<size_t>(n) * 3 * h * w);
    for (auto& v : d) v = rng.uniform();
    return Tensor::from_data({n, 3, h, w}, std::move(d));
}

}  // namespace

TEST(Encoder, DisabledTransformerEqualsPlainBackbone) {
    ModelConfig cfg = toy_model_cfg();
    cfg.transformer.enabled = false;
    TransDepthModel m = make_model(cfg, 31);
    Tensor img = toy_image(1, 64, 64, 32);
    FeaturePyramid pyr = m.encode(img);
    FeaturePyramid plain = m.backbone(img);
    for (int s = 1; s <= 5; ++s) EXPECT_EQ(pyr.scale(s).data(), plain.scale(s).data());
}

TEST(Encoder, ZeroLayersAlsoEqualsPlainBackbone) {
    ModelConfig cfg = toy_model_cfg();
    cfg.transformer.num_layers = 0;
    TransDepthModel m = make_model(cfg, 31);
    Tensor img = toy_image(1, 64, 64, 33);
    FeaturePyramid pyr = m.encode(img);
    FeaturePyramid plain = m.backbone(img);
    for (int s = 1; s <= 5; ++s) EXPECT_EQ(pyr.scale(s).data(), plain.scale(s).data());
}

TEST(Encoder, InsertionF5KeepsShape) {
    ModelConfig cfg = toy_model_cfg();
    TransDepthModel m = make_model(cfg, 34);
    FeaturePyramid pyr = m.encode(toy_image(1, 64, 64, 35));
    EXPECT_EQ(pyr.scale(5).shape(), (Shape{1, 32, 2, 2}));
    EXPECT_EQ(pyr.scale(4).shape(), (Shape{1, 24, 4, 4}));
}

TEST(Encoder, InsertionPointChangesF5) {
    ModelConfig cfg4 = toy_model_cfg();
    cfg4.transformer.insertion = Insertion::f4;
    ModelConfig cfg5 = toy_model_cfg();
    TransDepthModel m4 = make_model(cfg4, 36);
    TransDepthModel m5 = make_model(cfg5, 36);
    Tensor img = toy_image(1, 64, 64, 37);
    Tensor f5a = m4.encode(img).scale(5);
    Tensor f5b = m5.encode(img).scale(5);
    ASSERT_EQ(f5a.shape(), f5b.shape());
    bool differs = false;
    for (int64_t i = 0; i < f5a.numel(); ++i)
        if (f5a.data()[i] != f5b.data()[i]) differs = true;
    EXPECT_TRUE(differs);
    // f1..f3 are untouched by either insertion and must agree
    Tensor f3a = m4.encode(img).scale(3);
    Tensor f3b = m5.encode(img).scale(3);
    EXPECT_EQ(f3a.data(), f3b.data());
}
