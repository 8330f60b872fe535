#pragma once

// Patch embedding into tokens, a stack of MSA+MLP layers without position
// embeddings, and recovery back to a feature map.
//
// The layer follows the composition z_l = MLP(LN(z')) + z' with
// z' = z_{l-1} + concat(AH_1..AH_m) * W_o, i.e. normalization only inside the
// MLP branch. `pre_ln` switches to the conventional pre-norm variant.

#include <string>
#include <vector>

#include "transdepth/nn.hpp"
#include "transdepth/ops.hpp"

namespace td {

enum class Insertion { f4, f5 };

inline Insertion parse_insertion(const std::string& s) {
    if (s == "f4") return Insertion::f4;
    if (s == "f5") return Insertion::f5;
    throw ConfigError("insertion must be 'f4' or 'f5', got '" + s + "'");
}

inline const char* insertion_name(Insertion i) { return i == Insertion::f4 ? "f4" : "f5"; }

struct TransformerConfig {
    bool enabled = true;
    int num_layers = 2;
    int hidden = 32;
    int num_heads = 4;
    int head_dim = 8;
    double mlp_ratio = 2.0;
    int patch_kernel = 1;
    Insertion insertion = Insertion::f5;
    bool pre_ln = false;

    void validate() const {
        if (num_layers < 0) throw ConfigError("transformer: num_layers must be >= 0");
        if (hidden < 1 || num_heads < 1 || head_dim < 1 || patch_kernel < 1)
            throw ConfigError("transformer: hidden/num_heads/head_dim/patch_kernel must be >= 1");
        if (mlp_ratio <= 0.0) throw ConfigError("transformer: mlp_ratio must be positive");
    }

    int mlp_hidden() const { return std::max(1, static_cast<int>(mlp_ratio * hidden)); }
};

// Token sequence of one image plus the source grid it came from. No position
// embedding is ever attached.
struct TokenMatrix {
    Tensor tokens;  // [N_tok, C]
    int origin_h = 0;
    int origin_w = 0;
    int patch = 1;
};

struct AttentionHeadParams {
    Tensor wq, wk, wv;  // [C, d]

    void register_params(ParamList& out, const std::string& prefix) const {
        register_param(out, prefix + ".wq", wq);
        register_param(out, prefix + ".wk", wk);
        register_param(out, prefix + ".wv", wv);
    }
};

struct TransformerLayerParams {
    std::vector<AttentionHeadParams> heads;
    Tensor wo;  // [m*d, C]
    LinearLayer mlp1, mlp2;
    LayerNormLayer ln;      // MLP-branch norm
    LayerNormLayer ln_pre;  // used only when pre_ln

    void register_params(ParamList& out, const std::string& prefix, bool pre_ln) const {
        for (size_t h = 0; h < heads.size(); ++h) heads[h].register_params(out, prefix + ".head" + std::to_string(h));
        register_param(out, prefix + ".wo", wo);
        mlp1.register_params(out, prefix + ".mlp1");
        mlp2.register_params(out, prefix + ".mlp2");
        ln.register_params(out, prefix + ".ln");
        if (pre_ln) ln_pre.register_params(out, prefix + ".ln_pre");
    }
};

// AH = softmax(Q K^T / sqrt(d)) V with Q,K,V = z Wq, z Wk, z Wv.
inline Tensor attention_head(const Tensor& z, const Tensor& wq, const Tensor& wk, const Tensor& wv) {
    const int d = wq.dim(1);
    Tensor q = matmul(z, wq);
    Tensor k = matmul(z, wk);
    Tensor v = matmul(z, wv);
    Tensor scores = scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    return matmul(softmax_last(scores), v);
}

// The attention rows of one head, for invariant checks.
inline Tensor attention_rows(const Tensor& z, const Tensor& wq, const Tensor& wk) {
    const int d = wk.dim(1);
    Tensor q = matmul(z, wq);
    Tensor k = matmul(z, wk);
    return softmax_last(scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(static_cast<double>(d))));
}

// concat(AH_1; ...; AH_m) W_o, heads in fixed order, no residual.
inline Tensor multihead_mix(const Tensor& z, const TransformerLayerParams& p) {
    std::vector<Tensor> outs;
    outs.reserve(p.heads.size());
    for (const auto& h : p.heads) outs.push_back(attention_head(z, h.wq, h.wk, h.wv));
    return matmul(concat(outs, 1), p.wo);
}

// MSA(z) = z + concat(AH_1..AH_m) W_o
inline Tensor msa(const Tensor& z, const TransformerLayerParams& p) { return add(z, multihead_mix(z, p)); }

inline Tensor mlp_block(const Tensor& x, const TransformerLayerParams& p) { return p.mlp2(gelu(p.mlp1(x))); }

inline Tensor transformer_layer(const Tensor& z, const TransformerLayerParams& p, bool pre_ln) {
    if (pre_ln) {
        Tensor zp = add(z, multihead_mix(p.ln_pre(z), p));
        return add(zp, mlp_block(p.ln(zp), p));
    }
    Tensor zp = msa(z, p);
    return add(zp, mlp_block(p.ln(zp), p));
}

struct TransformerStack {
    TransformerConfig cfg;
    LinearLayer embed;  // C_in * p^2 -> hidden
    std::vector<TransformerLayerParams> layers;

    // Strided p x p linear projection of the feature map into tokens,
    // flattened row-major (row, then column).
    TokenMatrix patch_embed_single(const Tensor& f) const {
        if (f.rank() != 4 || f.dim(0) != 1) throw ShapeError("patch_embed_single: [1,C,H,W] expected");
        const int p = cfg.patch_kernel;
        const int h = f.dim(2), w = f.dim(3);
        Tensor patches = space_to_patches(f, p);  // [1, T, C p^2]
        const int t = patches.dim(1), feat = patches.dim(2);
        TokenMatrix tm;
        tm.tokens = embed(reshape(patches, {t, feat}));
        tm.origin_h = h;
        tm.origin_w = w;
        tm.patch = p;
        return tm;
    }

    TokenMatrix run_layers(TokenMatrix tm) const {
        for (const auto& lp : layers) tm.tokens = transformer_layer(tm.tokens, lp, cfg.pre_ln);
        return tm;
    }

    void register_params(ParamList& out, const std::string& prefix) const {
        embed.register_params(out, prefix + ".embed");
        for (size_t l = 0; l < layers.size(); ++l)
            layers[l].register_params(out, prefix + ".layer" + std::to_string(l), cfg.pre_ln);
    }
};

// Inverse of the patch flattening: tokens back onto their source grid.
inline Tensor tokens_to_feature(const TokenMatrix& tm) {
    const int gh = tm.origin_h / tm.patch, gw = tm.origin_w / tm.patch;
    if (tm.tokens.dim(0) != gh * gw)
        throw ShapeError("tokens_to_feature: token count " + std::to_string(tm.tokens.dim(0)) +
                         " does not match origin grid " + std::to_string(gh) + "x" + std::to_string(gw));
    const int c = tm.tokens.dim(1);
    return tokens_to_nchw(reshape(tm.tokens, {1, gh * gw, c}), gh, gw);
}

inline TransformerLayerParams make_transformer_layer(const TransformerConfig& cfg, CounterRng rng) {
    TransformerLayerParams p;
    const int c = cfg.hidden, d = cfg.head_dim, m = cfg.num_heads;
    const double attn_std = std::sqrt(1.0 / c);
    for (int h = 0; h < m; ++h) {
        CounterRng hr = rng.split("head" + std::to_string(h));
        AttentionHeadParams hp;
        hp.wq = randn_tensor({c, d}, attn_std, hr);
        hp.wk = randn_tensor({c, d}, attn_std, hr);
        hp.wv = randn_tensor({c, d}, attn_std, hr);
        hp.wq.set_requires_grad(true);
        hp.wk.set_requires_grad(true);
        hp.wv.set_requires_grad(true);
        p.heads.push_back(std::move(hp));
    }
    CounterRng orng = rng.split("wo");
    p.wo = randn_tensor({m * d, c}, std::sqrt(1.0 / (m * d)), orng);
    p.wo.set_requires_grad(true);
    p.mlp1 = make_linear(c, cfg.mlp_hidden(), rng.split("mlp1"));
    p.mlp2 = make_linear(cfg.mlp_hidden(), c, rng.split("mlp2"));
    p.ln = make_layer_norm(c);
    p.ln_pre = make_layer_norm(c);
    return p;
}

inline TransformerStack make_transformer(const TransformerConfig& cfg, int c_in, CounterRng rng) {
    cfg.validate();
    TransformerStack t;
    t.cfg = cfg;
    const int feat = c_in * cfg.patch_kernel * cfg.patch_kernel;
    t.embed = make_linear(feat, cfg.hidden, rng.split("embed"));
    for (int l = 0; l < cfg.num_layers; ++l)
        t.layers.push_back(make_transformer_layer(cfg, rng.split("layer" + std::to_string(l))));
    return t;
}

}  // namespace td
