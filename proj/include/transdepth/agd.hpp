#pragma once

// Attention Gate Decoder: per-position latent kernels predicted from the
// features, a spatial-softmax + channel-sigmoid gated attention tensor, and
// channel-concatenated multi-scale fusion into the receiving feature.
//
// Kernel maps are k^2-channel per-position gates applied as shifted products;
// the default k=1 is a plain broadcast multiply over channels.

#include <string>
#include <vector>

#include "transdepth/backbone.hpp"
#include "transdepth/nn.hpp"
#include "transdepth/ops.hpp"

namespace td {

enum class MessageSource { emit, receive };

inline MessageSource parse_message_source(const std::string& s) {
    if (s == "emit") return MessageSource::emit;
    if (s == "receive") return MessageSource::receive;
    throw ConfigError("message_source must be 'emit' or 'receive', got '" + s + "'");
}

inline const char* message_source_name(MessageSource m) { return m == MessageSource::emit ? "emit" : "receive"; }

struct AGDConfig {
    bool enabled = true;
    int receiving_scale = 5;
    std::vector<int> emitting_scales{3, 4, 5};
    int common_width = 32;
    int kernel_size = 1;
    MessageSource message_source = MessageSource::emit;

    void validate() const {
        if (receiving_scale < 1 || receiving_scale > 5) throw ConfigError("agd: receiving_scale must lie in 1..5");
        if (common_width < 1) throw ConfigError("agd: common_width must be >= 1");
        if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("agd: kernel_size must be odd and >= 1");
        if (enabled && emitting_scales.empty()) throw ConfigError("agd: emitting_scales must be nonempty when enabled");
        for (size_t i = 0; i < emitting_scales.size(); ++i) {
            int s = emitting_scales[i];
            if (s < 1 || s > 5) throw ConfigError("agd: emitting scale out of 1..5");
            if (i > 0 && emitting_scales[i - 1] >= s) throw ConfigError("agd: emitting_scales must be strictly ascending");
        }
    }

    int fused_channels() const { return enabled ? common_width * static_cast<int>(emitting_scales.size()) : common_width; }
};

// L, I_{r->e}, I_{e->r} on the receiving grid, one k^2-channel map each.
struct LatentKernels {
    Tensor l;
    Tensor i_r_to_e;
    Tensor i_e_to_r;
};

struct AttentionMaps {
    Tensor a;         // [N, C_r, H_r, W_r]
    Tensor a_sp;      // spatial logits [N, 1, H_r, W_r]
    Tensor sp_gate;   // softmax over positions, sums to 1 per sample
    Tensor ch_gate;   // sigmoid channel gate [N, C_r, 1, 1]
    Tensor alpha;     // gated attention tensor
};

// Applies a per-position k x k kernel map to f: sum over taps of
// map[tap] * shift(f). k=1 reduces to broadcast elementwise multiply.
inline Tensor apply_local_kernel(const Tensor& kernel_map, const Tensor& f, int k) {
    if (k == 1) return mul(f, kernel_map);
    const int r = k / 2;
    Tensor acc;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const int tap = (dy + r) * k + (dx + r);
            Tensor term = mul(spatial_shift(f, dy, dx), slice(kernel_map, 1, tap, 1));
            acc = acc.defined() ? add(acc, term) : term;
        }
    return acc;
}

struct AGDScaleParams {
    Conv2dLayer emit_proj;    // C_i -> C_r, 1x1
    Conv2dLayer kernel_l;     // 2 C_r -> k^2, 1x1 over concat(f_e, f_r)
    Conv2dLayer kernel_i_re;  // C_r -> k^2 from f_e
    Conv2dLayer kernel_i_er;  // C_r -> k^2 from f_r
    Conv2dLayer gate_sp;      // C_r -> 1
    LinearLayer gate_ch;      // C_r -> C_r after global average pool

    void register_params(ParamList& out, const std::string& prefix) const {
        emit_proj.register_params(out, prefix + ".emit_proj");
        kernel_l.register_params(out, prefix + ".kernel_l");
        kernel_i_re.register_params(out, prefix + ".kernel_i_re");
        kernel_i_er.register_params(out, prefix + ".kernel_i_er");
        gate_sp.register_params(out, prefix + ".gate_sp");
        gate_ch.register_params(out, prefix + ".gate_ch");
    }
};

struct AttentionGateDecoder {
    AGDConfig cfg;
    Conv2dLayer recv_proj;  // C_recv -> C_r, 1x1
    std::vector<AGDScaleParams> scales;  // parallel to cfg.emitting_scales

    // 1x1-projects the receiving feature to the common width.
    Tensor project_receiving(const FeaturePyramid& pyr) const { return recv_proj(pyr.scale(cfg.receiving_scale)); }

    // Projects one emitting feature to the common width and aligns it to the
    // receiving grid.
    Tensor align_emitter(const FeaturePyramid& pyr, size_t idx, const Tensor& f_r) const {
        const Tensor& fe = pyr.scale(cfg.emitting_scales[idx]);
        Tensor p = scales[idx].emit_proj(fe);
        return bilinear_resize(p, f_r.dim(2), f_r.dim(3));
    }

    LatentKernels latent_kernels(const Tensor& f_e, const Tensor& f_r, size_t idx) const {
        const auto& sp = scales[idx];
        LatentKernels k;
        k.l = sp.kernel_l(concat({f_e, f_r}, 1));
        k.i_r_to_e = sp.kernel_i_re(f_e);
        k.i_e_to_r = sp.kernel_i_er(f_r);
        return k;
    }

    // A = I_{e->r} * f_r + I_{r->e} * f_e + f_r . (L * f_e)
    Tensor integrated_attention(const Tensor& f_e, const Tensor& f_r, const LatentKernels& k) const {
        const int ks = cfg.kernel_size;
        Tensor a = add(apply_local_kernel(k.i_e_to_r, f_r, ks), apply_local_kernel(k.i_r_to_e, f_e, ks));
        return add(a, mul(f_r, apply_local_kernel(k.l, f_e, ks)));
    }

    // alpha = softmax_positions(A_sp) . sigmoid(A_ch) . A
    AttentionMaps attention_gate(const Tensor& a, size_t idx) const {
        const auto& sp = scales[idx];
        AttentionMaps m;
        m.a = a;
        m.a_sp = sp.gate_sp(a);
        const int n = a.dim(0), h = a.dim(2), w = a.dim(3);
        m.sp_gate = reshape(softmax_last(reshape(m.a_sp, {n, h * w})), {n, 1, h, w});
        Tensor pooled = reshape(global_avg_pool(a), {n, a.dim(1)});
        m.ch_gate = reshape(sigmoid(sp.gate_ch(pooled)), {n, a.dim(1), 1, 1});
        m.alpha = mul(mul(m.sp_gate, m.ch_gate), a);
        return m;
    }

    // One fusion slot: (L * f_source) . alpha + f_r
    Tensor fuse_slot(const FeaturePyramid& pyr, const Tensor& f_r, size_t idx) const {
        Tensor f_e = align_emitter(pyr, idx, f_r);
        LatentKernels k = latent_kernels(f_e, f_r, idx);
        Tensor a = integrated_attention(f_e, f_r, k);
        AttentionMaps m = attention_gate(a, idx);
        const Tensor& source = cfg.message_source == MessageSource::emit ? f_e : f_r;
        Tensor message = apply_local_kernel(k.l, source, cfg.kernel_size);
        return add(mul(message, m.alpha), f_r);
    }

    // Channel concatenation of all slots in configured (ascending) order.
    Tensor fuse(const FeaturePyramid& pyr) const {
        if (!cfg.enabled) throw ConfigError("agd: fuse called while disabled");
        Tensor f_r = project_receiving(pyr);
        std::vector<Tensor> slots;
        slots.reserve(scales.size());
        for (size_t i = 0; i < scales.size(); ++i) slots.push_back(fuse_slot(pyr, f_r, i));
        return concat(slots, 1);
    }

    // Baseline path: the projected receiving feature only.
    Tensor bypass(const FeaturePyramid& pyr) const { return project_receiving(pyr); }

    Tensor operator()(const FeaturePyramid& pyr) const { return cfg.enabled ? fuse(pyr) : bypass(pyr); }

    void register_params(ParamList& out, const std::string& prefix) const {
        recv_proj.register_params(out, prefix + ".recv_proj");
        for (size_t i = 0; i < scales.size(); ++i)
            scales[i].register_params(out, prefix + ".scale" + std::to_string(cfg.emitting_scales[i]));
    }

    // Zeroes the kernel- and gate-predicting parameters, keeping the width
    // projections; every fused slot then equals the projected f_r exactly.
    void zero_fusion_params() {
        for (auto& sp : scales) {
            ParamList l;
            sp.kernel_l.register_params(l, "l");
            sp.kernel_i_re.register_params(l, "re");
            sp.kernel_i_er.register_params(l, "er");
            sp.gate_sp.register_params(l, "sp");
            sp.gate_ch.register_params(l, "ch");
            fill_params(l, 0.0);
        }
    }
};

inline AttentionGateDecoder make_agd(const AGDConfig& cfg, const std::array<int, 5>& stage_channels, CounterRng rng) {
    cfg.validate();
    AttentionGateDecoder agd;
    agd.cfg = cfg;
    const int cr = cfg.common_width;
    const int k2 = cfg.kernel_size * cfg.kernel_size;
    agd.recv_proj = make_conv(stage_channels[cfg.receiving_scale - 1], cr, 1, 1, 0, rng.split("recv_proj"), ConvInit::xavier);
    for (int s : cfg.emitting_scales) {
        CounterRng sr = rng.split("scale" + std::to_string(s));
        AGDScaleParams sp;
        sp.emit_proj = make_conv(stage_channels[s - 1], cr, 1, 1, 0, sr.split("emit_proj"), ConvInit::xavier);
        sp.kernel_l = make_conv(2 * cr, k2, 1, 1, 0, sr.split("kernel_l"), ConvInit::xavier);
        sp.kernel_i_re = make_conv(cr, k2, 1, 1, 0, sr.split("kernel_i_re"), ConvInit::xavier);
        sp.kernel_i_er = make_conv(cr, k2, 1, 1, 0, sr.split("kernel_i_er"), ConvInit::xavier);
        sp.gate_sp = make_conv(cr, 1, 1, 1, 0, sr.split("gate_sp"), ConvInit::xavier);
        sp.gate_ch = make_linear(cr, cr, sr.split("gate_ch"));
        agd.scales.push_back(std::move(sp));
    }
    return agd;
}

}  // namespace td
