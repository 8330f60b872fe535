#pragma once

// Full model: hybrid CNN+transformer encoder, attention gate decoder, and a
// task head, assembled from one config and one seed.

#include <string>
#include <vector>

#include "transdepth/agd.hpp"
#include "transdepth/backbone.hpp"
#include "transdepth/heads.hpp"
#include "transdepth/losses.hpp"
#include "transdepth/transformer.hpp"

namespace td {

struct ModelConfig {
    Task task = Task::depth;
    BackboneConfig backbone;
    TransformerConfig transformer;
    AGDConfig agd;
    LossConfig loss;

    void validate() const {
        backbone.validate();
        transformer.validate();
        agd.validate();
        loss.validate();
    }
};

struct TransDepthModel {
    ModelConfig cfg;
    Backbone backbone;
    TransformerStack vit;
    Conv2dLayer vit_unembed;  // hidden -> insertion-stage width, 1x1
    AttentionGateDecoder agd;
    PredictionHead head;

    bool vit_active() const { return cfg.transformer.enabled && cfg.transformer.num_layers > 0; }

    // Patch-embeds one stage feature, runs the layer stack per sample, and
    // restores the stage's channel width (and spatial size when p > 1).
    Tensor transform_feature(const Tensor& f) const {
        const int n = f.dim(0), h = f.dim(2), w = f.dim(3);
        std::vector<Tensor> outs;
        outs.reserve(n);
        for (int i = 0; i < n; ++i) {
            TokenMatrix tm = vit.patch_embed_single(slice(f, 0, i, 1));
            tm = vit.run_layers(tm);
            outs.push_back(tokens_to_feature(tm));
        }
        Tensor recovered = n == 1 ? outs[0] : concat(outs, 0);
        if (cfg.transformer.patch_kernel > 1) recovered = bilinear_resize(recovered, h, w);
        return vit_unembed(recovered);
    }

    // Backbone pyramid with the transformer spliced in at the insertion
    // feature; with the transformer off this is the plain backbone output.
    FeaturePyramid encode(const Tensor& image) const {
        FeaturePyramid pyr;
        if (!vit_active()) {
            backbone.forward_stages(image, 5, pyr);
            return pyr;
        }
        if (cfg.transformer.insertion == Insertion::f5) {
            backbone.forward_stages(image, 5, pyr);
            pyr.f[4] = transform_feature(pyr.f[4]);
        } else {
            backbone.forward_stages(image, 4, pyr);
            pyr.f[3] = transform_feature(pyr.f[3]);
            backbone.forward_tail(4, pyr);
        }
        return pyr;
    }

    Tensor forward(const Tensor& image) const {
        FeaturePyramid pyr = encode(image);
        Tensor fused = agd(pyr);
        return head(fused, image.dim(2), image.dim(3));
    }

    Tensor loss(const Tensor& image, const PixelTarget& target) const {
        Tensor pred = forward(image);
        return cfg.task == Task::depth ? silog_loss(pred, target, cfg.loss) : angular_loss(pred, target);
    }

    ParamList parameters() const {
        ParamList out;
        backbone.register_params(out, "backbone");
        if (vit_active()) {
            vit.register_params(out, "vit");
            vit_unembed.register_params(out, "vit.unembed");
        }
        agd.register_params(out, "agd");
        head.register_params(out, "head");
        return out;
    }
};

inline TransDepthModel make_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    TransDepthModel m;
    m.cfg = cfg;
    CounterRng rng(seed);
    m.backbone = make_backbone(cfg.backbone, rng.split("backbone"));
    const int ins_stage = cfg.transformer.insertion == Insertion::f4 ? 4 : 5;
    const int ins_width = cfg.backbone.stage_channels[ins_stage - 1];
    if (m.vit_active()) {
        m.vit = make_transformer(cfg.transformer, ins_width, rng.split("vit"));
        m.vit_unembed = make_conv(cfg.transformer.hidden, ins_width, 1, 1, 0, rng.split("vit_unembed"), ConvInit::xavier);
    }
    m.agd = make_agd(cfg.agd, cfg.backbone.stage_channels, rng.split("agd"));
    m.head = make_head(cfg.task, cfg.agd.fused_channels(), cfg.agd.receiving_scale, cfg.loss.min_depth,
                       cfg.loss.max_depth, rng.split("head"));
    return m;
}

}  // namespace td
