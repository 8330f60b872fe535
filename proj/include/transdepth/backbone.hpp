#pragma once

// Toy residual convolutional encoder producing the five-scale feature
// pyramid f1..f5 at strides 2..32. Normalization-free; downsampling is a
// bilinear halving (exactly a 2x2 mean at even sizes) followed by stride-1
// convs, since the conv op requires exactly divisible output sizes.

#include <array>
#include <string>
#include <vector>

#include "transdepth/nn.hpp"
#include "transdepth/ops.hpp"

namespace td {

struct BackboneConfig {
    int stem_channels = 16;
    std::array<int, 5> stage_channels{16, 32, 64, 128, 256};
    std::array<int, 5> blocks_per_stage{1, 1, 1, 1, 1};

    void validate() const {
        if (stem_channels <= 0) throw ConfigError("backbone: stem_channels must be positive");
        for (int c : stage_channels)
            if (c <= 0) throw ConfigError("backbone: stage channels must be positive");
        for (int b : blocks_per_stage)
            if (b <= 0) throw ConfigError("backbone: blocks_per_stage must be positive");
    }
};

struct FeaturePyramid {
    std::array<Tensor, 5> f;  // f[s-1] has stride 2^s

    const Tensor& scale(int s) const {
        if (s < 1 || s > 5) throw ShapeError("pyramid scale must lie in 1..5");
        return f[s - 1];
    }
};

// out = relu(conv2(relu(conv1(y))) + shortcut(y)) where y is x, halved first
// when the block downsamples. conv2 starts at zero so a fresh block is
// relu(shortcut(x)).
struct ResidualBlock {
    Conv2dLayer conv1;
    Conv2dLayer conv2;
    Conv2dLayer proj;  // 1x1 shortcut, present iff channel change or downsample
    bool has_proj = false;
    bool downsample = false;

    Tensor operator()(const Tensor& x) const {
        Tensor y = x;
        if (downsample) {
            const int h = x.dim(2), w = x.dim(3);
            if (h % 2 != 0 || w % 2 != 0) throw ShapeError("residual block: cannot halve odd spatial dims");
            y = bilinear_resize(x, h / 2, w / 2);
        }
        Tensor h = conv2(relu(conv1(y)));
        Tensor s = has_proj ? proj(y) : y;
        return relu(add(h, s));
    }

    void register_params(ParamList& out, const std::string& prefix) const {
        conv1.register_params(out, prefix + ".conv1");
        conv2.register_params(out, prefix + ".conv2");
        if (has_proj) proj.register_params(out, prefix + ".proj");
    }
};

inline ResidualBlock make_residual_block(int c_in, int c_out, bool downsample, CounterRng rng) {
    ResidualBlock b;
    b.downsample = downsample;
    b.conv1 = make_conv(c_in, c_out, 3, 1, 1, rng.split("conv1"));
    b.conv2 = make_conv(c_out, c_out, 3, 1, 1, rng.split("conv2"), ConvInit::zero);
    b.has_proj = (c_in != c_out) || downsample;
    if (b.has_proj) b.proj = make_conv(c_in, c_out, 1, 1, 0, rng.split("proj"));
    return b;
}

struct Backbone {
    BackboneConfig cfg;
    Conv2dLayer stem;  // 3 -> stem_channels, same resolution
    std::array<std::vector<ResidualBlock>, 5> stages;

    // Runs stem + stages [1, upto]; fills pyramid entries 1..upto.
    void forward_stages(const Tensor& image, int upto, FeaturePyramid& pyr) const {
        if (image.rank() != 4 || image.dim(1) != 3) throw ShapeError("backbone: expected [N,3,H,W] input");
        const int h = image.dim(2), w = image.dim(3);
        if (h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0)
            throw ShapeError("backbone: input dims must be positive multiples of 32, got " + std::to_string(h) + "x" +
                             std::to_string(w));
        Tensor x = relu(stem(image));
        for (int s = 0; s < upto; ++s) {
            for (const auto& blk : stages[s]) x = blk(x);
            pyr.f[s] = x;
        }
    }

    // Continues from the pyramid entry `from` through the remaining stages.
    void forward_tail(int from, FeaturePyramid& pyr) const {
        Tensor x = pyr.f[from - 1];
        for (int s = from; s < 5; ++s) {
            for (const auto& blk : stages[s]) x = blk(x);
            pyr.f[s] = x;
        }
    }

    FeaturePyramid operator()(const Tensor& image) const {
        FeaturePyramid pyr;
        forward_stages(image, 5, pyr);
        return pyr;
    }

    void register_params(ParamList& out, const std::string& prefix) const {
        stem.register_params(out, prefix + ".stem");
        for (int s = 0; s < 5; ++s)
            for (size_t b = 0; b < stages[s].size(); ++b)
                stages[s][b].register_params(out, prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b));
    }
};

inline Backbone make_backbone(const BackboneConfig& cfg, CounterRng rng) {
    cfg.validate();
    Backbone bb;
    bb.cfg = cfg;
    bb.stem = make_conv(3, cfg.stem_channels, 3, 1, 1, rng.split("stem"));
    int c_in = cfg.stem_channels;
    for (int s = 0; s < 5; ++s) {
        CounterRng srng = rng.split("stage" + std::to_string(s + 1));
        for (int b = 0; b < cfg.blocks_per_stage[s]; ++b) {
            const int c_out = cfg.stage_channels[s];
            bb.stages[s].push_back(make_residual_block(c_in, c_out, b == 0, srng.split(static_cast<uint64_t>(b))));
            c_in = c_out;
        }
    }
    return bb;
}

}  // namespace td
