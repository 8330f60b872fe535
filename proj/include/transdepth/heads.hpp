#pragma once

// Prediction heads: a shared upsampling trunk (bilinear x2 -> 3x3 conv ->
// relu per block) with a sigmoid-bounded depth output or an L2-normalized
// 3-channel normal output.

#include <string>
#include <vector>

#include "transdepth/nn.hpp"
#include "transdepth/ops.hpp"

namespace td {

enum class Task { depth, normals };

inline Task parse_task(const std::string& s) {
    if (s == "depth") return Task::depth;
    if (s == "normals") return Task::normals;
    throw ConfigError("task must be 'depth' or 'normals', got '" + s + "'");
}

inline const char* task_name(Task t) { return t == Task::depth ? "depth" : "normals"; }

struct PredictionHead {
    Task task = Task::depth;
    double min_depth = 0.1;
    double max_depth = 10.0;
    std::vector<Conv2dLayer> blocks;  // one conv per x2 upsample
    Conv2dLayer out_conv;             // 1x1 to 1 (depth) or 3 (normals) channels

    Tensor operator()(const Tensor& fused, int target_h, int target_w) const {
        Tensor h = fused;
        for (const auto& conv : blocks) {
            h = bilinear_resize(h, h.dim(2) * 2, h.dim(3) * 2);
            h = relu(conv(h));
        }
        if (h.dim(2) != target_h || h.dim(3) != target_w)
            throw ShapeError("head: cannot reach target resolution " + std::to_string(target_h) + "x" +
                             std::to_string(target_w) + " from " + std::to_string(fused.dim(2)) + "x" +
                             std::to_string(fused.dim(3)) + " with " + std::to_string(blocks.size()) + " upsamples");
        Tensor y = out_conv(h);
        if (task == Task::depth) return add_scalar(scale(sigmoid(y), max_depth - min_depth), min_depth);
        // per-pixel normalization; the 1e-8 floor keeps the map defined at 0
        Tensor sq = sum_axis(mul(y, y), 1);
        Tensor norm = clamp_min(sqrt(sq), 1e-8);
        return div(y, norm);
    }

    void register_params(ParamList& out, const std::string& prefix) const {
        for (size_t i = 0; i < blocks.size(); ++i) blocks[i].register_params(out, prefix + ".up" + std::to_string(i));
        out_conv.register_params(out, prefix + ".out");
    }
};

inline PredictionHead make_head(Task task, int c_in, int n_upsamples, double min_depth, double max_depth,
                                CounterRng rng) {
    if (n_upsamples < 1) throw ConfigError("head: needs at least one upsample block");
    PredictionHead h;
    h.task = task;
    h.min_depth = min_depth;
    h.max_depth = max_depth;
    int c = c_in;
    for (int i = 0; i < n_upsamples; ++i) {
        // stay wide while the grid is coarse; edge positions are decoded from
        // the fused features there, the last blocks only refine locally
        const int c_next = i + 2 < n_upsamples ? 48 : (i + 1 < n_upsamples ? 32 : 16);
        h.blocks.push_back(make_conv(c, c_next, 3, 1, 1, rng.split("up" + std::to_string(i))));
        c = c_next;
    }
    h.out_conv = make_conv(c, task == Task::depth ? 1 : 3, 1, 1, 0, rng.split("out"), ConvInit::xavier);
    return h;
}

}  // namespace td
