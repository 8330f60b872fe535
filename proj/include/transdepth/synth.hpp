#pragma once

// Synthetic scene generator: a background tilted plane plus 1-3 axis-aligned
// boxes, each carrying its own (gentler) tilted front face. Depth and normals
// are analytically consistent: for z(x,y) = d0 + a(x-cx) + b(y-cy) the unit
// normal is (-a, -b, 1)/|.| with slopes in meters per pixel and +z toward
// the camera. Shading is Lambertian with per-region albedo plus seeded noise.
//
// Scene i of seed s draws every value from CounterRng(s).split("scene").split(i),
// so generation is a pure function of (seed, index, h, w).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "transdepth/rng.hpp"
#include "transdepth/tensor.hpp"

namespace td {

struct SynthScene {
    Tensor image;    // [3,H,W] in [0,1]
    Tensor depth;    // [1,H,W] meters
    Tensor normals;  // [3,H,W] unit vectors
    std::vector<int> region;  // H*W region ids (0 = background plane)
};

namespace detail {

struct PlanePatch {
    double d0, a, b;  // z = d0 + a*(x-cx) + b*(y-cy)
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double depth_at(double u, double v) const { return d0 + a * u + b * v; }
};

}  // namespace detail

inline SynthScene synth_scene(uint64_t seed, int index, int h, int w) {
    if (h % 32 != 0 || w % 32 != 0 || h <= 0 || w <= 0)
        throw ShapeError("synth: dims must be positive multiples of 32");
    CounterRng rng = CounterRng(seed).split("scene").split(static_cast<uint64_t>(index));
    const double cx = 0.5 * w, cy = 0.5 * h;
    const double half_diag = 0.5 * (h + w);

    detail::PlanePatch bg;
    bg.d0 = rng.uniform(4.5, 7.0);
    // keep the full plane inside [1.5, 9.2] m
    const double max_slope = 1.8 / half_diag;
    bg.a = rng.uniform(-max_slope, max_slope);
    bg.b = rng.uniform(-max_slope, max_slope);

    const int n_boxes = 1 + static_cast<int>(rng.index(3));
    std::vector<detail::PlanePatch> boxes;
    for (int bi = 0; bi < n_boxes; ++bi) {
        detail::PlanePatch box;
        const int bw = w / 8 + static_cast<int>(rng.index(static_cast<uint64_t>(w / 3)));
        const int bh = h / 8 + static_cast<int>(rng.index(static_cast<uint64_t>(h / 3)));
        box.x0 = static_cast<int>(rng.index(static_cast<uint64_t>(w - bw)));
        box.y0 = static_cast<int>(rng.index(static_cast<uint64_t>(h - bh)));
        box.x1 = box.x0 + bw;
        box.y1 = box.y0 + bh;
        // strictly in front of the background over its whole rectangle
        const double gap = rng.uniform(0.8, 2.5);
        const double slope_cap = 0.25 / half_diag;
        box.a = rng.uniform(-slope_cap, slope_cap);
        box.b = rng.uniform(-slope_cap, slope_cap);
        double bg_min = 1e300;
        for (int corner = 0; corner < 4; ++corner) {
            const double u = (corner & 1 ? box.x1 - 1 : box.x0) - cx;
            const double v = (corner & 2 ? box.y1 - 1 : box.y0) - cy;
            bg_min = std::min(bg_min, bg.depth_at(u, v));
        }
        box.d0 = std::max(1.2, bg_min - gap);
        boxes.push_back(box);
    }

    // the closest surface wins where boxes overlap
    std::vector<double> depth(static_cast<size_t>(h) * w);
    std::vector<int> region(static_cast<size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = x - cx, v = y - cy;
            double z = bg.depth_at(u, v);
            int id = 0;
            for (size_t bi = 0; bi < boxes.size(); ++bi) {
                const auto& bx = boxes[bi];
                if (x >= bx.x0 && x < bx.x1 && y >= bx.y0 && y < bx.y1) {
                    const double zb = bx.depth_at(u, v);
                    if (zb < z) {
                        z = zb;
                        id = static_cast<int>(bi) + 1;
                    }
                }
            }
            depth[static_cast<size_t>(y) * w + x] = z;
            region[static_cast<size_t>(y) * w + x] = id;
        }

    std::vector<double> normals(static_cast<size_t>(3) * h * w);
    const int64_t hw = static_cast<int64_t>(h) * w;
    auto plane_of = [&](int id) -> const detail::PlanePatch& { return id == 0 ? bg : boxes[id - 1]; };
    for (int64_t i = 0; i < hw; ++i) {
        const auto& p = plane_of(region[i]);
        const double inv = 1.0 / std::sqrt(p.a * p.a + p.b * p.b + 1.0);
        normals[i] = -p.a * inv;
        normals[hw + i] = -p.b * inv;
        normals[2 * hw + i] = inv;
    }

    // per-region albedo, fixed light, ambient + diffuse, seeded noise
    std::vector<std::array<double, 3>> albedo(boxes.size() + 1);
    for (auto& a : albedo)
        for (auto& c : a) c = rng.uniform(0.2, 0.95);
    const double lx = 0.408248290463863, ly = -0.408248290463863, lz = 0.816496580927726;
    std::vector<double> image(static_cast<size_t>(3) * h * w);
    for (int64_t i = 0; i < hw; ++i) {
        const double lambert =
            std::max(0.0, normals[i] * lx + normals[hw + i] * ly + normals[2 * hw + i] * lz);
        const auto& a = albedo[static_cast<size_t>(region[i])];
        for (int c = 0; c < 3; ++c) {
            double v = a[static_cast<size_t>(c)] * (0.25 + 0.75 * lambert) + 0.01 * rng.normal();
            image[c * hw + i] = std::min(1.0, std::max(0.0, v));
        }
    }

    SynthScene scene;
    scene.image = Tensor::from_data({3, h, w}, std::move(image));
    scene.depth = Tensor::from_data({1, h, w}, std::move(depth));
    scene.normals = Tensor::from_data({3, h, w}, std::move(normals));
    scene.region = std::move(region);
    return scene;
}

inline std::vector<SynthScene> synth_generate(uint64_t seed, int n, int h, int w) {
    std::vector<SynthScene> scenes;
    scenes.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) scenes.push_back(synth_scene(seed, i, h, w));
    return scenes;
}

}  // namespace td
