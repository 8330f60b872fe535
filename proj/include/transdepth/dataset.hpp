#pragma once

// Dataset assembly: in-memory synthetic scenes or paired files from disk.
//
// Directory conventions:
//  - kitti_png16: image_####.png (8-bit RGB) with depth_####.png (16-bit
//    grayscale, meters = raw/256, raw 0 = invalid).
//  - npy_like_raw: image_####.raw / depth_####.raw, each "TDRW" + u32
//    channels + u32 height + u32 width + little-endian f32 planar payload;
//    depth values <= 0 are invalid.
// Pairs are center-cropped to multiples of 32.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "transdepth/heads.hpp"
#include "transdepth/png_io.hpp"
#include "transdepth/synth.hpp"
#include "transdepth/tensor.hpp"

namespace td {

struct Sample {
    Tensor image;    // [3,H,W]
    Tensor depth;    // [1,H,W]; undefined for normals-only data
    Tensor normals;  // [3,H,W]; undefined for depth-only data
    Tensor mask;     // [1,H,W] of 0/1
};

struct Dataset {
    std::vector<Sample> samples;

    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    int height() const { return samples.at(0).image.dim(1); }
    int width() const { return samples.at(0).image.dim(2); }
};

inline Dataset synth_dataset(uint64_t seed, int n, int h, int w) {
    Dataset ds;
    for (auto& scene : synth_generate(seed, n, h, w)) {
        Sample s;
        s.image = std::move(scene.image);
        s.depth = std::move(scene.depth);
        s.normals = std::move(scene.normals);
        s.mask = Tensor::full({1, h, w}, 1.0);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

enum class IngestConvention { kitti_png16, npy_like_raw };

inline IngestConvention parse_convention(const std::string& s) {
    if (s == "kitti_png16") return IngestConvention::kitti_png16;
    if (s == "npy_like_raw") return IngestConvention::npy_like_raw;
    throw ConfigError("convention must be 'kitti_png16' or 'npy_like_raw', got '" + s + "'");
}

namespace detail {

inline Tensor center_crop(const Tensor& t, int ch, int cw) {
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    const int y0 = (h - ch) / 2, x0 = (w - cw) / 2;
    std::vector<double> out(static_cast<size_t>(c) * ch * cw);
    const auto& d = t.data();
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < ch; ++y)
            std::copy(d.begin() + (static_cast<size_t>(cc) * h + y0 + y) * w + x0,
                      d.begin() + (static_cast<size_t>(cc) * h + y0 + y) * w + x0 + cw,
                      out.begin() + (static_cast<size_t>(cc) * ch + y) * cw);
    return Tensor::from_data({c, ch, cw}, std::move(out));
}

// "TDRW" u32 channels, u32 h, u32 w, f32 planar payload.
inline Tensor read_raw_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[4];
    uint32_t dims[3];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in || std::memcmp(magic, "TDRW", 4) != 0) throw IoError("'" + path + "' is not a TDRW raw tensor");
    const int64_t n = static_cast<int64_t>(dims[0]) * dims[1] * dims[2];
    if (n <= 0 || n > (1ll << 31)) throw IoError("'" + path + "' has an implausible header");
    std::vector<float> payload(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(payload.data()), n * static_cast<int64_t>(sizeof(float)));
    if (!in) throw IoError("'" + path + "' is truncated");
    std::vector<double> d(payload.begin(), payload.end());
    return Tensor::from_data({static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])},
                             std::move(d));
}

inline void write_raw_tensor(const std::string& path, const Tensor& t) {
    if (t.rank() != 3) throw ShapeError("write_raw_tensor: rank-3 tensor expected");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create '" + path + "'");
    const uint32_t dims[3] = {static_cast<uint32_t>(t.dim(0)), static_cast<uint32_t>(t.dim(1)),
                              static_cast<uint32_t>(t.dim(2))};
    out.write("TDRW", 4);
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    std::vector<float> payload(t.data().begin(), t.data().end());
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace detail

inline Dataset ingest_directory(const std::string& path, IngestConvention convention) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(path)) throw IoError("'" + path + "' is not a directory");
    const std::string ext = convention == IngestConvention::kitti_png16 ? ".png" : ".raw";
    std::vector<std::string> image_stems, depth_stems;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() <= 6 + ext.size() || name.substr(name.size() - ext.size()) != ext) continue;
        if (name.rfind("image_", 0) == 0) image_stems.push_back(name.substr(6, name.size() - 6 - ext.size()));
        if (name.rfind("depth_", 0) == 0) depth_stems.push_back(name.substr(6, name.size() - 6 - ext.size()));
    }
    std::sort(image_stems.begin(), image_stems.end());
    std::sort(depth_stems.begin(), depth_stems.end());
    std::string unmatched;
    for (const auto& s : image_stems)
        if (!std::binary_search(depth_stems.begin(), depth_stems.end(), s)) unmatched += " image_" + s;
    for (const auto& s : depth_stems)
        if (!std::binary_search(image_stems.begin(), image_stems.end(), s)) unmatched += " depth_" + s;
    if (!unmatched.empty()) throw IoError("unmatched stems in '" + path + "':" + unmatched);
    if (image_stems.empty()) throw IoError("no image_*/depth_* pairs found in '" + path + "'");

    Dataset ds;
    for (const auto& stem : image_stems) {
        const std::string ipath = path + "/image_" + stem + ext;
        const std::string dpath = path + "/depth_" + stem + ext;
        Sample s;
        Tensor depth, mask;
        if (convention == IngestConvention::kitti_png16) {
            s.image = read_png_rgb8(ipath);
            auto [d, m] = read_png_depth16(dpath);
            depth = d;
            mask = m;
        } else {
            s.image = detail::read_raw_tensor(ipath);
            if (s.image.dim(0) != 3) throw IoError("'" + ipath + "' must have 3 channels");
            Tensor draw = detail::read_raw_tensor(dpath);
            if (draw.dim(0) != 1) throw IoError("'" + dpath + "' must have 1 channel");
            std::vector<double> dv = draw.data(), mv(dv.size());
            for (size_t i = 0; i < dv.size(); ++i) {
                mv[i] = dv[i] > 0.0 ? 1.0 : 0.0;
                if (dv[i] <= 0.0) dv[i] = 0.0;
            }
            depth = Tensor::from_data(draw.shape(), std::move(dv));
            mask = Tensor::from_data(draw.shape(), std::move(mv));
        }
        if (depth.dim(1) != s.image.dim(1) || depth.dim(2) != s.image.dim(2))
            throw IoError("image/depth size mismatch for stem '" + stem + "'");
        const int ch = (s.image.dim(1) / 32) * 32, cw = (s.image.dim(2) / 32) * 32;
        if (ch == 0 || cw == 0) throw IoError("pair '" + stem + "' smaller than 32x32");
        s.image = detail::center_crop(s.image, ch, cw);
        s.depth = detail::center_crop(depth, ch, cw);
        s.mask = detail::center_crop(mask, ch, cw);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace td
