#pragma once

// PNG reading/writing via libpng. Images are 8-bit RGB scaled to [0,1];
// depth maps follow the KITTI convention: 16-bit grayscale, value =
// round(meters * 256), raw 0 = invalid pixel.

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "transdepth/tensor.hpp"

namespace td {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

// Reads an 8-bit PNG as [3,H,W] in [0,1]; palette/gray/alpha are expanded.
inline Tensor read_png_rgb8(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    buf.resize(static_cast<size_t>(h) * w * 3);
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::vector<double> out(static_cast<size_t>(3) * h * w);
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) out[c * hw + i] = buf[static_cast<size_t>(i) * 3 + c] / 255.0;
    return Tensor::from_data({3, h, w}, std::move(out));
}

inline void write_png_rgb8(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_png_rgb8: [3,H,W] expected");
    const int h = image.dim(1), w = image.dim(2);
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot create '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    std::vector<png_byte> buf(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const auto& d = image.data();
    for (int64_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) {
            double v = std::min(1.0, std::max(0.0, d[c * hw + i]));
            buf[static_cast<size_t>(i) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * 3;
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads a KITTI-convention depth PNG. Returns depth [1,H,W] meters and mask
// [1,H,W] (raw 0 = invalid); invalid depth entries are set to 0.
inline std::pair<Tensor, Tensor> read_png_depth16(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int depth_bits = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth_bits != 16 || color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path + "' is not 16-bit grayscale");
    }
    png_set_swap(png);  // PNG stores big-endian samples
    png_read_update_info(png, info);
    buf.resize(static_cast<size_t>(h) * w * 2);
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * 2;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::vector<double> depth(static_cast<size_t>(h) * w), mask(static_cast<size_t>(h) * w);
    const uint16_t* raw = reinterpret_cast<const uint16_t*>(buf.data());
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        depth[i] = raw[i] / 256.0;
        mask[i] = raw[i] > 0 ? 1.0 : 0.0;
    }
    return {Tensor::from_data({1, h, w}, std::move(depth)), Tensor::from_data({1, h, w}, std::move(mask))};
}

inline void write_png_depth16(const std::string& path, const Tensor& depth) {
    if (depth.rank() != 3 || depth.dim(0) != 1) throw ShapeError("write_png_depth16: [1,H,W] expected");
    const int h = depth.dim(1), w = depth.dim(2);
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot create '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    std::vector<png_byte> buf(static_cast<size_t>(h) * w * 2);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    const auto& d = depth.data();
    uint16_t* raw = reinterpret_cast<uint16_t*>(buf.data());
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        const double v = std::min(65535.0, std::max(0.0, std::round(d[i] * 256.0)));
        raw[i] = static_cast<uint16_t>(v);
    }
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * 2;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace td
