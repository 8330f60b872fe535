#pragma once

// Structured tensor ops: matmul, softmax, layer norm, convolution, bilinear
// resize, pooling, and the NCHW <-> token reorderings. All NCHW, row-major.

#include <cmath>
#include <vector>

#include "transdepth/tensor.hpp"

namespace td {

// C[M,N] = A[M,K] * B[K,N]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: rank-2 tensors required");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dims disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& da = a.data();
    const auto& db = b.data();
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = da[static_cast<size_t>(i) * k + p];
            const double* brow = db.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    auto bw = [a, b, m, k, n](detail::Node& nd) {
        const auto& g = nd.grad;
        if (nd.parents[0]->requires_grad) {
            // dA = G * B^T
            std::vector<double> ga(static_cast<size_t>(m) * k, 0.0);
            const auto& db2 = b.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gv = g[static_cast<size_t>(i) * n + j];
                    const double* brow = db2.data();
                    for (int p = 0; p < k; ++p) ga[static_cast<size_t>(i) * k + p] += gv * brow[static_cast<size_t>(p) * n + j];
                }
            detail::accum_into(nd.parents[0], ga);
        }
        if (nd.parents[1]->requires_grad) {
            // dB = A^T * G
            std::vector<double> gb(static_cast<size_t>(k) * n, 0.0);
            const auto& da2 = a.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double av = da2[static_cast<size_t>(i) * k + p];
                    const double* grow = g.data() + static_cast<size_t>(i) * n;
                    double* brow = gb.data() + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            detail::accum_into(nd.parents[1], gb);
        }
    };
    return Tensor::make_op({m, n}, std::move(out), {a, b}, bw, "matmul");
}

// Softmax over the last axis, max-subtracted for stability.
inline Tensor softmax_last(const Tensor& a) {
    if (a.rank() < 1) throw ShapeError("softmax_last: rank >= 1 required");
    const int k = a.dim(a.rank() - 1);
    if (k < 1) throw ShapeError("softmax_last: empty last axis");
    const int64_t slices = a.numel() / k;
    std::vector<double> out(a.numel());
    const auto& d = a.data();
    for (int64_t s = 0; s < slices; ++s) {
        const double* x = d.data() + s * k;
        double* y = out.data() + s * k;
        double mx = x[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, x[i]);
        double z = 0.0;
        for (int i = 0; i < k; ++i) {
            y[i] = std::exp(x[i] - mx);
            z += y[i];
        }
        const double inv = 1.0 / z;
        for (int i = 0; i < k; ++i) y[i] *= inv;
    }
    auto bw = [slices, k](detail::Node& nd) {
        std::vector<double> g(nd.data.size());
        for (int64_t s = 0; s < slices; ++s) {
            const double* y = nd.data.data() + s * k;
            const double* go = nd.grad.data() + s * k;
            double dot = 0.0;
            for (int i = 0; i < k; ++i) dot += go[i] * y[i];
            for (int i = 0; i < k; ++i) g[s * k + i] = y[i] * (go[i] - dot);
        }
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op(a.shape(), std::move(out), {a}, bw, "softmax_last");
}

// LayerNorm over the last axis: y = gamma * (x - mu) / sqrt(var + eps) + beta,
// biased variance. gamma/beta are length-C vectors.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
    if (eps <= 0.0) throw ValueError("layer_norm: eps must be positive");
    if (x.rank() < 1) throw ShapeError("layer_norm: rank >= 1 required");
    const int c = x.dim(x.rank() - 1);
    if (c < 1) throw ShapeError("layer_norm: empty normalization axis");
    if (gamma.numel() != c || beta.numel() != c) throw ShapeError("layer_norm: gamma/beta must have length C");
    const int64_t slices = x.numel() / c;
    std::vector<double> out(x.numel());
    std::vector<double> inv_std(slices), mu(slices);
    const auto& d = x.data();
    const auto& g = gamma.data();
    const auto& b = beta.data();
    for (int64_t s = 0; s < slices; ++s) {
        const double* xs = d.data() + s * c;
        double m = 0.0;
        for (int i = 0; i < c; ++i) m += xs[i];
        m /= c;
        double v = 0.0;
        for (int i = 0; i < c; ++i) {
            const double t = xs[i] - m;
            v += t * t;
        }
        v /= c;
        const double is = 1.0 / std::sqrt(v + eps);
        mu[s] = m;
        inv_std[s] = is;
        double* ys = out.data() + s * c;
        for (int i = 0; i < c; ++i) ys[i] = g[i] * (xs[i] - m) * is + b[i];
    }
    auto bw = [x, gamma, slices, c, mu, inv_std](detail::Node& nd) {
        const auto& xd = x.data();
        const auto& gd = gamma.data();
        std::vector<double> gx(xd.size(), 0.0), gg(c, 0.0), gb(c, 0.0);
        for (int64_t s = 0; s < slices; ++s) {
            const double* xs = xd.data() + s * c;
            const double* go = nd.grad.data() + s * c;
            const double m = mu[s], is = inv_std[s];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int i = 0; i < c; ++i) {
                const double xhat = (xs[i] - m) * is;
                const double dxhat = go[i] * gd[i];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                gg[i] += go[i] * xhat;
                gb[i] += go[i];
            }
            double* gxs = gx.data() + s * c;
            for (int i = 0; i < c; ++i) {
                const double xhat = (xs[i] - m) * is;
                const double dxhat = go[i] * gd[i];
                gxs[i] = is * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
            }
        }
        detail::accum_into(nd.parents[0], gx);
        detail::accum_into(nd.parents[1], gg);
        detail::accum_into(nd.parents[2], gb);
    };
    return Tensor::make_op(x.shape(), std::move(out), {x, gamma, beta}, bw, "layer_norm");
}

namespace detail {

inline int conv_out_size(int in, int k, int stride, int pad, const char* what) {
    const int span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw ShapeError(std::string("conv2d: non-integral output ") + what + " for in=" + std::to_string(in) +
                         " k=" + std::to_string(k) + " stride=" + std::to_string(stride) + " pad=" + std::to_string(pad));
    return span / stride + 1;
}

}  // namespace detail

// Cross-correlation (no kernel flip), zero padding, NCHW.
// x: [N,C,H,W], w: [O,C,kh,kw], b: [O] (optional, pass undefined Tensor to skip).
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d: x and w must be rank-4");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int o = w.dim(0), wc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (wc != c) throw ShapeError("conv2d: channel mismatch");
    if (stride < 1 || pad < 0) throw ShapeError("conv2d: bad stride/pad");
    const bool has_bias = b.defined();
    if (has_bias && b.numel() != o) throw ShapeError("conv2d: bias length must equal output channels");
    const int oh = detail::conv_out_size(h, kh, stride, pad, "height");
    const int ow = detail::conv_out_size(ww, kw, stride, pad, "width");
    std::vector<double> out(static_cast<size_t>(n) * o * oh * ow, 0.0);
    const auto& xd = x.data();
    const auto& wd = w.data();
    if (has_bias) {
        const auto& bd = b.data();
        for (int b0 = 0; b0 < n; ++b0)
            for (int oc = 0; oc < o; ++oc)
                std::fill_n(out.data() + (static_cast<size_t>(b0) * o + oc) * oh * ow, static_cast<size_t>(oh) * ow, bd[oc]);
    }
    for (int b0 = 0; b0 < n; ++b0)
        for (int oc = 0; oc < o; ++oc)
            for (int ic = 0; ic < c; ++ic)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = wd[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx];
                        if (wv == 0.0) continue;
                        for (int y = 0; y < oh; ++y) {
                            const int iy = y * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            const double* xrow = xd.data() + ((static_cast<size_t>(b0) * c + ic) * h + iy) * ww;
                            double* orow = out.data() + ((static_cast<size_t>(b0) * o + oc) * oh + y) * ow;
                            for (int xo = 0; xo < ow; ++xo) {
                                const int ix = xo * stride + kx - pad;
                                if (ix < 0 || ix >= ww) continue;
                                orow[xo] += wv * xrow[ix];
                            }
                        }
                    }
    std::vector<Tensor> inputs = has_bias ? std::vector<Tensor>{x, w, b} : std::vector<Tensor>{x, w};
    auto bw = [x, w, n, c, h, ww, o, kh, kw, oh, ow, stride, pad, has_bias](detail::Node& nd) {
        const auto& g = nd.grad;
        const auto& xd2 = x.data();
        const auto& wd2 = w.data();
        if (nd.parents[0]->requires_grad) {
            std::vector<double> gx(xd2.size(), 0.0);
            for (int b0 = 0; b0 < n; ++b0)
                for (int oc = 0; oc < o; ++oc)
                    for (int ic = 0; ic < c; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const double wv = wd2[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx];
                                if (wv == 0.0) continue;
                                for (int y = 0; y < oh; ++y) {
                                    const int iy = y * stride + ky - pad;
                                    if (iy < 0 || iy >= h) continue;
                                    const double* grow = g.data() + ((static_cast<size_t>(b0) * o + oc) * oh + y) * ow;
                                    double* xrow = gx.data() + ((static_cast<size_t>(b0) * c + ic) * h + iy) * ww;
                                    for (int xo = 0; xo < ow; ++xo) {
                                        const int ix = xo * stride + kx - pad;
                                        if (ix < 0 || ix >= ww) continue;
                                        xrow[ix] += wv * grow[xo];
                                    }
                                }
                            }
            detail::accum_into(nd.parents[0], gx);
        }
        if (nd.parents[1]->requires_grad) {
            std::vector<double> gw(wd2.size(), 0.0);
            for (int b0 = 0; b0 < n; ++b0)
                for (int oc = 0; oc < o; ++oc)
                    for (int ic = 0; ic < c; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                double acc = 0.0;
                                for (int y = 0; y < oh; ++y) {
                                    const int iy = y * stride + ky - pad;
                                    if (iy < 0 || iy >= h) continue;
                                    const double* xrow = xd2.data() + ((static_cast<size_t>(b0) * c + ic) * h + iy) * ww;
                                    const double* grow = g.data() + ((static_cast<size_t>(b0) * o + oc) * oh + y) * ow;
                                    for (int xo = 0; xo < ow; ++xo) {
                                        const int ix = xo * stride + kx - pad;
                                        if (ix < 0 || ix >= ww) continue;
                                        acc += xrow[ix] * grow[xo];
                                    }
                                }
                                gw[((static_cast<size_t>(oc) * c + ic) * kh + ky) * kw + kx] += acc;
                            }
            detail::accum_into(nd.parents[1], gw);
        }
        if (has_bias && nd.parents[2]->requires_grad) {
            std::vector<double> gb(static_cast<size_t>(o), 0.0);
            for (int b0 = 0; b0 < n; ++b0)
                for (int oc = 0; oc < o; ++oc) {
                    const double* grow = g.data() + (static_cast<size_t>(b0) * o + oc) * oh * ow;
                    double acc = 0.0;
                    for (int i = 0; i < oh * ow; ++i) acc += grow[i];
                    gb[oc] += acc;
                }
            detail::accum_into(nd.parents[2], gb);
        }
    };
    return Tensor::make_op({n, o, oh, ow}, std::move(out), inputs, bw, "conv2d");
}

namespace detail {

struct ResizeAxis {
    std::vector<int> i0, i1;
    std::vector<double> w1;  // weight on i1; (1-w1) on i0
};

// align-corners=false: source s = (t + 0.5) * in / out - 0.5, clamped to [0, in-1].
inline ResizeAxis resize_axis(int in, int out) {
    ResizeAxis r;
    r.i0.resize(out);
    r.i1.resize(out);
    r.w1.resize(out);
    for (int t = 0; t < out; ++t) {
        double s = (t + 0.5) * static_cast<double>(in) / out - 0.5;
        if (s < 0.0) s = 0.0;
        if (s > in - 1) s = in - 1;
        int lo = static_cast<int>(std::floor(s));
        if (lo > in - 2) lo = in - 2;
        if (lo < 0) lo = 0;
        r.i0[t] = lo;
        r.i1[t] = in == 1 ? 0 : lo + 1;
        r.w1[t] = in == 1 ? 0.0 : s - lo;
    }
    return r;
}

}  // namespace detail

// Bilinear resize of [N,C,H,W] to [N,C,oh,ow].
inline Tensor bilinear_resize(const Tensor& x, int oh, int ow) {
    if (x.rank() != 4) throw ShapeError("bilinear_resize: rank-4 tensor required");
    if (oh < 1 || ow < 1) throw ShapeError("bilinear_resize: target dims must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h == oh && w == ow) {
        auto bw = [](detail::Node& nd) { detail::accum_into(nd.parents[0], nd.grad); };
        return Tensor::make_op({n, c, oh, ow}, x.data(), {x}, bw, "bilinear_resize");
    }
    const auto ay = detail::resize_axis(h, oh);
    const auto ax = detail::resize_axis(w, ow);
    std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
    const auto& d = x.data();
    for (int b0 = 0; b0 < n; ++b0)
        for (int ch = 0; ch < c; ++ch) {
            const double* plane = d.data() + (static_cast<size_t>(b0) * c + ch) * h * w;
            double* oplane = out.data() + (static_cast<size_t>(b0) * c + ch) * oh * ow;
            for (int y = 0; y < oh; ++y) {
                const double* r0 = plane + static_cast<size_t>(ay.i0[y]) * w;
                const double* r1 = plane + static_cast<size_t>(ay.i1[y]) * w;
                const double wy = ay.w1[y];
                for (int xo = 0; xo < ow; ++xo) {
                    const double wx = ax.w1[xo];
                    const double v0 = r0[ax.i0[xo]] * (1.0 - wx) + r0[ax.i1[xo]] * wx;
                    const double v1 = r1[ax.i0[xo]] * (1.0 - wx) + r1[ax.i1[xo]] * wx;
                    oplane[static_cast<size_t>(y) * ow + xo] = v0 * (1.0 - wy) + v1 * wy;
                }
            }
        }
    auto bw = [n, c, h, w, oh, ow, ay, ax](detail::Node& nd) {
        std::vector<double> gx(static_cast<size_t>(n) * c * h * w, 0.0);
        for (int b0 = 0; b0 < n; ++b0)
            for (int ch = 0; ch < c; ++ch) {
                double* plane = gx.data() + (static_cast<size_t>(b0) * c + ch) * h * w;
                const double* gplane = nd.grad.data() + (static_cast<size_t>(b0) * c + ch) * oh * ow;
                for (int y = 0; y < oh; ++y) {
                    const double wy = ay.w1[y];
                    for (int xo = 0; xo < ow; ++xo) {
                        const double g = gplane[static_cast<size_t>(y) * ow + xo];
                        const double wx = ax.w1[xo];
                        plane[static_cast<size_t>(ay.i0[y]) * w + ax.i0[xo]] += g * (1.0 - wy) * (1.0 - wx);
                        plane[static_cast<size_t>(ay.i0[y]) * w + ax.i1[xo]] += g * (1.0 - wy) * wx;
                        plane[static_cast<size_t>(ay.i1[y]) * w + ax.i0[xo]] += g * wy * (1.0 - wx);
                        plane[static_cast<size_t>(ay.i1[y]) * w + ax.i1[xo]] += g * wy * wx;
                    }
                }
            }
        detail::accum_into(nd.parents[0], gx);
    };
    return Tensor::make_op({n, c, oh, ow}, std::move(out), {x}, bw, "bilinear_resize");
}

// Mean over spatial positions: [N,C,H,W] -> [N,C,1,1].
inline Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("global_avg_pool: rank-4 tensor required");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> out(static_cast<size_t>(n) * c);
    const auto& d = x.data();
    for (int64_t i = 0; i < n * c; ++i) {
        const double* p = d.data() + i * hw;
        double s = 0.0;
        for (int64_t j = 0; j < hw; ++j) s += p[j];
        out[i] = s / hw;
    }
    auto bw = [n, c, hw](detail::Node& nd) {
        std::vector<double> g(static_cast<size_t>(n) * c * hw);
        for (int64_t i = 0; i < n * c; ++i) {
            const double gv = nd.grad[i] / hw;
            double* p = g.data() + i * hw;
            for (int64_t j = 0; j < hw; ++j) p[j] = gv;
        }
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op({n, c, 1, 1}, std::move(out), {x}, bw, "global_avg_pool");
}

// out[n,c,y,x] = x[n,c,y+dy,x+dx], zero outside. Used to realize k x k local
// kernels as shifted products.
inline Tensor spatial_shift(const Tensor& x, int dy, int dx) {
    if (x.rank() != 4) throw ShapeError("spatial_shift: rank-4 tensor required");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    std::vector<double> out(x.numel(), 0.0);
    const auto& d = x.data();
    for (int b0 = 0; b0 < n * c; ++b0)
        for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            for (int xo = 0; xo < w; ++xo) {
                const int sx = xo + dx;
                if (sx < 0 || sx >= w) continue;
                out[(static_cast<size_t>(b0) * h + y) * w + xo] = d[(static_cast<size_t>(b0) * h + sy) * w + sx];
            }
        }
    auto bw = [n, c, h, w, dy, dx](detail::Node& nd) {
        std::vector<double> g(nd.grad.size(), 0.0);
        for (int b0 = 0; b0 < n * c; ++b0)
            for (int y = 0; y < h; ++y) {
                const int sy = y + dy;
                if (sy < 0 || sy >= h) continue;
                for (int xo = 0; xo < w; ++xo) {
                    const int sx = xo + dx;
                    if (sx < 0 || sx >= w) continue;
                    g[(static_cast<size_t>(b0) * h + sy) * w + sx] += nd.grad[(static_cast<size_t>(b0) * h + y) * w + xo];
                }
            }
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op(x.shape(), std::move(out), {x}, bw, "spatial_shift");
}

// [N,C,H,W] -> [N, H*W, C]; token t = y*W + x (row-major over the grid).
inline Tensor nchw_to_tokens(const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("nchw_to_tokens: rank-4 tensor required");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> out(x.numel());
    const auto& d = x.data();
    for (int b0 = 0; b0 < n; ++b0)
        for (int ch = 0; ch < c; ++ch)
            for (int64_t t = 0; t < hw; ++t)
                out[(static_cast<size_t>(b0) * hw + t) * c + ch] = d[(static_cast<size_t>(b0) * c + ch) * hw + t];
    auto bw = [n, c, hw](detail::Node& nd) {
        std::vector<double> g(nd.grad.size());
        for (int b0 = 0; b0 < n; ++b0)
            for (int ch = 0; ch < c; ++ch)
                for (int64_t t = 0; t < hw; ++t)
                    g[(static_cast<size_t>(b0) * c + ch) * hw + t] = nd.grad[(static_cast<size_t>(b0) * hw + t) * c + ch];
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op({n, static_cast<int>(hw), c}, std::move(out), {x}, bw, "nchw_to_tokens");
}

// [N, H*W, C] -> [N,C,H,W]; exact inverse of nchw_to_tokens.
inline Tensor tokens_to_nchw(const Tensor& z, int h, int w) {
    if (z.rank() != 3) throw ShapeError("tokens_to_nchw: rank-3 tensor required");
    const int n = z.dim(0), t = z.dim(1), c = z.dim(2);
    if (t != h * w)
        throw ShapeError("tokens_to_nchw: token count " + std::to_string(t) + " does not match grid " +
                         std::to_string(h) + "x" + std::to_string(w));
    const int64_t hw = static_cast<int64_t>(h) * w;
    std::vector<double> out(z.numel());
    const auto& d = z.data();
    for (int b0 = 0; b0 < n; ++b0)
        for (int ch = 0; ch < c; ++ch)
            for (int64_t tt = 0; tt < hw; ++tt)
                out[(static_cast<size_t>(b0) * c + ch) * hw + tt] = d[(static_cast<size_t>(b0) * hw + tt) * c + ch];
    auto bw = [n, c, hw](detail::Node& nd) {
        std::vector<double> g(nd.grad.size());
        for (int b0 = 0; b0 < n; ++b0)
            for (int ch = 0; ch < c; ++ch)
                for (int64_t tt = 0; tt < hw; ++tt)
                    g[(static_cast<size_t>(b0) * hw + tt) * c + ch] = nd.grad[(static_cast<size_t>(b0) * c + ch) * hw + tt];
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op({n, c, h, w}, std::move(out), {z}, bw, "tokens_to_nchw");
}

// y = x*w + b for token matrices: x [T,C_in], w [C_in,C_out], b [C_out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y = matmul(x, w);
    if (b.defined()) y = add(y, reshape(b, {1, b.dim(0)}));
    return y;
}

// Non-overlapping p x p patches: [N,C,H,W] -> [N, (H/p)*(W/p), C*p*p].
// Patches ordered row-major over the grid; features ordered (c, dy, dx).
// For p=1 this coincides with nchw_to_tokens.
inline Tensor space_to_patches(const Tensor& x, int p) {
    if (x.rank() != 4) throw ShapeError("space_to_patches: rank-4 tensor required");
    if (p < 1) throw ShapeError("space_to_patches: patch size must be >= 1");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % p != 0 || w % p != 0)
        throw ShapeError("space_to_patches: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch size " + std::to_string(p));
    const int gh = h / p, gw = w / p;
    const int t = gh * gw, f = c * p * p;
    std::vector<double> out(x.numel());
    const auto& d = x.data();
    for (int b0 = 0; b0 < n; ++b0)
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                double* tok = out.data() + ((static_cast<size_t>(b0) * t) + static_cast<size_t>(gy) * gw + gx) * f;
                for (int ch = 0; ch < c; ++ch)
                    for (int dy = 0; dy < p; ++dy)
                        for (int dx = 0; dx < p; ++dx)
                            tok[(static_cast<size_t>(ch) * p + dy) * p + dx] =
                                d[((static_cast<size_t>(b0) * c + ch) * h + gy * p + dy) * w + gx * p + dx];
            }
    auto bw = [n, c, h, w, p, gh, gw, t, f](detail::Node& nd) {
        std::vector<double> g(nd.grad.size());
        for (int b0 = 0; b0 < n; ++b0)
            for (int gy = 0; gy < gh; ++gy)
                for (int gx = 0; gx < gw; ++gx) {
                    const double* tok = nd.grad.data() + ((static_cast<size_t>(b0) * t) + static_cast<size_t>(gy) * gw + gx) * f;
                    for (int ch = 0; ch < c; ++ch)
                        for (int dy = 0; dy < p; ++dy)
                            for (int dx = 0; dx < p; ++dx)
                                g[((static_cast<size_t>(b0) * c + ch) * h + gy * p + dy) * w + gx * p + dx] =
                                    tok[(static_cast<size_t>(ch) * p + dy) * p + dx];
                }
        detail::accum_into(nd.parents[0], g);
    };
    return Tensor::make_op({n, t, f}, std::move(out), {x}, bw, "space_to_patches");
}

}  // namespace td
