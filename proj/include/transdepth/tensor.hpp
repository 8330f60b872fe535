#pragma once

// Dense f64 tensor with reverse-mode autodiff.
//
// Tensors are immutable after construction except for gradient accumulation;
// a graph is built while grad mode is on and freed when the last handle to
// its outputs drops. Any NaN/Inf in an op output throws immediately.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "transdepth/errors.hpp"

namespace td {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    // Reads this node's grad, accumulates into parents'. Owned by the node,
    // so it must not capture a shared_ptr to the node itself.
    std::function<void(Node&)> backward;

    void accumulate(const double* g, int64_t n) {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        for (int64_t i = 0; i < n; ++i) grad[i] += g[i];
    }
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

// Disables graph construction in a scope (pure inference).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) {
        auto n = std::make_shared<detail::Node>();
        n->data.assign(shape_numel(shape), 0.0);
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, double v) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.node_->data.begin(), t.node_->data.end(), v);
        t.check_finite("full");
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<double> data) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape))
            throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        Tensor t(std::move(n));
        t.check_finite("from_data");
        return t;
    }

    static Tensor scalar(double v) { return from_data({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }

    const std::vector<double>& data() const { return node_->data; }
    // In-place access for parameter updates and test setup only; never call
    // on a value that is part of a live graph.
    std::vector<double>& raw_data() { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        node_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const {
        if (node_->grad.empty()) throw ValueError("tensor has no accumulated gradient");
        return node_->grad;
    }
    void zero_grad() { node_->grad.clear(); }

    double item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->data[0];
    }

    // Reverse-mode backprop from a scalar root.
    void backward() const {
        if (numel() != 1) throw ShapeError("backward() requires a scalar root");
        if (!node_->requires_grad) throw ValueError("backward() on a tensor that does not require grad");
        std::vector<detail::Node*> order;
        topo_sort(order);
        node_->grad.assign(1, 1.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node* n = *it;
            if (n->backward && !n->grad.empty()) n->backward(*n);
        }
    }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    // --- op construction (used by ops.hpp and module code) ---

    using BackwardFn = std::function<void(detail::Node&)>;

    static Tensor make_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs, BackwardFn fn,
                          const char* op_name) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape)) throw ShapeError(std::string(op_name) + ": bad output buffer");
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        Tensor out(std::move(n));
        out.check_finite(op_name);
        bool need = false;
        if (detail::grad_mode()) {
            for (const auto& t : inputs)
                if (t.node_->requires_grad) need = true;
        }
        if (need) {
            out.node_->requires_grad = true;
            for (const auto& t : inputs) out.node_->parents.push_back(t.node_);
            out.node_->backward = std::move(fn);
        }
        return out;
    }

    detail::Node* node() const { return node_.get(); }

private:
    explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

    void check_finite(const char* where) const {
        for (double v : node_->data) {
            if (!std::isfinite(v)) throw ValueError(std::string(where) + " produced a non-finite value");
        }
    }

    void topo_sort(std::vector<detail::Node*>& order) const {
        std::vector<std::pair<detail::Node*, size_t>> stack;
        std::unordered_set<detail::Node*> seen;
        stack.push_back({node_.get(), 0});
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                detail::Node* p = n->parents[idx++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    detail::NodePtr node_;
};

namespace detail {

inline void accum_into(const NodePtr& p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->accumulate(g.data(), static_cast<int64_t>(g.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Broadcasting: trailing axes are aligned; a dimension of size 1 stretches to
// the partner's size; missing leading axes are treated as size 1.
// ---------------------------------------------------------------------------

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

namespace detail {

// Row-major strides padded to rank r, with 0 stride on broadcast axes.
inline std::vector<int64_t> broadcast_strides(const Shape& s, size_t r, const Shape& out) {
    std::vector<int64_t> st(r, 0);
    int64_t acc = 1;
    size_t off = r - s.size();
    for (size_t i = s.size(); i-- > 0;) {
        st[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : acc;
        acc *= s[i];
    }
    return st;
}

// Sums `g` (shaped like `out_shape`) down to `target`, undoing broadcast.
inline std::vector<double> reduce_to_shape(const std::vector<double>& g, const Shape& out_shape, const Shape& target) {
    int64_t tn = shape_numel(target);
    if (static_cast<int64_t>(g.size()) == tn && out_shape.size() == target.size()) {
        bool same = true;
        for (size_t i = 0; i < target.size(); ++i)
            if (out_shape[i] != target[i]) same = false;
        if (same) return g;
    }
    std::vector<double> r(tn, 0.0);
    size_t rank = out_shape.size();
    auto tst = broadcast_strides(target, rank, out_shape);
    std::vector<int> idx(rank, 0);
    for (size_t flat = 0; flat < g.size(); ++flat) {
        int64_t ti = 0;
        for (size_t i = 0; i < rank; ++i) ti += idx[i] * tst[i];
        r[ti] += g[flat];
        for (size_t i = rank; i-- > 0;) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

namespace detail {

template <class F>
Tensor binary_op(const Tensor& a, const Tensor& b, F f, Tensor::BackwardFn bw, const char* name) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    int64_t n = shape_numel(out_shape);
    std::vector<double> out(n);
    if (a.shape() == b.shape()) {
        const auto& da = a.data();
        const auto& db = b.data();
        for (int64_t i = 0; i < n; ++i) out[i] = f(da[i], db[i]);
    } else {
        size_t r = out_shape.size();
        auto sa = broadcast_strides(a.shape(), r, out_shape);
        auto sb = broadcast_strides(b.shape(), r, out_shape);
        std::vector<int> idx(r, 0);
        const auto& da = a.data();
        const auto& db = b.data();
        for (int64_t flat = 0; flat < n; ++flat) {
            int64_t ia = 0, ib = 0;
            for (size_t i = 0; i < r; ++i) {
                ia += idx[i] * sa[i];
                ib += idx[i] * sb[i];
            }
            out[flat] = f(da[ia], db[ib]);
            for (size_t i = r; i-- > 0;) {
                if (++idx[i] < out_shape[i]) break;
                idx[i] = 0;
            }
        }
    }
    return Tensor::make_op(out_shape, std::move(out), {a, b}, std::move(bw), name);
}

// Evaluates one operand of a broadcast pair at the flat output index.
struct BroadcastReader {
    const std::vector<double>* d;
    std::vector<int64_t> strides;
    explicit BroadcastReader(const Tensor& t, const Shape& out_shape)
        : d(&t.data()), strides(broadcast_strides(t.shape(), out_shape.size(), out_shape)) {}
};

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    Shape as = a.shape(), bs = b.shape();
    auto bw = [as, bs](detail::Node& n) {
        Shape out_shape = n.shape;
        detail::accum_into(n.parents[0], detail::reduce_to_shape(n.grad, out_shape, as));
        detail::accum_into(n.parents[1], detail::reduce_to_shape(n.grad, out_shape, bs));
    };
    return detail::binary_op(a, b, [](double x, double y) { return x + y; }, bw, "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    Shape as = a.shape(), bs = b.shape();
    auto bw = [as, bs](detail::Node& n) {
        detail::accum_into(n.parents[0], detail::reduce_to_shape(n.grad, n.shape, as));
        std::vector<double> neg(n.grad.size());
        for (size_t i = 0; i < neg.size(); ++i) neg[i] = -n.grad[i];
        detail::accum_into(n.parents[1], detail::reduce_to_shape(neg, n.shape, bs));
    };
    return detail::binary_op(a, b, [](double x, double y) { return x - y; }, bw, "sub");
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    Shape as = a.shape(), bs = b.shape();
    auto bw = [a, b, as, bs](detail::Node& n) {
        const Shape& os = n.shape;
        size_t r = os.size();
        auto sa = detail::broadcast_strides(as, r, os);
        auto sb = detail::broadcast_strides(bs, r, os);
        std::vector<double> ga(n.grad.size()), gb(n.grad.size());
        std::vector<int> idx(r, 0);
        const auto& da = a.data();
        const auto& db = b.data();
        for (size_t flat = 0; flat < n.grad.size(); ++flat) {
            int64_t ia = 0, ib = 0;
            for (size_t i = 0; i < r; ++i) {
                ia += idx[i] * sa[i];
                ib += idx[i] * sb[i];
            }
            ga[flat] = n.grad[flat] * db[ib];
            gb[flat] = n.grad[flat] * da[ia];
            for (size_t i = r; i-- > 0;) {
                if (++idx[i] < os[i]) break;
                idx[i] = 0;
            }
        }
        detail::accum_into(n.parents[0], detail::reduce_to_shape(ga, os, as));
        detail::accum_into(n.parents[1], detail::reduce_to_shape(gb, os, bs));
    };
    return detail::binary_op(a, b, [](double x, double y) { return x * y; }, bw, "mul");
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data())
        if (v == 0.0) throw ValueError("div: zero divisor");
    Shape as = a.shape(), bs = b.shape();
    auto bw = [a, b, as, bs](detail::Node& n) {
        const Shape& os = n.shape;
        size_t r = os.size();
        auto sa = detail::broadcast_strides(as, r, os);
        auto sb = detail::broadcast_strides(bs, r, os);
        std::vector<double> ga(n.grad.size()), gb(n.grad.size());
        std::vector<int> idx(r, 0);
        const auto& da = a.data();
        const auto& db = b.data();
        for (size_t flat = 0; flat < n.grad.size(); ++flat) {
            int64_t ia = 0, ib = 0;
            for (size_t i = 0; i < r; ++i) {
                ia += idx[i] * sa[i];
                ib += idx[i] * sb[i];
            }
            double inv = 1.0 / db[ib];
            ga[flat] = n.grad[flat] * inv;
            gb[flat] = -n.grad[flat] * da[ia] * inv * inv;
            for (size_t i = r; i-- > 0;) {
                if (++idx[i] < os[i]) break;
                idx[i] = 0;
            }
        }
        detail::accum_into(n.parents[0], detail::reduce_to_shape(ga, os, as));
        detail::accum_into(n.parents[1], detail::reduce_to_shape(gb, os, bs));
    };
    return detail::binary_op(a, b, [](double x, double y) { return x / y; }, bw, "div");
}

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

namespace detail {

template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF df, const char* name) {
    int64_t n = a.numel();
    std::vector<double> out(n);
    const auto& d = a.data();
    for (int64_t i = 0; i < n; ++i) out[i] = f(d[i]);
    auto bw = [a, df](Node& nd) {
        std::vector<double> g(nd.grad.size());
        const auto& x = a.data();
        const auto& y = nd.data;
        for (size_t i = 0; i < g.size(); ++i) g[i] = nd.grad[i] * df(x[i], y[i]);
        accum_into(nd.parents[0], g);
    };
    return Tensor::make_op(a.shape(), std::move(out), {a}, std::move(bw), name);
}

}  // namespace detail

inline Tensor neg(const Tensor& a) {
    return detail::unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; }, "neg");
}

inline Tensor scale(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw ValueError("scale: non-finite factor");
    return detail::unary_op(a, [c](double x) { return c * x; }, [c](double, double) { return c; }, "scale");
}

inline Tensor add_scalar(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw ValueError("add_scalar: non-finite addend");
    return detail::unary_op(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; }, "add_scalar");
}

inline Tensor relu(const Tensor& a) {
    return detail::unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                            [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }, "relu");
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                            [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

inline Tensor log(const Tensor& a) {
    for (double v : a.data())
        if (v <= 0.0) throw ValueError("log: non-positive input");
    return detail::unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }, "log");
}

inline Tensor sqrt(const Tensor& a) {
    for (double v : a.data())
        if (v < 0.0) throw ValueError("sqrt: negative input");
    return detail::unary_op(a, [](double x) { return std::sqrt(x); },
                            [](double, double y) { return 0.5 / (y > 0.0 ? y : 1e-300); }, "sqrt");
}

// sqrt of a radicand that is non-negative analytically but may dip below zero
// by rounding: clamps at 0 first and defines the gradient as 0 there.
inline Tensor sqrt_scalar(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return std::sqrt(x > 0.0 ? x : 0.0); },
        [](double x, double y) { return x > 0.0 ? 0.5 / y : 0.0; }, "sqrt_scalar");
}

inline Tensor gelu(const Tensor& a) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    return detail::unary_op(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x, double) {
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        },
        "gelu");
}

// Gradient passes only strictly inside (lo, hi); 0 at and beyond the bounds.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo < hi)) throw ValueError("clamp: lo must be < hi");
    return detail::unary_op(
        a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; }, "clamp");
}

inline Tensor clamp_min(const Tensor& a, double lo) {
    return detail::unary_op(a, [lo](double x) { return x < lo ? lo : x; },
                            [lo](double x, double) { return x > lo ? 1.0 : 0.0; }, "clamp_min");
}

inline Tensor acos(const Tensor& a) {
    for (double v : a.data())
        if (v <= -1.0 || v >= 1.0) throw ValueError("acos: input must lie strictly inside (-1, 1); clamp first");
    return detail::unary_op(a, [](double x) { return std::acos(x); },
                            [](double x, double) { return -1.0 / std::sqrt(1.0 - x * x); }, "acos");
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto bw = [](detail::Node& n) {
        std::vector<double> g(n.parents[0]->data.size(), n.grad[0]);
        detail::accum_into(n.parents[0], g);
    };
    return Tensor::make_op({1}, {s}, {a}, bw, "sum_all");
}

inline Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

// Sum over one axis, keeping it as size 1.
inline Tensor sum_axis(const Tensor& a, int axis) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) throw ShapeError("sum_axis: axis out of range");
    Shape os = s;
    os[axis] = 1;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    int64_t k = s[axis];
    std::vector<double> out(outer * inner, 0.0);
    const auto& d = a.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < k; ++j) {
            const double* src = d.data() + (o * k + j) * inner;
            double* dst = out.data() + o * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    auto bw = [outer, inner, k](detail::Node& n) {
        std::vector<double> g(outer * k * inner);
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t j = 0; j < k; ++j) {
                const double* src = n.grad.data() + o * inner;
                double* dst = g.data() + (o * k + j) * inner;
                for (int64_t i = 0; i < inner; ++i) dst[i] = src[i];
            }
        detail::accum_into(n.parents[0], g);
    };
    return Tensor::make_op(os, std::move(out), {a}, bw, "sum_axis");
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape s) {
    if (shape_numel(s) != a.numel())
        throw ShapeError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " + shape_str(s));
    auto bw = [](detail::Node& n) { detail::accum_into(n.parents[0], n.grad); };
    return Tensor::make_op(std::move(s), a.data(), {a}, bw, "reshape");
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(s0.size())) throw ShapeError("concat: axis out of range");
    Shape os = s0;
    os[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
        for (size_t i = 0; i < s.size(); ++i)
            if (static_cast<int>(i) != axis && s[i] != s0[i]) throw ShapeError("concat: non-axis dims must match");
        os[axis] += s[axis];
    }
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s0[i];
    for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    std::vector<double> out(shape_numel(os));
    std::vector<int64_t> widths;
    int64_t total_w = os[axis] * inner;
    int64_t off = 0;
    for (const auto& p : parts) {
        int64_t w = p.dim(axis) * inner;
        widths.push_back(w);
        const auto& d = p.data();
        for (int64_t o = 0; o < outer; ++o)
            std::copy(d.begin() + o * w, d.begin() + (o + 1) * w, out.begin() + o * total_w + off);
        off += w;
    }
    auto bw = [outer, widths, total_w](detail::Node& n) {
        int64_t off2 = 0;
        for (size_t pi = 0; pi < widths.size(); ++pi) {
            int64_t w = widths[pi];
            if (n.parents[pi]->requires_grad) {
                std::vector<double> g(outer * w);
                for (int64_t o = 0; o < outer; ++o)
                    std::copy(n.grad.begin() + o * total_w + off2, n.grad.begin() + o * total_w + off2 + w,
                              g.begin() + o * w);
                detail::accum_into(n.parents[pi], g);
            }
            off2 += w;
        }
    };
    return Tensor::make_op(os, std::move(out), parts, bw, "concat");
}

inline Tensor slice(const Tensor& a, int axis, int start, int len) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) throw ShapeError("slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > s[axis]) throw ShapeError("slice: range out of bounds");
    Shape os = s;
    os[axis] = len;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    int64_t src_w = s[axis] * inner, dst_w = len * inner, off = start * inner;
    std::vector<double> out(outer * dst_w);
    const auto& d = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::copy(d.begin() + o * src_w + off, d.begin() + o * src_w + off + dst_w, out.begin() + o * dst_w);
    int64_t src_total = a.numel();
    auto bw = [outer, src_w, dst_w, off, src_total](detail::Node& n) {
        std::vector<double> g(src_total, 0.0);
        for (int64_t o = 0; o < outer; ++o)
            std::copy(n.grad.begin() + o * dst_w, n.grad.begin() + (o + 1) * dst_w, g.begin() + o * src_w + off);
        detail::accum_into(n.parents[0], g);
    };
    return Tensor::make_op(os, std::move(out), {a}, bw, "slice");
}

inline Tensor transpose2d(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose2d: rank-2 tensor required");
    int r = a.dim(0), c = a.dim(1);
    std::vector<double> out(static_cast<size_t>(r) * c);
    const auto& d = a.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(j) * r + i] = d[static_cast<size_t>(i) * c + j];
    auto bw = [r, c](detail::Node& n) {
        std::vector<double> g(static_cast<size_t>(r) * c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) g[static_cast<size_t>(i) * c + j] = n.grad[static_cast<size_t>(j) * r + i];
        detail::accum_into(n.parents[0], g);
    };
    return Tensor::make_op({c, r}, std::move(out), {a}, bw, "transpose2d");
}

}  // namespace td
