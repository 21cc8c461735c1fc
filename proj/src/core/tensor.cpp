#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace avatar {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t d : shape)
        require(d > 0, ErrorCategory::invalid_argument, "tensor: zero extent in shape " + shape_to_string(shape));
    require(shape_numel(shape) == values.size(), ErrorCategory::invalid_argument,
            "tensor: shape " + shape_to_string(shape) + " does not match value count " +
                std::to_string(values.size()));
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), value);
    return from_values(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    require(defined(), ErrorCategory::state, "tensor: undefined handle");
    return node_->shape;
}

std::size_t Tensor::numel() const { return node_->numel(); }

std::size_t Tensor::dim(std::size_t axis) const {
    require(axis < shape().size(), ErrorCategory::invalid_argument, "tensor: axis out of range");
    return node_->shape[axis];
}

std::span<const double> Tensor::values() const {
    require(defined(), ErrorCategory::state, "tensor: undefined handle");
    return node_->values;
}

std::span<double> Tensor::values_mut() {
    require(defined(), ErrorCategory::state, "tensor: undefined handle");
    return node_->values;
}

double Tensor::scalar_value() const {
    require(numel() == 1, ErrorCategory::invalid_argument,
            "tensor: scalar_value on non-scalar shape " + shape_to_string(shape()));
    return node_->values[0];
}

double Tensor::at(std::size_t flat_index) const { return node_->values[flat_index]; }

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    require(defined(), ErrorCategory::state, "tensor: undefined handle");
    node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    require(has_grad(), ErrorCategory::state, "tensor: gradient not populated");
    return node_->grad;
}

std::span<double> Tensor::grad_mut() {
    require(defined(), ErrorCategory::state, "tensor: undefined handle");
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (defined() && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape

Tape& Tape::active() {
    thread_local Tape tape;
    return tape;
}

void Tape::record(std::shared_ptr<detail::TensorNode> output, std::function<void()> pull) {
    records_.push_back({std::move(output), std::move(pull)});
}

void Tape::backward(const Tensor& root) {
    require(root.defined(), ErrorCategory::invalid_argument, "backward: undefined root");
    require(root.numel() == 1, ErrorCategory::invalid_argument,
            "backward: root must be scalar, got shape " + shape_to_string(root.shape()));
    require(!records_.empty(), ErrorCategory::state, "backward: tape is empty");
    for (Record& r : records_)
        if (!r.output->grad.empty()) std::fill(r.output->grad.begin(), r.output->grad.end(), 0.0);
    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;
    last_backward_visits_ = 0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        it->pull();
        ++last_backward_visits_;
    }
}

void Tape::clear() {
    records_.clear();
    last_backward_visits_ = 0;
}

void backward(const Tensor& root) { Tape::active().backward(root); }

// ---------------------------------------------------------------------------
// Broadcast helpers

namespace {

using Node = detail::TensorNode;
using NodePtr = std::shared_ptr<Node>;

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ai = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t bi = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ai != bi && ai != 1 && bi != 1)
            fail(ErrorCategory::invalid_argument,
                 std::string(op) + ": incompatible shapes " + shape_to_string(a) + " vs " +
                     shape_to_string(b));
        out[i] = std::max(ai, bi);
    }
    return out;
}

// Per-output-axis element strides, 0 on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& operand, const Shape& out) {
    const std::size_t rank = out.size();
    std::vector<std::size_t> strides(rank, 0);
    std::size_t run = 1;
    for (std::size_t i = operand.size(); i-- > 0;) {
        const std::size_t out_axis = i + (rank - operand.size());
        strides[out_axis] = operand[i] == 1 ? 0 : run;
        run *= operand[i];
    }
    return strides;
}

// Invokes fn(out_index, a_index, b_index) over every output element.
template <typename Fn>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, Fn&& fn) {
    const std::size_t n = shape_numel(out);
    const std::size_t rank = out.size();
    if (a == b) {
        for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
        return;
    }
    const auto astr = broadcast_strides(a, out);
    const auto bstr = broadcast_strides(b, out);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t ai = 0, bi = 0;
    for (std::size_t oi = 0; oi < n; ++oi) {
        fn(oi, ai, bi);
        for (std::size_t ax = rank; ax-- > 0;) {
            ++counter[ax];
            ai += astr[ax];
            bi += bstr[ax];
            if (counter[ax] < out[ax]) break;
            counter[ax] = 0;
            ai -= astr[ax] * out[ax];
            bi -= bstr[ax] * out[ax];
        }
    }
}

Tensor make_output(Shape shape, std::size_t n) {
    Tensor out = Tensor::from_values(std::move(shape), std::vector<double>(n, 0.0), false);
    return out;
}

bool should_track(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::active().recording()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Elementwise binary op with broadcasting. dfa/dfb give the partials with
// respect to a and b as functions of (a_value, b_value, out_value).
template <typename FwdFn, typename DaFn, typename DbFn>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, FwdFn fwd, DaFn dfa, DbFn dfb) {
    Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
    const std::size_t n = shape_numel(out_shape);
    Tensor out = make_output(std::move(out_shape), n);
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values_mut();
    for_each_broadcast(out.shape(), a.shape(), b.shape(),
                       [&](std::size_t oi, std::size_t ai, std::size_t bi) { ov[oi] = fwd(av[ai], bv[bi]); });

    if (should_track({&a, &b})) {
        out.set_requires_grad(true);
        NodePtr an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr();
        const bool need_a = a.requires_grad();
        const bool need_b = b.requires_grad();
        Tape::active().record(on, [an, bn, on, dfa, dfb, need_a, need_b]() {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            double* ga = need_a ? an->ensure_grad().data() : nullptr;
            double* gb = need_b ? bn->ensure_grad().data() : nullptr;
            const double* av = an->values.data();
            const double* bv = bn->values.data();
            const double* ov = on->values.data();
            for_each_broadcast(on->shape, an->shape, bn->shape,
                               [&](std::size_t oi, std::size_t ai, std::size_t bi) {
                                   if (ga) ga[ai] += g[oi] * dfa(av[ai], bv[bi], ov[oi]);
                                   if (gb) gb[bi] += g[oi] * dfb(av[ai], bv[bi], ov[oi]);
                               });
        });
    }
    return out;
}

// Elementwise unary op; dfn gives the partial as a function of (x, y).
template <typename FwdFn, typename DFn>
Tensor unary_op(const Tensor& x, FwdFn fwd, DFn dfn) {
    const std::size_t n = x.numel();
    Tensor out = make_output(x.shape(), n);
    auto xv = x.values();
    auto ov = out.values_mut();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);

    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on, dfn]() {
            if (on->grad.empty()) return;
            const auto& g = on->grad;
            auto& gx = xn->ensure_grad();
            const double* xv = xn->values.data();
            const double* ov = on->values.data();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfn(xv[i], ov[i]);
        });
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.values())
        require(v != 0.0, ErrorCategory::domain, "div: division by zero");
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double o) { return -o / y; });
}

Tensor affine(const Tensor& x, double scale, double shift) {
    return unary_op(
        x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

// ---------------------------------------------------------------------------
// Matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(b.rank() == 2, ErrorCategory::invalid_argument,
            "matmul: right operand must be rank 2, got " + shape_to_string(b.shape()));
    require(a.rank() == 2 || a.rank() == 3, ErrorCategory::invalid_argument,
            "matmul: left operand must be rank 2 or 3, got " + shape_to_string(a.shape()));
    const std::size_t k = a.shape().back();
    require(k == b.dim(0), ErrorCategory::invalid_argument,
            "matmul: inner dimensions differ: " + shape_to_string(a.shape()) + " vs " +
                shape_to_string(b.shape()));
    const std::size_t rows = a.numel() / k;
    const std::size_t m = b.dim(1);

    Shape out_shape = a.shape();
    out_shape.back() = m;
    Tensor out = make_output(std::move(out_shape), rows * m);

    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.values_mut().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* arow = A + r * k;
        double* crow = C + r * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = B + kk * m;
            for (std::size_t c = 0; c < m; ++c) crow[c] += av * brow[c];
        }
    }

    if (should_track({&a, &b})) {
        out.set_requires_grad(true);
        NodePtr an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr();
        const bool need_a = a.requires_grad();
        const bool need_b = b.requires_grad();
        Tape::active().record(on, [an, bn, on, rows, k, m, need_a, need_b]() {
            if (on->grad.empty()) return;
            const double* G = on->grad.data();
            const double* A = an->values.data();
            const double* B = bn->values.data();
            if (need_a) {
                double* GA = an->ensure_grad().data();
                // dA = dC . B^T; transposing B up front keeps the inner loop
                // contiguous so it vectorizes.
                std::vector<double> bt(k * m);
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t c = 0; c < m; ++c) bt[c * k + kk] = B[kk * m + c];
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* grow = G + r * m;
                    double* garow = GA + r * k;
                    for (std::size_t c = 0; c < m; ++c) {
                        const double g = grow[c];
                        const double* btrow = bt.data() + c * k;
                        for (std::size_t kk = 0; kk < k; ++kk) garow[kk] += g * btrow[kk];
                    }
                }
            }
            if (need_b) {
                double* GB = bn->ensure_grad().data();
                // dB = A^T . dC
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* arow = A + r * k;
                    const double* grow = G + r * m;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = arow[kk];
                        double* gbrow = GB + kk * m;
                        for (std::size_t c = 0; c < m; ++c) gbrow[c] += av * grow[c];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
    return unary_op(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    for (double v : x.values())
        require(v > 0.0, ErrorCategory::domain, "log: input must be positive");
    return unary_op(x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
    for (double v : x.values())
        require(v >= 0.0, ErrorCategory::domain, "sqrt: input must be non-negative");
    // The derivative at exactly zero does not exist; the guarded denominator
    // yields a finite factor that still produces the correct zero subgradient
    // whenever the incoming chain carries a factor of the zero input.
    return unary_op(x, [](double v) { return std::sqrt(v); },
                    [](double, double y) { return 0.5 / std::max(y, 1e-150); });
}

Tensor square(const Tensor& x) {
    return unary_op(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
    return unary_op(x, [](double v) { return std::fabs(v); },
                    [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    require(lo < hi, ErrorCategory::invalid_argument, "clamp: lo must be below hi");
    return unary_op(
        x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    Tensor out = Tensor::scalar(total);
    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on]() {
            if (on->grad.empty()) return;
            const double g = on->grad[0];
            auto& gx = xn->ensure_grad();
            for (double& v : gx) v += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    return affine(sum(x), inv, 0.0);
}

namespace {

Tensor axis_reduce(const Tensor& x, std::size_t axis, bool keepdims, bool take_mean) {
    require(axis < x.rank(), ErrorCategory::invalid_argument,
            "reduce: axis out of range for shape " + shape_to_string(x.shape()));
    const Shape& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t mid = s[axis];
    const double factor = take_mean ? 1.0 / static_cast<double>(mid) : 1.0;

    Shape out_shape;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == axis) {
            if (keepdims) out_shape.push_back(1);
        } else {
            out_shape.push_back(s[i]);
        }
    }
    Tensor out = make_output(std::move(out_shape), outer * inner);
    auto xv = x.values();
    auto ov = out.values_mut();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t m = 0; m < mid; ++m) {
            const double* src = xv.data() + (o * mid + m) * inner;
            double* dst = ov.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += factor * src[i];
        }

    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on, outer, mid, inner, factor]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            double* gx = xn->ensure_grad().data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t m = 0; m < mid; ++m) {
                    const double* src = g + o * inner;
                    double* dst = gx + (o * mid + m) * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += factor * src[i];
                }
        });
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis, bool keepdims) {
    return axis_reduce(x, axis, keepdims, false);
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdims) {
    return axis_reduce(x, axis, keepdims, true);
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& x, Shape new_shape) {
    require(shape_numel(new_shape) == x.numel(), ErrorCategory::invalid_argument,
            "reshape: cannot reshape " + shape_to_string(x.shape()) + " to " +
                shape_to_string(new_shape));
    Tensor out = Tensor::from_values(std::move(new_shape),
                                     std::vector<double>(x.values().begin(), x.values().end()));
    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on]() {
            if (on->grad.empty()) return;
            auto& gx = xn->ensure_grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
        });
    }
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
    require(a.rank() == b.rank() && axis < a.rank(), ErrorCategory::invalid_argument,
            "concat: rank mismatch or bad axis: " + shape_to_string(a.shape()) + " vs " +
                shape_to_string(b.shape()));
    for (std::size_t i = 0; i < a.rank(); ++i)
        require(i == axis || a.dim(i) == b.dim(i), ErrorCategory::invalid_argument,
                "concat: shapes differ off-axis: " + shape_to_string(a.shape()) + " vs " +
                    shape_to_string(b.shape()));
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t mid_a = a.dim(axis), mid_b = b.dim(axis);

    Shape out_shape = s;
    out_shape[axis] = mid_a + mid_b;
    Tensor out = make_output(std::move(out_shape), a.numel() + b.numel());
    auto ov = out.values_mut();
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(av.data() + o * mid_a * inner, mid_a * inner,
                    ov.data() + o * (mid_a + mid_b) * inner);
        std::copy_n(bv.data() + o * mid_b * inner, mid_b * inner,
                    ov.data() + (o * (mid_a + mid_b) + mid_a) * inner);
    }

    if (should_track({&a, &b})) {
        out.set_requires_grad(true);
        NodePtr an = a.node_ptr(), bn = b.node_ptr(), on = out.node_ptr();
        const bool need_a = a.requires_grad(), need_b = b.requires_grad();
        Tape::active().record(on, [an, bn, on, outer, inner, mid_a, mid_b, need_a, need_b]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            for (std::size_t o = 0; o < outer; ++o) {
                if (need_a) {
                    double* ga = an->ensure_grad().data();
                    const double* src = g + o * (mid_a + mid_b) * inner;
                    double* dst = ga + o * mid_a * inner;
                    for (std::size_t i = 0; i < mid_a * inner; ++i) dst[i] += src[i];
                }
                if (need_b) {
                    double* gb = bn->ensure_grad().data();
                    const double* src = g + (o * (mid_a + mid_b) + mid_a) * inner;
                    double* dst = gb + o * mid_b * inner;
                    for (std::size_t i = 0; i < mid_b * inner; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

Tensor select_time(const Tensor& x, std::size_t t) {
    require(x.rank() == 3, ErrorCategory::invalid_argument,
            "select_time: expected rank-3 input, got " + shape_to_string(x.shape()));
    require(t < x.dim(1), ErrorCategory::invalid_argument, "select_time: step out of range");
    const std::size_t n = x.dim(0), steps = x.dim(1), f = x.dim(2);
    Tensor out = make_output({n, f}, n * f);
    auto xv = x.values();
    auto ov = out.values_mut();
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(xv.data() + (i * steps + t) * f, f, ov.data() + i * f);

    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on, n, steps, t, f]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            double* gx = xn->ensure_grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                double* dst = gx + (i * steps + t) * f;
                const double* src = g + i * f;
                for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t end) {
    require(x.rank() == 3, ErrorCategory::invalid_argument,
            "slice_time: expected rank-3 input, got " + shape_to_string(x.shape()));
    require(begin < end && end <= x.dim(1), ErrorCategory::invalid_argument,
            "slice_time: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ")");
    const std::size_t n = x.dim(0), steps = x.dim(1), f = x.dim(2);
    const std::size_t len = end - begin;
    Tensor out = make_output({n, len, f}, n * len * f);
    auto xv = x.values();
    auto ov = out.values_mut();
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(xv.data() + (i * steps + begin) * f, len * f, ov.data() + i * len * f);

    if (should_track({&x})) {
        out.set_requires_grad(true);
        NodePtr xn = x.node_ptr(), on = out.node_ptr();
        Tape::active().record(on, [xn, on, n, steps, begin, len, f]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            double* gx = xn->ensure_grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                double* dst = gx + (i * steps + begin) * f;
                const double* src = g + i * len * f;
                for (std::size_t j = 0; j < len * f; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor stack_time(const std::vector<Tensor>& steps) {
    require(!steps.empty(), ErrorCategory::invalid_argument, "stack_time: no steps");
    const std::size_t n = steps.front().dim(0), f = steps.front().dim(1);
    for (const Tensor& s : steps)
        require(s.rank() == 2 && s.dim(0) == n && s.dim(1) == f, ErrorCategory::invalid_argument,
                "stack_time: step shape mismatch: " + shape_to_string(s.shape()) + " vs " +
                    shape_to_string(steps.front().shape()));
    const std::size_t t_len = steps.size();
    Tensor out = make_output({n, t_len, f}, n * t_len * f);
    auto ov = out.values_mut();
    for (std::size_t t = 0; t < t_len; ++t) {
        auto sv = steps[t].values();
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(sv.data() + i * f, f, ov.data() + (i * t_len + t) * f);
    }

    bool track = Tape::active().recording();
    if (track) {
        bool any = false;
        for (const Tensor& s : steps) any = any || s.requires_grad();
        track = any;
    }
    if (track) {
        out.set_requires_grad(true);
        std::vector<NodePtr> step_nodes;
        step_nodes.reserve(t_len);
        for (const Tensor& s : steps) step_nodes.push_back(s.node_ptr());
        NodePtr on = out.node_ptr();
        Tape::active().record(on, [step_nodes, on, n, t_len, f]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            for (std::size_t t = 0; t < t_len; ++t) {
                if (!step_nodes[t]->requires_grad) continue;
                double* gs = step_nodes[t]->ensure_grad().data();
                for (std::size_t i = 0; i < n; ++i) {
                    const double* src = g + (i * t_len + t) * f;
                    double* dst = gs + i * f;
                    for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& point, double h) {
    require(h > 0.0, ErrorCategory::invalid_argument, "grad_check: h must be positive");

    std::vector<Tensor> params;
    params.reserve(point.size());
    for (const Tensor& p : point) {
        params.push_back(Tensor::from_values(
            p.shape(), std::vector<double>(p.values().begin(), p.values().end()), true));
    }

    Tape& tape = Tape::active();
    tape.clear();
    Tensor y = f(params);
    require(y.numel() == 1, ErrorCategory::invalid_argument, "grad_check: f must return a scalar");
    tape.backward(y);

    std::vector<std::vector<double>> analytic;
    for (Tensor& p : params) {
        if (p.has_grad())
            analytic.emplace_back(p.grad().begin(), p.grad().end());
        else
            analytic.emplace_back(p.numel(), 0.0);
    }
    tape.clear();

    double max_rel_err = 0.0;
    {
        NoGradGuard no_grad;
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto vals = params[pi].values_mut();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const double orig = vals[i];
                vals[i] = orig + h;
                const double fp = f(params).scalar_value();
                vals[i] = orig - h;
                const double fm = f(params).scalar_value();
                vals[i] = orig;
                require(std::isfinite(fp) && std::isfinite(fm), ErrorCategory::domain,
                        "grad_check: non-finite value at perturbed point");
                const double numeric = (fp - fm) / (2.0 * h);
                const double a = analytic[pi][i];
                const double rel = std::fabs(a - numeric) / std::max(1.0, std::fabs(a));
                max_rel_err = std::max(max_rel_err, rel);
            }
        }
    }
    return max_rel_err;
}

}  // namespace avatar
