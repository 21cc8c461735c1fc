#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace avatar {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated lazily, zero-filled
    bool requires_grad = false;

    std::size_t numel() const { return values.size(); }
    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

// Shared handle to a value (and, after backward, its gradient) in the
// computation graph. Copying a Tensor copies the handle, not the data.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    std::size_t dim(std::size_t axis) const;

    std::span<const double> values() const;
    // Direct mutation is for leaf tensors (parameters, data); mutating an
    // op output would desynchronize the recorded graph.
    std::span<double> values_mut();

    double scalar_value() const;
    double at(std::size_t flat_index) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    detail::TensorNode* node() const { return node_.get(); }
    std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Wengert-list tape: ops append themselves in execution order, which is a
// topological order by construction; backward replays the list once in
// reverse. One tape per thread.
class Tape {
public:
    static Tape& active();

    void record(std::shared_ptr<detail::TensorNode> output, std::function<void()> pull);
    bool recording() const { return no_grad_depth_ == 0; }

    // Accumulates d(root)/d(leaf) into every requires_grad leaf. Leaf
    // gradients accumulate across calls; op-output gradients are reset at
    // the start of every pass so each call contributes exactly one d(root).
    void backward(const Tensor& root);

    void clear();
    std::size_t op_count() const { return records_.size(); }
    std::size_t last_backward_visits() const { return last_backward_visits_; }

private:
    friend class NoGradGuard;
    struct Record {
        std::shared_ptr<detail::TensorNode> output;
        std::function<void()> pull;
    };
    std::vector<Record> records_;
    std::size_t last_backward_visits_ = 0;
    int no_grad_depth_ = 0;
};

class NoGradGuard {
public:
    NoGradGuard() { ++Tape::active().no_grad_depth_; }
    ~NoGradGuard() { --Tape::active().no_grad_depth_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

void backward(const Tensor& root);

// Elementwise binary ops with right-aligned broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift);

// a @ b where a is (..., K) of rank 2 or 3 and b is K x M.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);     // rejects non-positive inputs
Tensor sqrt(const Tensor& x);    // rejects negative inputs
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);                                         // all axes -> rank-0
Tensor sum(const Tensor& x, std::size_t axis, bool keepdims = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdims = false);

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);

// Sequence helpers on N x T x F tensors.
Tensor select_time(const Tensor& x, std::size_t t);                  // -> N x F
Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t end);  // -> N x (end-begin) x F
Tensor stack_time(const std::vector<Tensor>& steps);                 // T of N x F -> N x T x F

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar function of the given points. h is the step size.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& point, double h);

}  // namespace avatar
