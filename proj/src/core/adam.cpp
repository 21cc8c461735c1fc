#include "core/adam.hpp"

#include <cmath>

#include "core/common.hpp"

namespace avatar {

AdamState::AdamState(double learning_rate, double beta1, double beta2, double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamState::step(std::vector<Tensor>& params) {
    if (m_.empty()) {
        for (const Tensor& p : params) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }
    require(m_.size() == params.size(), ErrorCategory::invalid_argument,
            "adam: parameter count changed since state creation");

    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        require(p.has_grad(), ErrorCategory::state, "adam: parameter is missing its gradient");
        require(m_[pi].size() == p.numel(), ErrorCategory::invalid_argument,
                "adam: moment shape does not match parameter");
        auto values = p.values_mut();
        auto grad = p.grad_mut();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            values[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
        p.zero_grad();
    }
}

void AdamState::restore(std::uint64_t step_count, std::vector<std::vector<double>> m,
                        std::vector<std::vector<double>> v) {
    require(m.size() == v.size(), ErrorCategory::invalid_argument,
            "adam: moment lists must have equal length");
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace avatar
