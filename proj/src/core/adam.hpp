#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace avatar {

// Adam with bias correction. One state covers an ordered parameter list;
// moment slots are allocated on first use and stay aligned with it.
class AdamState {
public:
    explicit AdamState(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                       double epsilon = 1e-8);

    // Applies one update to every parameter, then zeroes their gradients.
    // Every parameter must carry a populated gradient.
    void step(std::vector<Tensor>& params);

    std::uint64_t step_count() const { return step_count_; }
    double learning_rate() const { return learning_rate_; }

    // Serialized view for checkpointing: per-parameter first/second moments.
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(std::uint64_t step_count, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

private:
    double learning_rate_;
    double beta1_;
    double beta2_;
    double epsilon_;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace avatar
