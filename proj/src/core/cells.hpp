#pragma once

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace avatar {

// Weights are stored fan-in x fan-out so a step is matmul(x, W). Init draws
// from uniform(-k, k) with k = 1/sqrt(fan_in); biases start at zero.
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, SeededRng& rng);

struct GruCell {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w_update, u_update, b_update;        // z gate
    Tensor w_reset, u_reset, b_reset;           // r gate
    Tensor w_candidate, u_candidate, b_candidate;

    static GruCell create(std::size_t input_size, std::size_t hidden_size, SeededRng& rng);
    std::vector<Tensor> parameters();
    void collect_named(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out);
};

// z = sigm(x Wz + h Uz + bz); r = sigm(x Wr + h Ur + br);
// cand = tanh(x Wh + (r*h) Uh + bh); h' = z*h + (1-z)*cand.
Tensor gru_step(const GruCell& cell, const Tensor& x_t, const Tensor& h_prev);

struct LstmCell {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w_input, u_input, b_input;
    Tensor w_forget, u_forget, b_forget;
    Tensor w_output, u_output, b_output;
    Tensor w_cell, u_cell, b_cell;

    static LstmCell create(std::size_t input_size, std::size_t hidden_size, SeededRng& rng);
    std::vector<Tensor> parameters();
};

struct LstmStepResult {
    Tensor h;
    Tensor c;
};

// c' = f*c + i*g, h' = o*tanh(c') with i,f,o sigmoid gates and g = tanh gate.
LstmStepResult lstm_step(const LstmCell& cell, const Tensor& x_t, const Tensor& h_prev,
                         const Tensor& c_prev);

}  // namespace avatar
