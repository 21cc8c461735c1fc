#include "core/cells.hpp"

#include <cmath>

#include "core/common.hpp"

namespace avatar {

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
    require(fan_in > 0 && fan_out > 0, ErrorCategory::invalid_argument,
            "init_weight: dimensions must be positive");
    const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(fan_in * fan_out);
    for (double& x : v) x = rng.uniform(-k, k);
    return Tensor::from_values({fan_in, fan_out}, std::move(v), true);
}

namespace {

void check_step_shapes(const char* op, std::size_t input_size, std::size_t hidden_size,
                       const Tensor& x_t, const Tensor& h_prev) {
    require(x_t.rank() == 2 && x_t.dim(1) == input_size, ErrorCategory::invalid_argument,
            std::string(op) + ": input shape " + shape_to_string(x_t.shape()) +
                " does not match cell input size " + std::to_string(input_size));
    require(h_prev.rank() == 2 && h_prev.dim(1) == hidden_size &&
                h_prev.dim(0) == x_t.dim(0),
            ErrorCategory::invalid_argument,
            std::string(op) + ": hidden shape " + shape_to_string(h_prev.shape()) +
                " does not match input shape " + shape_to_string(x_t.shape()));
}

Tensor gate_preact(const Tensor& x, const Tensor& w, const Tensor& h, const Tensor& u,
                   const Tensor& b) {
    return add(add(matmul(x, w), matmul(h, u)), b);
}

}  // namespace

GruCell GruCell::create(std::size_t input_size, std::size_t hidden_size, SeededRng& rng) {
    require(input_size > 0 && hidden_size > 0, ErrorCategory::invalid_argument,
            "gru: sizes must be positive");
    GruCell c;
    c.input_size = input_size;
    c.hidden_size = hidden_size;
    c.w_update = init_weight(input_size, hidden_size, rng);
    c.u_update = init_weight(hidden_size, hidden_size, rng);
    c.b_update = Tensor::zeros({hidden_size}, true);
    c.w_reset = init_weight(input_size, hidden_size, rng);
    c.u_reset = init_weight(hidden_size, hidden_size, rng);
    c.b_reset = Tensor::zeros({hidden_size}, true);
    c.w_candidate = init_weight(input_size, hidden_size, rng);
    c.u_candidate = init_weight(hidden_size, hidden_size, rng);
    c.b_candidate = Tensor::zeros({hidden_size}, true);
    return c;
}

std::vector<Tensor> GruCell::parameters() {
    return {w_update, u_update, b_update, w_reset,     u_reset,     b_reset,
            w_candidate, u_candidate, b_candidate};
}

void GruCell::collect_named(const std::string& prefix,
                            std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(prefix + ".wz", w_update);
    out.emplace_back(prefix + ".uz", u_update);
    out.emplace_back(prefix + ".bz", b_update);
    out.emplace_back(prefix + ".wr", w_reset);
    out.emplace_back(prefix + ".ur", u_reset);
    out.emplace_back(prefix + ".br", b_reset);
    out.emplace_back(prefix + ".wh", w_candidate);
    out.emplace_back(prefix + ".uh", u_candidate);
    out.emplace_back(prefix + ".bh", b_candidate);
}

Tensor gru_step(const GruCell& cell, const Tensor& x_t, const Tensor& h_prev) {
    check_step_shapes("gru_step", cell.input_size, cell.hidden_size, x_t, h_prev);
    Tensor z = sigmoid(gate_preact(x_t, cell.w_update, h_prev, cell.u_update, cell.b_update));
    Tensor r = sigmoid(gate_preact(x_t, cell.w_reset, h_prev, cell.u_reset, cell.b_reset));
    Tensor candidate = tanh(add(
        add(matmul(x_t, cell.w_candidate), matmul(mul(r, h_prev), cell.u_candidate)),
        cell.b_candidate));
    // h' = z*h + (1-z)*cand
    return add(mul(z, h_prev), mul(affine(z, -1.0, 1.0), candidate));
}

LstmCell LstmCell::create(std::size_t input_size, std::size_t hidden_size, SeededRng& rng) {
    require(input_size > 0 && hidden_size > 0, ErrorCategory::invalid_argument,
            "lstm: sizes must be positive");
    LstmCell c;
    c.input_size = input_size;
    c.hidden_size = hidden_size;
    auto make = [&](Tensor& w, Tensor& u, Tensor& b) {
        w = init_weight(input_size, hidden_size, rng);
        u = init_weight(hidden_size, hidden_size, rng);
        b = Tensor::zeros({hidden_size}, true);
    };
    make(c.w_input, c.u_input, c.b_input);
    make(c.w_forget, c.u_forget, c.b_forget);
    make(c.w_output, c.u_output, c.b_output);
    make(c.w_cell, c.u_cell, c.b_cell);
    return c;
}

std::vector<Tensor> LstmCell::parameters() {
    return {w_input, u_input, b_input, w_forget, u_forget, b_forget,
            w_output, u_output, b_output, w_cell, u_cell, b_cell};
}

LstmStepResult lstm_step(const LstmCell& cell, const Tensor& x_t, const Tensor& h_prev,
                         const Tensor& c_prev) {
    check_step_shapes("lstm_step", cell.input_size, cell.hidden_size, x_t, h_prev);
    require(c_prev.rank() == 2 && c_prev.dim(0) == h_prev.dim(0) &&
                c_prev.dim(1) == cell.hidden_size,
            ErrorCategory::invalid_argument,
            "lstm_step: cell state shape " + shape_to_string(c_prev.shape()) +
                " does not match hidden shape " + shape_to_string(h_prev.shape()));
    Tensor i = sigmoid(gate_preact(x_t, cell.w_input, h_prev, cell.u_input, cell.b_input));
    Tensor f = sigmoid(gate_preact(x_t, cell.w_forget, h_prev, cell.u_forget, cell.b_forget));
    Tensor o = sigmoid(gate_preact(x_t, cell.w_output, h_prev, cell.u_output, cell.b_output));
    Tensor g = tanh(gate_preact(x_t, cell.w_cell, h_prev, cell.u_cell, cell.b_cell));
    Tensor c = add(mul(f, c_prev), mul(i, g));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

}  // namespace avatar
