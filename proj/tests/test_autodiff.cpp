#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/adam.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace avatar;

namespace {

Tensor random_tensor(Shape shape, SeededRng& rng, bool requires_grad = false, double lo = -1.0,
                     double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("rng is deterministic and portable") {
    SeededRng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    SeededRng c(1234);
    SeededRng d(4321);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) any_diff = any_diff || (c.next_u64() != d.next_u64());
    CHECK(any_diff);
}

TEST_CASE("rng uniform range and gaussian moments") {
    SeededRng rng(99);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::fabs(sum / n - 0.5) < 0.01);

    sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.normal();
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("rng state save/restore resumes the stream") {
    SeededRng rng(5);
    for (int i = 0; i < 17; ++i) rng.next_u64();
    const auto state = rng.state();
    std::vector<std::uint64_t> expect;
    for (int i = 0; i < 10; ++i) expect.push_back(rng.next_u64());

    SeededRng other(0);
    other.set_state(state);
    for (int i = 0; i < 10; ++i) CHECK(other.next_u64() == expect[i]);
}

TEST_CASE("forward op examples") {
    CHECK(sigmoid(Tensor::scalar(0.0)).scalar_value() == doctest::Approx(0.5));

    SeededRng rng(1);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor prod = matmul(eye, a);
    for (std::size_t i = 0; i < 9; ++i) CHECK(prod.at(i) == doctest::Approx(a.at(i)));

    Tensor v = Tensor::from_values({4}, {1, 2, 3, 4});
    CHECK(mean(v, 0).scalar_value() == doctest::Approx(2.5));
}

TEST_CASE("shape and domain violations are rejected") {
    Tensor a = Tensor::from_values({2, 3}, std::vector<double>(6, 1.0));
    Tensor b = Tensor::from_values({2, 4}, std::vector<double>(8, 1.0));
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), Error);
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,4]"), Error);
    CHECK_THROWS_WITH_AS(matmul(a, a), doctest::Contains("matmul"), Error);

    Tensor neg = Tensor::scalar(-1.0);
    CHECK_THROWS_WITH_AS(log(neg), doctest::Contains("log"), Error);
    CHECK_THROWS_WITH_AS(sqrt(neg), doctest::Contains("sqrt"), Error);
    CHECK_THROWS_WITH_AS(div(neg, Tensor::scalar(0.0)), doctest::Contains("div"), Error);
}

TEST_CASE("broadcast result equals explicit expansion") {
    SeededRng rng(7);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor bias = random_tensor({4}, rng);

    Tensor broadcast_sum = add(x, bias);
    std::vector<double> expanded(2 * 3 * 4);
    for (std::size_t i = 0; i < 2 * 3; ++i)
        for (std::size_t f = 0; f < 4; ++f) expanded[i * 4 + f] = bias.at(f);
    Tensor manual = add(x, Tensor::from_values({2, 3, 4}, std::move(expanded)));
    for (std::size_t i = 0; i < broadcast_sum.numel(); ++i)
        CHECK(broadcast_sum.at(i) == manual.at(i));

    // Keepdims row vector against full tensor.
    Tensor row = random_tensor({1, 3, 1}, rng);
    Tensor prod = mul(x, row);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t f = 0; f < 4; ++f)
                CHECK(prod.at((n * 3 + t) * 4 + f) ==
                      doctest::Approx(x.at((n * 3 + t) * 4 + f) * row.at(t)));
}

TEST_CASE("backward on simple analytic cases") {
    Tape::active().clear();
    Tensor x = Tensor::scalar(3.0, true);
    Tensor y = square(x);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    // root = sum(a*b) => grad a = b
    Tape::active().clear();
    SeededRng rng(3);
    Tensor a = random_tensor({2, 3}, rng, true);
    Tensor b = random_tensor({2, 3}, rng);
    backward(sum(mul(a, b)));
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.grad()[i] == doctest::Approx(b.at(i)));
    Tape::active().clear();
}

TEST_CASE("backward rejects non-scalar roots and empty tapes") {
    Tape::active().clear();
    Tensor a = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor b = affine(a, 2.0, 0.0);
    CHECK_THROWS_AS(backward(b), Error);
    Tape::active().clear();
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0, true)), Error);
}

TEST_CASE("repeated backward accumulates") {
    Tape::active().clear();
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = square(x);
    backward(y);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    Tape::active().clear();
}

TEST_CASE("tape linearity: backward visits each op exactly once") {
    Tape::active().clear();
    SeededRng rng(11);
    Tensor a = random_tensor({4, 4}, rng, true);
    Tensor b = random_tensor({4, 4}, rng, true);
    Tensor c = mul(add(a, b), sub(a, b));
    Tensor loss = sum(square(c));
    const std::size_t ops = Tape::active().op_count();
    CHECK(ops == 5);
    backward(loss);
    CHECK(Tape::active().last_backward_visits() == ops);
    Tape::active().clear();
}

TEST_CASE("no-grad guard suppresses recording") {
    Tape::active().clear();
    Tensor a = Tensor::scalar(1.5, true);
    {
        NoGradGuard guard;
        Tensor b = square(a);
        CHECK_FALSE(b.requires_grad());
    }
    CHECK(Tape::active().op_count() == 0);
}

TEST_CASE("finite-difference agreement across all differentiable ops") {
    SeededRng rng(42);
    struct Case {
        const char* name;
        std::function<Tensor(const std::vector<Tensor>&)> f;
        std::vector<Shape> shapes;
        double lo, hi;
    };
    const std::vector<Case> cases = {
        {"add", [](const std::vector<Tensor>& p) { return sum(add(p[0], p[1])); },
         {{2, 3}, {2, 3}}, -1.0, 1.0},
        {"sub_bcast", [](const std::vector<Tensor>& p) { return sum(square(sub(p[0], p[1]))); },
         {{2, 3}, {3}}, -1.0, 1.0},
        {"mul", [](const std::vector<Tensor>& p) { return sum(mul(p[0], p[1])); },
         {{2, 2, 2}, {2, 2, 2}}, -1.0, 1.0},
        {"div", [](const std::vector<Tensor>& p) { return sum(div(p[0], p[1])); },
         {{2, 3}, {2, 3}}, 0.5, 2.0},
        {"matmul", [](const std::vector<Tensor>& p) { return sum(square(matmul(p[0], p[1]))); },
         {{3, 4}, {4, 2}}, -1.0, 1.0},
        {"matmul3", [](const std::vector<Tensor>& p) { return sum(matmul(p[0], p[1])); },
         {{2, 3, 4}, {4, 2}}, -1.0, 1.0},
        {"sigmoid", [](const std::vector<Tensor>& p) { return sum(sigmoid(p[0])); },
         {{5}}, -2.0, 2.0},
        {"tanh", [](const std::vector<Tensor>& p) { return sum(tanh(p[0])); }, {{5}}, -2.0, 2.0},
        {"exp", [](const std::vector<Tensor>& p) { return sum(exp(p[0])); }, {{5}}, -1.0, 1.0},
        {"log", [](const std::vector<Tensor>& p) { return sum(log(p[0])); }, {{5}}, 0.5, 3.0},
        {"square", [](const std::vector<Tensor>& p) { return sum(square(p[0])); },
         {{5}}, -2.0, 2.0},
        {"sqrt", [](const std::vector<Tensor>& p) { return sum(sqrt(p[0])); }, {{5}}, 0.5, 3.0},
        {"abs", [](const std::vector<Tensor>& p) { return sum(abs(p[0])); }, {{5}}, 0.3, 2.0},
        {"mean_axis", [](const std::vector<Tensor>& p) { return sum(square(mean(p[0], 1))); },
         {{3, 4}}, -1.0, 1.0},
        {"sum_keepdims",
         [](const std::vector<Tensor>& p) { return sum(square(sum(p[0], 0, true))); },
         {{3, 4}}, -1.0, 1.0},
        {"slice_stack",
         [](const std::vector<Tensor>& p) {
             Tensor s = slice_time(p[0], 1, 3);
             return sum(mul(s, s));
         },
         {{2, 4, 3}}, -1.0, 1.0},
        {"select_concat",
         [](const std::vector<Tensor>& p) {
             return sum(square(concat(select_time(p[0], 0), select_time(p[0], 2), 1)));
         },
         {{2, 4, 3}}, -1.0, 1.0},
        {"affine_clamp",
         [](const std::vector<Tensor>& p) { return sum(clamp(affine(p[0], 2.0, -0.5), 0.05, 0.95)); },
         {{6}}, 0.0, 1.0},
    };

    for (const Case& c : cases) {
        CAPTURE(c.name);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<Tensor> point;
            for (const Shape& s : c.shapes) point.push_back(random_tensor(s, rng, false, c.lo, c.hi));
            const double err = grad_check(c.f, point, 1e-5);
            CHECK(err < 1e-5);
        }
    }
}

TEST_CASE("grad_check examples") {
    // f(x) = x^2 at x = 3
    auto square_fn = [](const std::vector<Tensor>& p) { return square(p[0]); };
    CHECK(grad_check(square_fn, {Tensor::scalar(3.0)}, 1e-5) < 1e-8);

    // constant f has zero analytic and numeric gradients
    auto const_fn = [](const std::vector<Tensor>& p) { return mul(sum(p[0]), Tensor::scalar(0.0)); };
    CHECK(grad_check(const_fn, {Tensor::from_values({3}, {1, 2, 3})}, 1e-5) == doctest::Approx(0.0));

    auto bad_fn = [](const std::vector<Tensor>& p) { return log(p[0]); };
    CHECK_THROWS_AS(grad_check(bad_fn, {Tensor::scalar(1e-6)}, 1e-5), Error);
}

TEST_CASE("determinism: same seed, same graph, bit-identical values and grads") {
    auto run = [] {
        Tape::active().clear();
        SeededRng rng(2024);
        Tensor a = random_tensor({4, 5}, rng, true);
        Tensor b = random_tensor({5, 3}, rng, true);
        Tensor loss = sum(square(sigmoid(matmul(a, b))));
        backward(loss);
        std::vector<double> out(a.grad().begin(), a.grad().end());
        out.insert(out.end(), b.grad().begin(), b.grad().end());
        out.push_back(loss.scalar_value());
        Tape::active().clear();
        return out;
    };
    const auto r1 = run();
    const auto r2 = run();
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<Tensor> params = {Tensor::from_values({3}, {1.0, -2.0, 0.5}, true)};
    params[0].grad_mut();  // zero-filled
    AdamState adam(0.1);
    adam.step(params);
    CHECK(params[0].at(0) == doctest::Approx(1.0));
    CHECK(params[0].at(1) == doctest::Approx(-2.0));
    CHECK(params[0].at(2) == doctest::Approx(0.5));
    CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first step moves by roughly lr * sign(grad)") {
    std::vector<Tensor> params = {Tensor::from_values({1}, {1.0}, true)};
    params[0].grad_mut()[0] = 1.0;
    AdamState adam(0.1, 0.9, 0.999, 1e-8);
    adam.step(params);
    // m_hat = 1, v_hat = 1 => p = 1 - 0.1 * 1/(1 + 1e-8)
    CHECK(params[0].at(0) == doctest::Approx(0.9).epsilon(1e-6));
    // gradient must be zeroed afterwards
    CHECK(params[0].grad()[0] == 0.0);
}

TEST_CASE("adam: two constant-gradient steps match the hand recurrence") {
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.7;
    std::vector<Tensor> params = {Tensor::from_values({1}, {2.0}, true)};
    AdamState adam(lr, b1, b2, eps);

    double p = 2.0, m = 0.0, v = 0.0;
    for (int step = 1; step <= 2; ++step) {
        params[0].grad_mut()[0] = g;
        adam.step(params);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double m_hat = m / (1 - std::pow(b1, step));
        const double v_hat = v / (1 - std::pow(b2, step));
        p -= lr * m_hat / (std::sqrt(v_hat) + eps);
        CHECK(params[0].at(0) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("adam rejects missing gradients") {
    std::vector<Tensor> params = {Tensor::from_values({2}, {1.0, 1.0}, true)};
    AdamState adam;
    CHECK_THROWS_AS(adam.step(params), Error);
}
