#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/synthesis.hpp"

using namespace avatar;

TEST_CASE("sample_prior determinism and moments") {
    SeededRng a(404), b(404);
    Tensor za = sample_prior({3, 5, 4}, a);
    Tensor zb = sample_prior({3, 5, 4}, b);
    REQUIRE(za.shape() == Shape{3, 5, 4});
    for (std::size_t i = 0; i < za.numel(); ++i) CHECK(za.at(i) == zb.at(i));

    SeededRng rng(7);
    Tensor big = sample_prior({100, 100, 10}, rng);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < big.numel(); ++i) {
        sum += big.at(i);
        sum_sq += big.at(i) * big.at(i);
    }
    const double n = static_cast<double>(big.numel());
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::fabs(var - 1.0) < 0.05);

    CHECK_THROWS_AS(sample_prior({0, 5, 4}, rng), Error);
}

TEST_CASE("generate shape, range and refine contract") {
    ModelDims dims;
    dims.feature_dim = 4;
    dims.hidden_size = 8;
    dims.layer_count = 2;
    dims.latent_dim = 6;
    SeededRng init_rng(21);
    AvatarModel model = AvatarModel::init(dims, init_rng);
    model.trained = true;

    SeededRng gen_rng(5);
    SequenceBatch out = generate(model, 7, 10, gen_rng, true);
    CHECK(out.count == 7);
    CHECK(out.steps == 10);
    CHECK(out.features == 4);
    for (double v : out.values) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    // refine=false must equal the raw decoder output on the same prior.
    SeededRng rng_refined(9), rng_raw(9);
    SequenceBatch refined = generate(model, 3, 10, rng_refined, true);
    SequenceBatch raw = generate(model, 3, 10, rng_raw, false);
    {
        NoGradGuard inference;
        SeededRng rng_manual(9);
        Tensor z = sample_prior({3, 10, 6}, rng_manual);
        Tensor decoded = model.decoder.run(z, BnMode::inference);
        SequenceBatch decoded_batch = tensor_to_batch(decoded);
        for (std::size_t i = 0; i < raw.values.size(); ++i)
            CHECK(raw.values[i] == doctest::Approx(decoded_batch.values[i]).epsilon(1e-12));
        Tensor refined_manual = model.supervisor.run(decoded, BnMode::inference);
        SequenceBatch refined_batch = tensor_to_batch(refined_manual);
        for (std::size_t i = 0; i < refined.values.size(); ++i)
            CHECK(refined.values[i] == doctest::Approx(refined_batch.values[i]).epsilon(1e-12));
        Tape::active().clear();
    }
}

TEST_CASE("generate rejects untrained models unless overridden") {
    ModelDims dims;
    dims.feature_dim = 2;
    dims.hidden_size = 4;
    dims.layer_count = 1;
    dims.latent_dim = 3;
    SeededRng rng(3);
    AvatarModel model = AvatarModel::init(dims, rng);
    SeededRng gen_rng(1);
    CHECK_THROWS_AS(generate(model, 2, 6, gen_rng, true), Error);
    SequenceBatch out = generate(model, 2, 6, gen_rng, true, /*allow_untrained=*/true);
    CHECK(out.count == 2);
}

TEST_CASE("zero-weight decoder produces 0.5 everywhere regardless of the prior") {
    ModelDims dims;
    dims.feature_dim = 3;
    dims.hidden_size = 4;
    dims.layer_count = 1;
    dims.latent_dim = 2;
    SeededRng rng(17);
    AvatarModel model = AvatarModel::init(dims, rng);
    model.trained = true;
    for (Tensor& p : model.decoder.parameters())
        for (double& v : p.values_mut()) v = 0.0;
    // Keep batch-norm pass-through: gamma is zeroed above, set it back to 1.
    for (StackLayer& layer : model.decoder.layers)
        if (layer.batch_norm)
            for (double& v : layer.batch_norm->gamma.values_mut()) v = 1.0;

    SeededRng g1(1), g2(9999);
    SequenceBatch a = generate(model, 2, 5, g1, false);
    SequenceBatch b = generate(model, 2, 5, g2, false);
    for (double v : a.values) CHECK(v == doctest::Approx(0.5));
    for (double v : b.values) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("generation is exchangeable over prior samples") {
    ModelDims dims;
    dims.feature_dim = 2;
    dims.hidden_size = 5;
    dims.layer_count = 2;
    dims.latent_dim = 3;
    SeededRng rng(23);
    AvatarModel model = AvatarModel::init(dims, rng);

    NoGradGuard inference;
    SeededRng prior_rng(77);
    Tensor z = sample_prior({4, 6, 3}, prior_rng);

    // Reverse the batch order of the prior and decode both.
    std::vector<double> reversed(z.numel());
    const std::size_t stride = 6 * 3;
    for (std::size_t n = 0; n < 4; ++n)
        std::copy_n(z.values().data() + n * stride, stride,
                    reversed.data() + (3 - n) * stride);
    Tensor z_rev = Tensor::from_values({4, 6, 3}, std::move(reversed));

    SequenceBatch out = tensor_to_batch(model.decoder.run(z, BnMode::inference));
    SequenceBatch out_rev = tensor_to_batch(model.decoder.run(z_rev, BnMode::inference));
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t t = 0; t < 6; ++t)
            for (std::size_t f = 0; f < 2; ++f)
                CHECK(out.at(n, t, f) == doctest::Approx(out_rev.at(3 - n, t, f)).epsilon(1e-12));
    Tape::active().clear();
}

TEST_CASE("generation does not mutate parameters or running statistics") {
    ModelDims dims;
    dims.feature_dim = 3;
    dims.hidden_size = 6;
    dims.layer_count = 2;
    dims.latent_dim = 4;
    SeededRng rng(31);
    AvatarModel model = AvatarModel::init(dims, rng);
    model.trained = true;

    const std::uint64_t params_before = parameter_fingerprint(model.all_parameters());
    std::vector<std::vector<double>> buffers_before;
    for (auto& [name, buf] : model.named_buffers()) buffers_before.push_back(*buf);

    SeededRng gen_rng(2);
    generate(model, 5, 8, gen_rng, true);

    CHECK(parameter_fingerprint(model.all_parameters()) == params_before);
    std::size_t i = 0;
    for (auto& [name, buf] : model.named_buffers()) CHECK(*buf == buffers_before[i++]);
}

TEST_CASE("denormalize round trip and feature mismatch") {
    NormalizerState state;
    state.mins = {-2.0, 10.0};
    state.maxs = {6.0, 10.0};  // second feature constant

    SequenceBatch batch = SequenceBatch::empty(2, 3, 2);
    SeededRng rng(12);
    for (double& v : batch.values) v = rng.uniform();

    SequenceBatch real_units = denormalize(batch, state);
    // value 0 -> feature min
    SequenceBatch zeros = SequenceBatch::empty(1, 1, 2);
    SequenceBatch z_dn = denormalize(zeros, state);
    CHECK(z_dn.at(0, 0, 0) == doctest::Approx(-2.0));
    CHECK(z_dn.at(0, 0, 1) == doctest::Approx(10.0));

    // value 1 -> feature max plus the epsilon-scaled residual
    SequenceBatch ones = SequenceBatch::empty(1, 1, 2);
    ones.values = {1.0, 1.0};
    SequenceBatch o_dn = denormalize(ones, state);
    CHECK(o_dn.at(0, 0, 0) == doctest::Approx(6.0).epsilon(1e-6));

    // round trip normalize(denormalize(v)) recovers v; the epsilon guard on
    // the constant feature costs a few digits, hence the 1e-6 bound
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t f = 0; f < 2; ++f) {
                const double v = state.normalize_value(real_units.at(n, t, f), f);
                CHECK(v == doctest::Approx(batch.at(n, t, f)).epsilon(1e-6));
            }

    NormalizerState wrong;
    wrong.mins = {0.0};
    wrong.maxs = {1.0};
    CHECK_THROWS_AS(denormalize(batch, wrong), Error);
}
