#include "core/synthesis.hpp"

#include "core/common.hpp"

namespace avatar {

Tensor sample_prior(const PriorSpec& spec, SeededRng& rng) {
    require(spec.count >= 1 && spec.steps >= 1 && spec.latent_dim >= 1,
            ErrorCategory::invalid_argument, "sample_prior: shape must be positive");
    std::vector<double> values(spec.count * spec.steps * spec.latent_dim);
    for (double& v : values) v = rng.normal();
    return Tensor::from_values({spec.count, spec.steps, spec.latent_dim}, std::move(values));
}

SequenceBatch generate(AvatarModel& model, std::size_t n, std::size_t steps, SeededRng& rng,
                       bool refine, bool allow_untrained) {
    require(allow_untrained || model.trained, ErrorCategory::state,
            "generate: model has not been trained");
    require(n >= 1 && steps >= 1, ErrorCategory::invalid_argument,
            "generate: sample count and length must be positive");
    NoGradGuard inference;
    Tensor z = sample_prior({n, steps, model.dims.latent_dim}, rng);
    Tensor x = model.decoder.run(z, BnMode::inference);
    if (refine) x = model.supervisor.run(x, BnMode::inference);
    SequenceBatch batch = tensor_to_batch(x);
    Tape::active().clear();
    return batch;
}

SequenceBatch denormalize(const SequenceBatch& batch, const NormalizerState& state) {
    require(state.features() == batch.features, ErrorCategory::invalid_argument,
            "denormalize: normalizer has " + std::to_string(state.features()) +
                " features, batch has " + std::to_string(batch.features));
    SequenceBatch out = batch;
    for (std::size_t n = 0; n < batch.count; ++n)
        for (std::size_t t = 0; t < batch.steps; ++t)
            for (std::size_t f = 0; f < batch.features; ++f)
                out.at(n, t, f) = state.denormalize_value(batch.at(n, t, f), f);
    return out;
}

}  // namespace avatar
