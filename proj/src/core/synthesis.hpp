#pragma once

#include "core/data.hpp"
#include "core/network.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace avatar {

// Standard normal latent sequences, i.i.d. per element.
struct PriorSpec {
    std::size_t count = 0;
    std::size_t steps = 0;
    std::size_t latent_dim = 0;
};

Tensor sample_prior(const PriorSpec& spec, SeededRng& rng);

// Decode prior samples into normalized sequences; when refine is set the
// decoded sequence additionally passes through the supervisor. Runs in
// inference mode and never mutates the model. allow_untrained exists for
// baseline measurements against freshly initialized models.
SequenceBatch generate(AvatarModel& model, std::size_t n, std::size_t steps, SeededRng& rng,
                       bool refine, bool allow_untrained = false);

// Exact inverse of the min-max normalization, epsilon included.
SequenceBatch denormalize(const SequenceBatch& batch, const NormalizerState& state);

}  // namespace avatar
