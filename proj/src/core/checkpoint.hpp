#pragma once

#include <memory>
#include <string>

#include "core/data.hpp"
#include "core/train.hpp"

namespace avatar {

// Binary checkpoint: fixed header, JSON manifest of named tensors
// (name, shape, offset), then one flat blob of little-endian doubles that the
// manifest entries tile exactly. Covers model parameters, batch-norm running
// stats, optimizer moments, the normalizer, RNG state, and train progress,
// so a load is bit-exact and training can resume.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBundle {
    std::unique_ptr<Trainer> trainer;
    NormalizerState normalizer;
    std::size_t sequence_steps = 0;
};

void save_checkpoint(const std::string& path, Trainer& trainer, const NormalizerState& normalizer,
                     std::size_t sequence_steps);

CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace avatar
