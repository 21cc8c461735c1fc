#pragma once

#include <array>
#include <cstdint>

namespace avatar {

// Deterministic xoshiro256** generator seeded through splitmix64.
// The draw sequence depends only on the 64-bit seed, so runs reproduce
// bit-identically across platforms. Gaussians come from Box-Muller on the
// uniform stream; no spare value is cached, which keeps the serialized
// state equal to the four state words.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal draw; consumes exactly two uniforms.
    double normal();

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    std::uint64_t seed() const { return seed_; }
    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace avatar
