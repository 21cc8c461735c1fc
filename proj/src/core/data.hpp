#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace avatar {

// A continuous multivariate series: steps x features, row-major.
struct RawSeries {
    std::vector<std::string> feature_names;
    std::size_t steps = 0;
    std::size_t features = 0;
    std::vector<double> values;
    std::string source = "custom";

    double at(std::size_t t, std::size_t f) const { return values[t * features + f]; }
};

// Per-feature min/max captured on training data. Normalization maps x to
// (x - min) / (max - min + eps); the epsilon keeps constant features finite
// and the output inside [0, 1).
struct NormalizerState {
    static constexpr double kEpsilon = 1e-7;
    std::vector<double> mins;
    std::vector<double> maxs;

    std::size_t features() const { return mins.size(); }
    double normalize_value(double x, std::size_t f) const {
        return (x - mins[f]) / (maxs[f] - mins[f] + kEpsilon);
    }
    double denormalize_value(double v, std::size_t f) const {
        return v * (maxs[f] - mins[f] + kEpsilon) + mins[f];
    }
};

// N sequences x T steps x F features, values in [0, 1].
struct SequenceBatch {
    std::size_t count = 0;
    std::size_t steps = 0;
    std::size_t features = 0;
    std::vector<double> values;

    static SequenceBatch empty(std::size_t count, std::size_t steps, std::size_t features);
    double at(std::size_t n, std::size_t t, std::size_t f) const {
        return values[(n * steps + t) * features + f];
    }
    double& at(std::size_t n, std::size_t t, std::size_t f) {
        return values[(n * steps + t) * features + f];
    }
};

// CSV with a header of feature names and one row per time step, in file
// order. Parsing is locale-independent (dot decimal separator).
RawSeries load_csv(const std::string& path);

std::pair<RawSeries, NormalizerState> minmax_normalize(const RawSeries& series);

SequenceBatch slice_windows(const RawSeries& series, std::size_t window, std::size_t stride = 1);

struct SineParams {
    double frequency = 0.0;  // eta ~ U[0, 1]
    double phase = 0.0;      // theta ~ U[-pi, pi]
};

// x_i(t) = sin(2 pi eta t + theta) per sample and dimension, rescaled to
// [0, 1] via (x + 1) / 2. Draw order per sample, per dimension: eta, theta.
SequenceBatch generate_sines(std::size_t n, std::size_t t, std::size_t dims, SeededRng& rng,
                             std::vector<SineParams>* params_out = nullptr);

// Normalizer matching the sine rescale, so denormalization maps back to the
// raw [-1, 1] signal range.
NormalizerState sine_normalizer(std::size_t dims);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded shuffle followed by a disjoint train/test split.
SplitIndices split_shuffle(std::size_t count, double train_frac, SeededRng& rng);

// Mini-batch sampling: indices drawn uniformly with replacement from pool.
std::vector<std::size_t> sample_batch(const std::vector<std::size_t>& pool, std::size_t batch_size,
                                      SeededRng& rng);

// Gather selected sequences into an N x T x F tensor (no gradient).
Tensor batch_to_tensor(const SequenceBatch& batch, const std::vector<std::size_t>& indices);
Tensor batch_to_tensor(const SequenceBatch& batch);
SequenceBatch tensor_to_batch(const Tensor& t);

// Batch CSV: header `sample_id,t,f0,...`, one row per (sample, step). Values
// are written exactly as stored; callers denormalize first when exporting
// real-unit sequences.
void write_batch_csv(const std::string& path, const SequenceBatch& batch);
SequenceBatch read_batch_csv(const std::string& path);

}  // namespace avatar
