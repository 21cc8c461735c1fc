#pragma once

#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/projection.hpp"
#include "core/rng.hpp"

namespace avatar {

struct EvalConfig {
    std::size_t repeats = 10;
    std::size_t classifier_iters = 1500;
    std::size_t predictor_iters = 1500;
    std::size_t batch_size = 128;
    double train_frac = 0.8;
    double learning_rate = 1e-3;
    double perplexity = 30.0;
    std::size_t tsne_iters = 1000;
    std::size_t max_projection_samples = 1000;  // per side

    void validate() const;
};

// |0.5 - test error| of an LSTM classifier separating real from synthetic
// sequences; 0 is ideal, 0.5 means trivially separable. Both batches must be
// normalized to [0, 1] on a shared scale.
double resemblance_score(const SequenceBatch& real, const SequenceBatch& synth,
                         const EvalConfig& config, SeededRng& rng);

// Train-on-synthetic test-on-real: MAE per element of an LSTM next-step
// predictor trained on synth and evaluated on real.
double predictive_fidelity(const SequenceBatch& real, const SequenceBatch& synth,
                           const EvalConfig& config, SeededRng& rng);

// Mean over features per time step: N x T x F -> N x T (row-major).
std::vector<double> temporal_flatten(const SequenceBatch& batch);

struct ProjectionRow {
    std::string method;  // "pca" | "tsne"
    double x = 0.0;
    double y = 0.0;
    bool synthetic = false;
};

struct EvalReport {
    double resemblance_mean = 0.0;
    double resemblance_std = 0.0;
    double fidelity_mean = 0.0;
    double fidelity_std = 0.0;
    std::size_t repeats = 0;
    std::vector<double> resemblance_runs;
    std::vector<double> fidelity_runs;
    std::vector<ProjectionRow> projections;
};

// Repeats both scores with per-repeat seeds (master seed + repeat index) and
// reports mean and population std; projections are computed once on up to
// max_projection_samples sequences per side.
EvalReport run_full_evaluation(const SequenceBatch& real, const SequenceBatch& synth,
                               const EvalConfig& config, std::uint64_t master_seed,
                               bool with_scores = true, bool with_projections = true);

void write_scores_csv(const std::string& path, const EvalReport& report);
void write_projections_csv(const std::string& path, const std::vector<ProjectionRow>& rows);

}  // namespace avatar
