#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "core/checkpoint.hpp"
#include "core/data.hpp"
#include "core/eval.hpp"
#include "core/train.hpp"

namespace avatar {

struct DatasetSpec {
    std::string kind = "sines";  // sines | stocks | energy | custom
    std::string path;            // CSV for non-sine kinds
    std::size_t sine_count = 1000;
    std::size_t sine_steps = 24;
    std::size_t sine_dims = 4;
    std::size_t window = 24;
    std::size_t stride = 1;
};

// Everything a run needs; parsed from JSON with hard errors on unknown keys
// so hyperparameter typos cannot pass silently.
struct ExperimentConfig {
    DatasetSpec dataset;
    TrainConfig train;
    EvalConfig eval;
    std::string out_dir = "avatar_run";
    std::uint64_t seed = 7;

    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;  // fully resolved, defaults included
    void validate() const;
};

struct PreparedDataset {
    SequenceBatch batch;  // normalized to [0, 1]
    NormalizerState normalizer;
};

PreparedDataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Fit a per-feature min/max normalizer over an already-sliced batch.
NormalizerState fit_normalizer(const SequenceBatch& batch);
SequenceBatch apply_normalizer(const SequenceBatch& batch, const NormalizerState& state,
                               bool clamp_unit_interval);

struct TrainRunResult {
    std::string checkpoint_path;
    std::string trainlog_path;
    std::string resolved_config_path;
    std::string train_data_path;
    bool diverged = false;
};

// Runs the staged training per the config's ablation plan and writes
// model.ckpt, trainlog.csv, resolved.json and train_data.csv into out_dir.
// The returned bundle keeps the trained state for further in-process use.
struct TrainRunOutput {
    TrainRunResult files;
    CheckpointBundle bundle;
};
TrainRunOutput train_run(const ExperimentConfig& config,
                         const std::optional<std::string>& resume_checkpoint = std::nullopt);

// Loads a checkpoint and writes n generated sequences as CSV. refine defaults
// to true but is forced off for models trained without the supervisor.
void generate_run(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                  std::optional<bool> refine, bool normalized_output, const std::string& out_csv);
SequenceBatch generate_from_bundle(CheckpointBundle& bundle, std::size_t n, std::uint64_t seed,
                                   std::optional<bool> refine);

struct EvaluateOptions {
    std::size_t repeats = 10;
    std::uint64_t seed = 7;
    std::size_t window = 24;  // used when an input file is a raw series
    std::size_t stride = 1;
    double perplexity = 30.0;
    std::size_t tsne_iters = 1000;
    bool with_scores = true;
    bool with_projections = true;
};

// Loads both datasets (batch CSV or raw series CSV, detected by header),
// rescales both sides by the real data's per-feature min/max, and runs the
// evaluation protocol.
EvalReport evaluate_run(const std::string& real_csv, const std::string& synth_csv,
                        const EvaluateOptions& options,
                        const std::optional<std::string>& scores_csv,
                        const std::optional<std::string>& projections_csv);

// Loads a dataset file of either CSV layout in real units.
SequenceBatch load_dataset_file(const std::string& path, std::size_t window, std::size_t stride);

}  // namespace avatar
