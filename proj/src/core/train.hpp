#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/data.hpp"
#include "core/losses.hpp"
#include "core/network.hpp"
#include "core/rng.hpp"

namespace avatar {

struct TrainConfig {
    std::uint64_t stage1_iters = 2000;
    std::uint64_t stage2_iters = 2000;
    std::uint64_t stage3_iters = 5000;  // scheduling units, one discriminator step each
    std::size_t batch_size = 32;
    std::size_t hidden_size = 24;
    std::size_t layer_count = 3;
    std::size_t latent_dim = 24;
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;
    std::uint64_t disc_ratio = 2;  // encoder steps per discriminator step
    bool disable_al = false;       // no supervisor, no supervised loss, no refinement
    bool disable_dl = false;       // drop the distribution loss
    bool disable_jt = false;       // split phase A into separate updates
    bool disable_rg = false;       // plain GRU stacks, no batch norm

    void validate() const;
    ModelDims model_dims(std::size_t feature_dim) const;
};

// Resolved training plan after applying the ablation flags.
struct AblationPlan {
    bool use_supervisor = true;
    bool run_stage2 = true;
    bool use_distribution_loss = true;
    bool joint_update = true;
    bool use_batch_norm = true;

    static AblationPlan from(const TrainConfig& config);
};

struct TrainRecord {
    int stage = 0;
    std::uint64_t iter = 0;  // 1-based within the stage; stage 3 counts units
    LossBreakdown losses;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::uint64_t phase_a_steps = 0;
    std::uint64_t phase_b_steps = 0;

    void write_csv(const std::string& path) const;
};

// Position of the next unit of work; stage 4 means training is complete.
struct TrainProgress {
    int stage = 1;
    std::uint64_t iter = 0;  // completed iterations in the current stage

    bool complete() const { return stage > 3; }
};

// Owns the model, the per-network Adam states, and the run RNG, and drives
// the three training stages. Deterministic for a fixed config.
class Trainer {
public:
    Trainer(const TrainConfig& config, std::size_t feature_dim);

    // Runs from the current progress point until training completes, or until
    // max_records new log records have been appended (used for resumption
    // tests and checkpoint-interval training).
    void run(const SequenceBatch& data, std::optional<std::uint64_t> max_records = std::nullopt);

    const TrainConfig& config() const { return config_; }
    const AblationPlan& plan() const { return plan_; }
    const TrainLog& log() const { return log_; }
    const TrainProgress& progress() const { return progress_; }
    AvatarModel& model() { return model_; }
    const AvatarModel& model() const { return model_; }
    SeededRng& rng() { return rng_; }

    AdamState& adam_encoder() { return adam_encoder_; }
    AdamState& adam_decoder() { return adam_decoder_; }
    AdamState& adam_supervisor() { return adam_supervisor_; }
    AdamState& adam_discriminator() { return adam_discriminator_; }

    // Restoration hooks for checkpoint loading.
    void set_progress(const TrainProgress& p) { progress_ = p; }
    void set_rng_state(const std::array<std::uint64_t, 4>& s) { rng_.set_state(s); }

private:
    LossBreakdown stage1_step(const SequenceBatch& data);
    LossBreakdown stage2_step(const SequenceBatch& data);
    LossBreakdown stage3_phase_a(const SequenceBatch& data);
    double stage3_phase_b(const SequenceBatch& data);

    Tensor sample_data_tensor(const SequenceBatch& data);
    Tensor sample_prior_tensor(std::size_t steps);
    static double checked_scalar(const Tensor& loss, const char* what);

    TrainConfig config_;
    AblationPlan plan_;
    AvatarModel model_;
    SeededRng rng_;
    AdamState adam_encoder_;
    AdamState adam_decoder_;
    AdamState adam_supervisor_;
    AdamState adam_discriminator_;
    TrainLog log_;
    TrainProgress progress_;
};

}  // namespace avatar
