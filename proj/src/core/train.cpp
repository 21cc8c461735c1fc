#include "core/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/common.hpp"

namespace avatar {

void TrainConfig::validate() const {
    require(batch_size >= 2, ErrorCategory::invalid_argument,
            "config: batch_size must be at least 2 (batch statistics need it)");
    require(hidden_size >= 1 && layer_count >= 1 && latent_dim >= 1,
            ErrorCategory::invalid_argument, "config: network dimensions must be positive");
    require(learning_rate > 0.0, ErrorCategory::invalid_argument,
            "config: learning_rate must be positive");
    require(disc_ratio >= 1, ErrorCategory::invalid_argument,
            "config: disc_ratio must be at least 1");
}

ModelDims TrainConfig::model_dims(std::size_t feature_dim) const {
    ModelDims dims;
    dims.feature_dim = feature_dim;
    dims.latent_dim = latent_dim;
    dims.hidden_size = hidden_size;
    dims.layer_count = layer_count;
    dims.use_batch_norm = !disable_rg;
    return dims;
}

AblationPlan AblationPlan::from(const TrainConfig& config) {
    AblationPlan plan;
    plan.use_supervisor = !config.disable_al;
    plan.run_stage2 = !config.disable_al;
    plan.use_distribution_loss = !config.disable_dl;
    plan.joint_update = !config.disable_jt;
    plan.use_batch_norm = !config.disable_rg;
    return plan;
}

void TrainLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "trainlog: cannot write " + path);
    out << "stage,iter,l_r,l_r_joint,l_s,l_mean,l_std,l_d,l_ad_gen,l_ad_disc,l_ae\n";
    char buf[512];
    for (const TrainRecord& r : records) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.stage,
                      static_cast<unsigned long long>(r.iter), r.losses.l_r, r.losses.l_r_joint,
                      r.losses.l_s, r.losses.l_mean, r.losses.l_std, r.losses.l_d,
                      r.losses.l_ad_generator, r.losses.l_ad_discriminator, r.losses.l_ae);
        out << buf;
    }
    require(out.good(), ErrorCategory::io, "trainlog: write failed for " + path);
}

Trainer::Trainer(const TrainConfig& config, std::size_t feature_dim)
    : config_(config),
      plan_(AblationPlan::from(config)),
      rng_(config.seed),
      adam_encoder_(config.learning_rate),
      adam_decoder_(config.learning_rate),
      adam_supervisor_(config.learning_rate),
      adam_discriminator_(config.learning_rate) {
    config_.validate();
    model_ = AvatarModel::init(config_.model_dims(feature_dim), rng_);
}

double Trainer::checked_scalar(const Tensor& loss, const char* what) {
    const double v = loss.scalar_value();
    require(std::isfinite(v), ErrorCategory::diverged,
            std::string("training diverged: non-finite ") + what);
    return v;
}

Tensor Trainer::sample_data_tensor(const SequenceBatch& data) {
    std::vector<std::size_t> pool(data.count);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    return batch_to_tensor(data, sample_batch(pool, config_.batch_size, rng_));
}

Tensor Trainer::sample_prior_tensor(std::size_t steps) {
    const std::size_t n = config_.batch_size * steps * config_.latent_dim;
    std::vector<double> values(n);
    for (double& v : values) v = rng_.normal();
    return Tensor::from_values({config_.batch_size, steps, config_.latent_dim},
                               std::move(values));
}

LossBreakdown Trainer::stage1_step(const SequenceBatch& data) {
    Tape::active().clear();
    model_.zero_all_grads();

    Tensor x = sample_data_tensor(data);
    Tensor z = model_.encoder.run(x, BnMode::train);
    Tensor x_ae = model_.decoder.run(z, BnMode::train);
    Tensor loss = recon_loss(x, x_ae);

    LossBreakdown parts;
    parts.l_r = checked_scalar(loss, "reconstruction loss");
    parts.l_r_joint = parts.l_r;
    parts.l_ae = parts.l_r;

    backward(loss);
    auto enc_params = model_.encoder.parameters();
    auto dec_params = model_.decoder.parameters();
    adam_encoder_.step(enc_params);
    adam_decoder_.step(dec_params);
    return parts;
}

LossBreakdown Trainer::stage2_step(const SequenceBatch& data) {
    Tape::active().clear();
    model_.zero_all_grads();

    Tensor x = sample_data_tensor(data);
    Tensor x_ae;
    {
        NoGradGuard frozen;
        Tensor z = model_.encoder.run(x, BnMode::inference);
        x_ae = model_.decoder.run(z, BnMode::inference);
    }
    Tensor loss = supervised_loss(x_ae, model_.supervisor, BnMode::train);

    LossBreakdown parts;
    parts.l_s = checked_scalar(loss, "supervised loss");
    parts.l_ae = parts.l_s;

    backward(loss);
    auto sup_params = model_.supervisor.parameters();
    adam_supervisor_.step(sup_params);
    return parts;
}

LossBreakdown Trainer::stage3_phase_a(const SequenceBatch& data) {
    Tape::active().clear();
    model_.zero_all_grads();

    Tensor x = sample_data_tensor(data);
    Tensor z_prior = sample_prior_tensor(data.steps);

    Tensor z = model_.encoder.run(x, BnMode::train);
    Tensor x_ae = model_.decoder.run(z, BnMode::train);
    Tensor x_sup;
    if (plan_.use_supervisor) x_sup = model_.supervisor.run(x_ae, BnMode::train);

    Tensor l_r = recon_loss(x, x_ae);
    Tensor l_r_joint = plan_.use_supervisor ? add(l_r, recon_loss(x, x_sup)) : l_r;
    Tensor d_fake = sequence_score(model_.discriminator.run(z, BnMode::train));
    Tensor l_ad_gen = affine(mean(avatar::log(clamp(d_fake, 1e-7, 1.0 - 1e-7))), -1.0, 0.0);

    LossBreakdown parts;
    parts.l_r = checked_scalar(l_r, "reconstruction loss");
    parts.l_r_joint = checked_scalar(l_r_joint, "joint reconstruction loss");
    parts.l_ad_generator = checked_scalar(l_ad_gen, "generator adversarial loss");

    Tensor l_s, l_d;
    if (plan_.use_supervisor) {
        l_s = supervised_loss(x_ae, x_sup);
        parts.l_s = checked_scalar(l_s, "supervised loss");
    }
    if (plan_.use_distribution_loss) {
        Tensor l_mean = mean_loss(z, z_prior);
        Tensor l_std = std_loss(z, z_prior);
        parts.l_mean = checked_scalar(l_mean, "latent mean loss");
        parts.l_std = checked_scalar(l_std, "latent std loss");
        l_d = add(l_mean, l_std);
        parts.l_d = parts.l_mean + parts.l_std;
    }

    auto enc_params = model_.encoder.parameters();
    auto dec_params = model_.decoder.parameters();

    if (plan_.joint_update) {
        Tensor zero = Tensor::scalar(0.0);
        Tensor l_ae = combined_ae_loss(l_r_joint, l_ad_gen, l_s.defined() ? l_s : zero,
                                       l_d.defined() ? l_d : zero);
        parts.l_ae = checked_scalar(l_ae, "combined autoencoder loss");
        backward(l_ae);
        adam_encoder_.step(enc_params);
        adam_decoder_.step(dec_params);
        if (plan_.use_supervisor) {
            auto sup_params = model_.supervisor.parameters();
            adam_supervisor_.step(sup_params);
        }
    } else {
        // Split updates: autoencoder first, then the supervisor on its own
        // loss over the refreshed (frozen) reconstruction.
        Tensor ae_objective = l_d.defined() ? add(add(l_r, l_ad_gen), l_d) : add(l_r, l_ad_gen);
        backward(ae_objective);
        adam_encoder_.step(enc_params);
        adam_decoder_.step(dec_params);

        if (plan_.use_supervisor) {
            Tape::active().clear();
            model_.zero_all_grads();
            Tensor x_ae_frozen;
            {
                NoGradGuard frozen;
                Tensor z2 = model_.encoder.run(x, BnMode::inference);
                x_ae_frozen = model_.decoder.run(z2, BnMode::inference);
            }
            Tensor l_s_split = supervised_loss(x_ae_frozen, model_.supervisor, BnMode::train);
            parts.l_s = checked_scalar(l_s_split, "supervised loss");
            backward(l_s_split);
            auto sup_params = model_.supervisor.parameters();
            adam_supervisor_.step(sup_params);
        }
        // Bookkeeping total; no combined backward happened.
        parts.l_ae = parts.l_r_joint + parts.l_ad_generator + parts.l_s + parts.l_d;
    }
    return parts;
}

double Trainer::stage3_phase_b(const SequenceBatch& data) {
    Tape::active().clear();
    model_.zero_all_grads();

    Tensor x = sample_data_tensor(data);
    Tensor z_prior = sample_prior_tensor(data.steps);
    Tensor z_fake;
    {
        NoGradGuard frozen;
        z_fake = model_.encoder.run(x, BnMode::inference);
    }
    Tensor d_real = sequence_score(model_.discriminator.run(z_prior, BnMode::train));
    Tensor d_fake = sequence_score(model_.discriminator.run(z_fake, BnMode::train));
    auto losses = adversarial_losses(d_real, d_fake);
    const double l_disc = checked_scalar(losses.discriminator, "discriminator loss");

    backward(losses.discriminator);
    auto disc_params = model_.discriminator.parameters();
    adam_discriminator_.step(disc_params);
    return l_disc;
}

void Trainer::run(const SequenceBatch& data, std::optional<std::uint64_t> max_records) {
    require(data.count >= 1 && data.steps >= 1, ErrorCategory::invalid_argument,
            "train: empty dataset");
    require(data.features == model_.dims.feature_dim, ErrorCategory::invalid_argument,
            "train: dataset feature count does not match the model");
    require(config_.batch_size <= data.count, ErrorCategory::invalid_argument,
            "train: batch_size exceeds dataset size");
    if (plan_.use_supervisor)
        require(data.steps >= 3, ErrorCategory::invalid_argument,
                "train: supervised loss needs sequences of at least 3 steps");

    std::uint64_t appended = 0;
    auto budget_left = [&]() { return !max_records || appended < *max_records; };

    while (progress_.stage == 1 && progress_.iter < config_.stage1_iters && budget_left()) {
        LossBreakdown parts = stage1_step(data);
        ++progress_.iter;
        log_.records.push_back({1, progress_.iter, parts});
        ++appended;
    }
    if (progress_.stage == 1 && progress_.iter >= config_.stage1_iters) {
        progress_.stage = 2;
        progress_.iter = 0;
    }

    if (progress_.stage == 2 && !plan_.run_stage2) {
        progress_.stage = 3;
        progress_.iter = 0;
    }
    while (progress_.stage == 2 && progress_.iter < config_.stage2_iters && budget_left()) {
        LossBreakdown parts = stage2_step(data);
        ++progress_.iter;
        log_.records.push_back({2, progress_.iter, parts});
        ++appended;
    }
    if (progress_.stage == 2 && progress_.iter >= config_.stage2_iters) {
        progress_.stage = 3;
        progress_.iter = 0;
    }

    while (progress_.stage == 3 && progress_.iter < config_.stage3_iters && budget_left()) {
        LossBreakdown parts;
        for (std::uint64_t r = 0; r < config_.disc_ratio; ++r) {
            parts = stage3_phase_a(data);
            ++log_.phase_a_steps;
        }
        parts.l_ad_discriminator = stage3_phase_b(data);
        ++log_.phase_b_steps;
        ++progress_.iter;
        log_.records.push_back({3, progress_.iter, parts});
        ++appended;
    }
    if (progress_.stage == 3 && progress_.iter >= config_.stage3_iters) {
        progress_.stage = 4;
        progress_.iter = 0;
    }

    Tape::active().clear();
    if (appended > 0) model_.trained = true;
}

}  // namespace avatar
