#include "avatar/avatar.h"

#include <cstring>
#include <string>

#include "core/common.hpp"
#include "core/experiment.hpp"
#include "core/synthesis.hpp"

using namespace avatar;

// Opaque handle definitions. The dataset keeps values in [0,1] alongside the
// normalizer that maps them back to real units.
struct avatar_dataset {
    SequenceBatch batch;
    NormalizerState normalizer;
};

struct avatar_model {
    CheckpointBundle bundle;
};

struct avatar_eval_report {
    EvalReport report;
};

namespace {

thread_local std::string g_last_error;

avatar_status to_status(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::invalid_argument: return AVATAR_ERR_INVALID_ARGUMENT;
        case ErrorCategory::domain: return AVATAR_ERR_DOMAIN;
        case ErrorCategory::io: return AVATAR_ERR_IO;
        case ErrorCategory::state: return AVATAR_ERR_STATE;
        case ErrorCategory::diverged: return AVATAR_ERR_DIVERGED;
    }
    return AVATAR_ERR_INTERNAL;
}

template <typename Fn>
avatar_status guarded(Fn&& fn) {
    g_last_error.clear();
    try {
        fn();
        return AVATAR_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.category());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return AVATAR_ERR_INTERNAL;
    }
}

void require_c(bool condition, const char* message) {
    avatar::require(condition, ErrorCategory::invalid_argument, message);
}

}  // namespace

extern "C" {

const char* avatar_version(void) { return "1.0.0"; }

const char* avatar_status_name(avatar_status status) {
    switch (status) {
        case AVATAR_OK: return "ok";
        case AVATAR_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case AVATAR_ERR_DOMAIN: return "domain";
        case AVATAR_ERR_IO: return "io";
        case AVATAR_ERR_STATE: return "state";
        case AVATAR_ERR_DIVERGED: return "diverged";
        case AVATAR_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* avatar_last_error(void) { return g_last_error.c_str(); }

avatar_status avatar_dataset_sines(size_t n, size_t t, size_t f, uint64_t seed,
                                   avatar_dataset** out) {
    return guarded([&] {
        require_c(out != nullptr, "avatar_dataset_sines: out is NULL");
        SeededRng rng(seed);
        auto* ds = new avatar_dataset;
        ds->batch = generate_sines(n, t, f, rng);
        ds->normalizer = sine_normalizer(f);
        *out = ds;
    });
}

avatar_status avatar_dataset_from_series_csv(const char* path, size_t window, size_t stride,
                                             avatar_dataset** out) {
    return guarded([&] {
        require_c(path != nullptr && out != nullptr,
                  "avatar_dataset_from_series_csv: NULL argument");
        RawSeries series = load_csv(path);
        auto [normalized, state] = minmax_normalize(series);
        auto* ds = new avatar_dataset;
        ds->batch = slice_windows(normalized, window, stride);
        ds->normalizer = std::move(state);
        *out = ds;
    });
}

avatar_status avatar_dataset_from_batch_csv(const char* path, avatar_dataset** out) {
    return guarded([&] {
        require_c(path != nullptr && out != nullptr, "avatar_dataset_from_batch_csv: NULL argument");
        SequenceBatch raw = read_batch_csv(path);
        auto* ds = new avatar_dataset;
        ds->normalizer = fit_normalizer(raw);
        ds->batch = apply_normalizer(raw, ds->normalizer, true);
        *out = ds;
    });
}

avatar_status avatar_dataset_dims(const avatar_dataset* dataset, size_t* n, size_t* t, size_t* f) {
    return guarded([&] {
        require_c(dataset != nullptr, "avatar_dataset_dims: dataset is NULL");
        if (n) *n = dataset->batch.count;
        if (t) *t = dataset->batch.steps;
        if (f) *f = dataset->batch.features;
    });
}

avatar_status avatar_dataset_write_csv(const avatar_dataset* dataset, const char* path,
                                       int denormalized) {
    return guarded([&] {
        require_c(dataset != nullptr && path != nullptr, "avatar_dataset_write_csv: NULL argument");
        if (denormalized)
            write_batch_csv(path, denormalize(dataset->batch, dataset->normalizer));
        else
            write_batch_csv(path, dataset->batch);
    });
}

void avatar_dataset_free(avatar_dataset* dataset) { delete dataset; }

avatar_status avatar_train_run(const char* config_json, const char* out_dir_override,
                               int has_seed_override, uint64_t seed_override,
                               const char* resume_checkpoint, avatar_model** out_model) {
    return guarded([&] {
        require_c(config_json != nullptr, "avatar_train_run: config_json is NULL");
        ExperimentConfig config = ExperimentConfig::from_json_text(config_json);
        if (out_dir_override != nullptr) config.out_dir = out_dir_override;
        if (has_seed_override) {
            config.seed = seed_override;
            config.train.seed = seed_override;
        }
        std::optional<std::string> resume;
        if (resume_checkpoint != nullptr) resume = std::string(resume_checkpoint);
        TrainRunOutput output = train_run(config, resume);
        if (out_model != nullptr) {
            auto* model = new avatar_model;
            model->bundle = std::move(output.bundle);
            *out_model = model;
        }
    });
}

avatar_status avatar_model_load(const char* checkpoint_path, avatar_model** out) {
    return guarded([&] {
        require_c(checkpoint_path != nullptr && out != nullptr, "avatar_model_load: NULL argument");
        auto* model = new avatar_model;
        try {
            model->bundle = load_checkpoint(checkpoint_path);
        } catch (...) {
            delete model;
            throw;
        }
        *out = model;
    });
}

avatar_status avatar_model_save(avatar_model* model, const char* checkpoint_path) {
    return guarded([&] {
        require_c(model != nullptr && checkpoint_path != nullptr, "avatar_model_save: NULL argument");
        save_checkpoint(checkpoint_path, *model->bundle.trainer, model->bundle.normalizer,
                        model->bundle.sequence_steps);
    });
}

void avatar_model_free(avatar_model* model) { delete model; }

avatar_status avatar_model_generate(avatar_model* model, size_t n, uint64_t seed, int refine,
                                    avatar_dataset** out) {
    return guarded([&] {
        require_c(model != nullptr && out != nullptr, "avatar_model_generate: NULL argument");
        std::optional<bool> refine_opt;
        if (refine >= 0) refine_opt = refine != 0;
        auto* ds = new avatar_dataset;
        try {
            ds->batch = generate_from_bundle(model->bundle, n, seed, refine_opt);
            ds->normalizer = model->bundle.normalizer;
        } catch (...) {
            delete ds;
            throw;
        }
        *out = ds;
    });
}

avatar_status avatar_evaluate(const avatar_dataset* real, const avatar_dataset* synth,
                              const avatar_eval_options* options, avatar_eval_report** out) {
    return guarded([&] {
        require_c(real != nullptr && synth != nullptr && out != nullptr,
                  "avatar_evaluate: NULL argument");
        avatar_eval_options opts{};
        if (options != nullptr) opts = *options;

        // Rescale the synthetic side into the real side's units.
        SequenceBatch synth_real_units = denormalize(synth->batch, synth->normalizer);
        SequenceBatch real_real_units = denormalize(real->batch, real->normalizer);
        NormalizerState scale = fit_normalizer(real_real_units);
        SequenceBatch real_norm = apply_normalizer(real_real_units, scale, true);
        SequenceBatch synth_norm = apply_normalizer(synth_real_units, scale, true);

        EvalConfig config;
        config.repeats = opts.repeats == 0 ? 10 : opts.repeats;
        config.perplexity = opts.perplexity == 0.0 ? 30.0 : opts.perplexity;
        config.tsne_iters = opts.tsne_iterations == 0 ? 1000 : opts.tsne_iterations;

        auto* report = new avatar_eval_report;
        try {
            report->report =
                run_full_evaluation(real_norm, synth_norm, config, opts.seed,
                                    opts.skip_scores == 0, opts.skip_projections == 0);
        } catch (...) {
            delete report;
            throw;
        }
        *out = report;
    });
}

avatar_status avatar_eval_scores(const avatar_eval_report* report, double* resemblance_mean,
                                 double* resemblance_std, double* fidelity_mean,
                                 double* fidelity_std) {
    return guarded([&] {
        require_c(report != nullptr, "avatar_eval_scores: report is NULL");
        if (resemblance_mean) *resemblance_mean = report->report.resemblance_mean;
        if (resemblance_std) *resemblance_std = report->report.resemblance_std;
        if (fidelity_mean) *fidelity_mean = report->report.fidelity_mean;
        if (fidelity_std) *fidelity_std = report->report.fidelity_std;
    });
}

avatar_status avatar_eval_write_csv(const avatar_eval_report* report, const char* scores_path,
                                    const char* projections_path) {
    return guarded([&] {
        require_c(report != nullptr, "avatar_eval_write_csv: report is NULL");
        if (scores_path != nullptr) write_scores_csv(scores_path, report->report);
        if (projections_path != nullptr)
            write_projections_csv(projections_path, report->report.projections);
    });
}

void avatar_eval_report_free(avatar_eval_report* report) { delete report; }

}  // extern "C"
