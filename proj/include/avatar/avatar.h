/*
 * avatar - time series generation via an adversarial autoencoder with
 * autoregressive refinement.
 *
 * C interface to the core library. All functions return avatar_status;
 * on failure avatar_last_error() carries a human-readable message for the
 * calling thread. Objects returned through out-parameters are owned by the
 * caller and released with the matching *_free function.
 */
#ifndef AVATAR_AVATAR_H
#define AVATAR_AVATAR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum avatar_status {
    AVATAR_OK = 0,
    AVATAR_ERR_INVALID_ARGUMENT = 1,
    AVATAR_ERR_DOMAIN = 2,
    AVATAR_ERR_IO = 3,
    AVATAR_ERR_STATE = 4,
    AVATAR_ERR_DIVERGED = 5,
    AVATAR_ERR_INTERNAL = 6
} avatar_status;

const char* avatar_version(void);
const char* avatar_status_name(avatar_status status);
/* Message of the most recent failing call on this thread; empty otherwise. */
const char* avatar_last_error(void);

/* A set of sequences (N x T x F) with its per-feature normalization state. */
typedef struct avatar_dataset avatar_dataset;
/* A trained (or in-training) model plus everything needed to resume or
 * generate: parameters, optimizer state, RNG state, normalizer. */
typedef struct avatar_model avatar_model;
typedef struct avatar_eval_report avatar_eval_report;

/* -------------------------------------------------------------- datasets */

/* Multivariate sine benchmark: n sequences, t steps, f dimensions. */
avatar_status avatar_dataset_sines(size_t n, size_t t, size_t f, uint64_t seed,
                                   avatar_dataset** out);
/* Continuous series CSV (header + one row per step) sliced into windows. */
avatar_status avatar_dataset_from_series_csv(const char* path, size_t window, size_t stride,
                                             avatar_dataset** out);
/* Sequence batch CSV (header sample_id,t,f0,...). */
avatar_status avatar_dataset_from_batch_csv(const char* path, avatar_dataset** out);
avatar_status avatar_dataset_dims(const avatar_dataset* dataset, size_t* n, size_t* t, size_t* f);
/* Writes batch CSV; denormalized selects real units instead of [0,1]. */
avatar_status avatar_dataset_write_csv(const avatar_dataset* dataset, const char* path,
                                       int denormalized);
void avatar_dataset_free(avatar_dataset* dataset);

/* -------------------------------------------------------------- training */

/*
 * Runs the full staged training described by the JSON experiment config and
 * writes model.ckpt, trainlog.csv, resolved.json and train_data.csv into the
 * output directory. out_dir_override and seed_override (when has_seed_override
 * is nonzero) replace the config values; resume_checkpoint continues a
 * previous run. out_model may be NULL when only the files are wanted.
 */
avatar_status avatar_train_run(const char* config_json, const char* out_dir_override,
                               int has_seed_override, uint64_t seed_override,
                               const char* resume_checkpoint, avatar_model** out_model);

/* ----------------------------------------------------- model persistence */

avatar_status avatar_model_load(const char* checkpoint_path, avatar_model** out);
avatar_status avatar_model_save(avatar_model* model, const char* checkpoint_path);
void avatar_model_free(avatar_model* model);

/*
 * Samples n sequences from the prior and decodes them. refine > 0 applies the
 * supervisor refinement, refine == 0 skips it, refine < 0 uses the default
 * (on, unless the model was trained without the supervisor).
 */
avatar_status avatar_model_generate(avatar_model* model, size_t n, uint64_t seed, int refine,
                                    avatar_dataset** out);

/* ------------------------------------------------------------ evaluation */

typedef struct avatar_eval_options {
    size_t repeats;         /* 0 -> 10 */
    uint64_t seed;
    double perplexity;      /* 0 -> 30 */
    size_t tsne_iterations; /* 0 -> 1000 */
    int skip_scores;        /* nonzero: projections only */
    int skip_projections;   /* nonzero: scores only */
} avatar_eval_options;

/*
 * Resemblance and predictive-fidelity protocol plus 2-D projections. The
 * synthetic data is rescaled into the real data's normalization before
 * comparison.
 */
avatar_status avatar_evaluate(const avatar_dataset* real, const avatar_dataset* synth,
                              const avatar_eval_options* options, avatar_eval_report** out);
avatar_status avatar_eval_scores(const avatar_eval_report* report, double* resemblance_mean,
                                 double* resemblance_std, double* fidelity_mean,
                                 double* fidelity_std);
avatar_status avatar_eval_write_csv(const avatar_eval_report* report, const char* scores_path,
                                    const char* projections_path);
void avatar_eval_report_free(avatar_eval_report* report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AVATAR_AVATAR_H */
