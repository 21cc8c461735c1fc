#include "core/experiment.hpp"

#include <algorithm>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include <json.hpp>

#include "core/common.hpp"
#include "core/synthesis.hpp"

namespace avatar {

namespace {

using nlohmann::json;

// Seed stream separation between dataset synthesis and model training.
constexpr std::uint64_t kDatasetSeedSalt = 0xd1b54a32d192ed03ULL;

void check_keys(const json& obj, const char* where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items())
        require(allowed.contains(key), ErrorCategory::invalid_argument,
                std::string("config: unknown key '") + key + "' in " + where);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorCategory::invalid_argument,
             std::string("config: field '") + key + "' has the wrong type");
    }
}

// Holds <dir>/.lock exclusively for the lifetime of the run.
class DirLock {
public:
    explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        require(fd_ >= 0, ErrorCategory::state,
                "output directory " + dir + " is locked by another run (remove " + path_ +
                    " if stale)");
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
    int fd_ = -1;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCategory::invalid_argument, std::string("config: JSON parse error: ") + e.what());
    }
    require(root.is_object(), ErrorCategory::invalid_argument, "config: top level must be an object");
    check_keys(root, "top level", {"dataset", "train", "eval", "out_dir", "seed"});

    ExperimentConfig config;
    read_field(root, "out_dir", config.out_dir);
    read_field(root, "seed", config.seed);

    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        check_keys(d, "dataset", {"kind", "path", "n", "t", "f", "window", "stride"});
        read_field(d, "kind", config.dataset.kind);
        read_field(d, "path", config.dataset.path);
        read_field(d, "n", config.dataset.sine_count);
        read_field(d, "t", config.dataset.sine_steps);
        read_field(d, "f", config.dataset.sine_dims);
        read_field(d, "window", config.dataset.window);
        read_field(d, "stride", config.dataset.stride);
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t, "train",
                   {"stage1_iters", "stage2_iters", "stage3_iters", "batch_size", "hidden_size",
                    "layer_count", "latent_dim", "learning_rate", "disc_ratio", "disable_al",
                    "disable_dl", "disable_jt", "disable_rg"});
        read_field(t, "stage1_iters", config.train.stage1_iters);
        read_field(t, "stage2_iters", config.train.stage2_iters);
        read_field(t, "stage3_iters", config.train.stage3_iters);
        read_field(t, "batch_size", config.train.batch_size);
        read_field(t, "hidden_size", config.train.hidden_size);
        read_field(t, "layer_count", config.train.layer_count);
        read_field(t, "latent_dim", config.train.latent_dim);
        read_field(t, "learning_rate", config.train.learning_rate);
        read_field(t, "disc_ratio", config.train.disc_ratio);
        read_field(t, "disable_al", config.train.disable_al);
        read_field(t, "disable_dl", config.train.disable_dl);
        read_field(t, "disable_jt", config.train.disable_jt);
        read_field(t, "disable_rg", config.train.disable_rg);
    }
    if (root.contains("eval")) {
        const json& e = root.at("eval");
        check_keys(e, "eval",
                   {"repeats", "classifier_iters", "predictor_iters", "batch_size", "train_frac",
                    "learning_rate", "perplexity", "tsne_iters", "max_projection_samples"});
        read_field(e, "repeats", config.eval.repeats);
        read_field(e, "classifier_iters", config.eval.classifier_iters);
        read_field(e, "predictor_iters", config.eval.predictor_iters);
        read_field(e, "batch_size", config.eval.batch_size);
        read_field(e, "train_frac", config.eval.train_frac);
        read_field(e, "learning_rate", config.eval.learning_rate);
        read_field(e, "perplexity", config.eval.perplexity);
        read_field(e, "tsne_iters", config.eval.tsne_iters);
        read_field(e, "max_projection_samples", config.eval.max_projection_samples);
    }
    config.train.seed = config.seed;
    config.validate();
    return config;
}

std::string ExperimentConfig::to_json_text() const {
    json root;
    root["seed"] = seed;
    root["out_dir"] = out_dir;
    root["dataset"] = {{"kind", dataset.kind},     {"path", dataset.path},
                       {"n", dataset.sine_count},  {"t", dataset.sine_steps},
                       {"f", dataset.sine_dims},   {"window", dataset.window},
                       {"stride", dataset.stride}};
    root["train"] = {{"stage1_iters", train.stage1_iters},
                     {"stage2_iters", train.stage2_iters},
                     {"stage3_iters", train.stage3_iters},
                     {"batch_size", train.batch_size},
                     {"hidden_size", train.hidden_size},
                     {"layer_count", train.layer_count},
                     {"latent_dim", train.latent_dim},
                     {"learning_rate", train.learning_rate},
                     {"disc_ratio", train.disc_ratio},
                     {"disable_al", train.disable_al},
                     {"disable_dl", train.disable_dl},
                     {"disable_jt", train.disable_jt},
                     {"disable_rg", train.disable_rg}};
    root["eval"] = {{"repeats", eval.repeats},
                    {"classifier_iters", eval.classifier_iters},
                    {"predictor_iters", eval.predictor_iters},
                    {"batch_size", eval.batch_size},
                    {"train_frac", eval.train_frac},
                    {"learning_rate", eval.learning_rate},
                    {"perplexity", eval.perplexity},
                    {"tsne_iters", eval.tsne_iters},
                    {"max_projection_samples", eval.max_projection_samples}};
    return root.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
    const std::set<std::string> kinds = {"sines", "stocks", "energy", "custom"};
    require(kinds.contains(dataset.kind), ErrorCategory::invalid_argument,
            "config: dataset.kind must be one of sines|stocks|energy|custom");
    if (dataset.kind != "sines")
        require(!dataset.path.empty(), ErrorCategory::invalid_argument,
                "config: dataset.path is required for kind '" + dataset.kind + "'");
    require(!out_dir.empty(), ErrorCategory::invalid_argument, "config: out_dir must not be empty");
    train.validate();
    eval.validate();
}

PreparedDataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    PreparedDataset prepared;
    if (spec.kind == "sines") {
        SeededRng rng(seed ^ kDatasetSeedSalt);
        prepared.batch = generate_sines(spec.sine_count, spec.sine_steps, spec.sine_dims, rng);
        prepared.normalizer = sine_normalizer(spec.sine_dims);
    } else {
        RawSeries series = load_csv(spec.path);
        series.source = spec.kind;
        auto [normalized, state] = minmax_normalize(series);
        prepared.batch = slice_windows(normalized, spec.window, spec.stride);
        prepared.normalizer = std::move(state);
    }
    return prepared;
}

NormalizerState fit_normalizer(const SequenceBatch& batch) {
    require(batch.count >= 1, ErrorCategory::invalid_argument, "fit_normalizer: empty batch");
    NormalizerState state;
    state.mins.assign(batch.features, 0.0);
    state.maxs.assign(batch.features, 0.0);
    for (std::size_t f = 0; f < batch.features; ++f) {
        double lo = batch.at(0, 0, f), hi = batch.at(0, 0, f);
        for (std::size_t n = 0; n < batch.count; ++n)
            for (std::size_t t = 0; t < batch.steps; ++t) {
                lo = std::min(lo, batch.at(n, t, f));
                hi = std::max(hi, batch.at(n, t, f));
            }
        state.mins[f] = lo;
        state.maxs[f] = hi;
    }
    return state;
}

SequenceBatch apply_normalizer(const SequenceBatch& batch, const NormalizerState& state,
                               bool clamp_unit_interval) {
    require(state.features() == batch.features, ErrorCategory::invalid_argument,
            "apply_normalizer: feature count mismatch");
    SequenceBatch out = batch;
    for (std::size_t n = 0; n < batch.count; ++n)
        for (std::size_t t = 0; t < batch.steps; ++t)
            for (std::size_t f = 0; f < batch.features; ++f) {
                double v = state.normalize_value(batch.at(n, t, f), f);
                if (clamp_unit_interval) v = std::clamp(v, 0.0, 1.0);
                out.at(n, t, f) = v;
            }
    return out;
}

TrainRunOutput train_run(const ExperimentConfig& config,
                         const std::optional<std::string>& resume_checkpoint) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);
    DirLock lock(config.out_dir);

    TrainRunOutput output;
    output.files.checkpoint_path = config.out_dir + "/model.ckpt";
    output.files.trainlog_path = config.out_dir + "/trainlog.csv";
    output.files.resolved_config_path = config.out_dir + "/resolved.json";
    output.files.train_data_path = config.out_dir + "/train_data.csv";

    {
        std::ofstream resolved(output.files.resolved_config_path);
        require(resolved.good(), ErrorCategory::io,
                "train: cannot write " + output.files.resolved_config_path);
        resolved << config.to_json_text();
    }

    PreparedDataset dataset = prepare_dataset(config.dataset, config.seed);
    write_batch_csv(output.files.train_data_path,
                    denormalize(dataset.batch, dataset.normalizer));

    std::unique_ptr<Trainer> trainer;
    if (resume_checkpoint) {
        CheckpointBundle bundle = load_checkpoint(*resume_checkpoint);
        const TrainConfig& loaded = bundle.trainer->config();
        const std::string mismatch = "train: resume checkpoint was produced by a different config";
        require(loaded.stage1_iters == config.train.stage1_iters &&
                    loaded.stage2_iters == config.train.stage2_iters &&
                    loaded.stage3_iters == config.train.stage3_iters &&
                    loaded.batch_size == config.train.batch_size &&
                    loaded.hidden_size == config.train.hidden_size &&
                    loaded.layer_count == config.train.layer_count &&
                    loaded.latent_dim == config.train.latent_dim &&
                    loaded.seed == config.train.seed,
                ErrorCategory::invalid_argument, mismatch);
        trainer = std::move(bundle.trainer);
    } else {
        trainer = std::make_unique<Trainer>(config.train, dataset.batch.features);
    }

    try {
        trainer->run(dataset.batch);
    } catch (const Error& e) {
        if (e.category() == ErrorCategory::diverged) {
            save_checkpoint(output.files.checkpoint_path, *trainer, dataset.normalizer,
                            dataset.batch.steps);
            trainer->log().write_csv(output.files.trainlog_path);
            std::ofstream marker(output.files.checkpoint_path + ".diverged");
            marker << e.what() << "\n";
            output.files.diverged = true;
        }
        throw;
    }

    save_checkpoint(output.files.checkpoint_path, *trainer, dataset.normalizer,
                    dataset.batch.steps);
    trainer->log().write_csv(output.files.trainlog_path);

    output.bundle.trainer = std::move(trainer);
    output.bundle.normalizer = dataset.normalizer;
    output.bundle.sequence_steps = dataset.batch.steps;
    return output;
}

SequenceBatch generate_from_bundle(CheckpointBundle& bundle, std::size_t n, std::uint64_t seed,
                                   std::optional<bool> refine) {
    bool do_refine = refine.value_or(true);
    if (bundle.trainer->config().disable_al) do_refine = false;
    SeededRng rng(seed);
    return generate(bundle.trainer->model(), n, bundle.sequence_steps, rng, do_refine);
}

void generate_run(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                  std::optional<bool> refine, bool normalized_output, const std::string& out_csv) {
    CheckpointBundle bundle = load_checkpoint(checkpoint_path);
    SequenceBatch batch = generate_from_bundle(bundle, n, seed, refine);
    if (!normalized_output) batch = denormalize(batch, bundle.normalizer);
    write_batch_csv(out_csv, batch);
}

SequenceBatch load_dataset_file(const std::string& path, std::size_t window, std::size_t stride) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "dataset: cannot open " + path);
    std::string first_line;
    std::getline(in, first_line);
    in.close();
    if (first_line.rfind("sample_id,t", 0) == 0) return read_batch_csv(path);
    RawSeries series = load_csv(path);
    return slice_windows(series, window, stride);
}

EvalReport evaluate_run(const std::string& real_csv, const std::string& synth_csv,
                        const EvaluateOptions& options,
                        const std::optional<std::string>& scores_csv,
                        const std::optional<std::string>& projections_csv) {
    SequenceBatch real = load_dataset_file(real_csv, options.window, options.stride);
    SequenceBatch synth = load_dataset_file(synth_csv, options.window, options.stride);

    // Both sides live on the real data's scale so differences stay visible.
    NormalizerState scale = fit_normalizer(real);
    SequenceBatch real_norm = apply_normalizer(real, scale, true);
    SequenceBatch synth_norm = apply_normalizer(synth, scale, true);

    EvalConfig config;
    config.repeats = options.repeats;
    config.perplexity = options.perplexity;
    config.tsne_iters = options.tsne_iters;

    EvalReport report = run_full_evaluation(real_norm, synth_norm, config, options.seed,
                                            options.with_scores, options.with_projections);
    if (scores_csv && options.with_scores) write_scores_csv(*scores_csv, report);
    if (projections_csv && options.with_projections)
        write_projections_csv(*projections_csv, report.projections);
    return report;
}

}  // namespace avatar
