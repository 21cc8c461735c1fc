// Command-line front end; talks to the core exclusively through the C API.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avatar/avatar.h"

namespace {

int status_to_exit_code(avatar_status status) {
    return status == AVATAR_OK ? 0 : static_cast<int>(status) + 1;
}

int fail_with(avatar_status status, const std::string& what) {
    std::fprintf(stderr, "avatar: %s failed [%s]: %s\n", what.c_str(),
                 avatar_status_name(status), avatar_last_error());
    return status_to_exit_code(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw CLI::ValidationError("--config", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct DatasetHandle {
    avatar_dataset* ptr = nullptr;
    ~DatasetHandle() { avatar_dataset_free(ptr); }
};

struct ModelHandle {
    avatar_model* ptr = nullptr;
    ~ModelHandle() { avatar_model_free(ptr); }
};

struct ReportHandle {
    avatar_eval_report* ptr = nullptr;
    ~ReportHandle() { avatar_eval_report_free(ptr); }
};

avatar_status load_dataset_arg(const std::string& path, size_t window, size_t stride,
                               avatar_dataset** out) {
    std::ifstream in(path);
    std::string first_line;
    std::getline(in, first_line);
    in.close();
    if (first_line.rfind("sample_id,t", 0) == 0) return avatar_dataset_from_batch_csv(path.c_str(), out);
    return avatar_dataset_from_series_csv(path.c_str(), window, stride, out);
}

struct AblationVariant {
    std::string name;
    std::string flag;  // empty for the full model
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AVATAR time series generation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_override, resume_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Seed override")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    // train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Run the three-stage training pipeline");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--out", out_override, "Output directory override");
    train->add_option("--resume", resume_path, "Checkpoint to resume from");
    add_seed(train);

    // generate ---------------------------------------------------------
    std::string ckpt_path, out_path = "generated.csv";
    std::size_t gen_count = 100;
    bool no_refine = false, normalized = false;
    auto* generate = app.add_subcommand("generate", "Sample synthetic sequences from a checkpoint");
    generate->add_option("--ckpt", ckpt_path, "Model checkpoint")->required();
    generate->add_option("--n", gen_count, "Number of sequences");
    generate->add_option("--out", out_path, "Output CSV path");
    generate->add_flag("--no-refine", no_refine, "Skip the supervisor refinement pass");
    generate->add_flag("--normalized", normalized, "Emit [0,1]-normalized values");
    add_seed(generate);

    // evaluate ----------------------------------------------------------
    std::string real_path, synth_path, eval_out = ".";
    std::size_t repeats = 10, window = 24, stride = 1, tsne_iters = 1000;
    double perplexity = 30.0;
    auto* evaluate = app.add_subcommand("evaluate", "Resemblance/fidelity scores and projections");
    evaluate->add_option("--real", real_path, "Real dataset CSV")->required();
    evaluate->add_option("--synth", synth_path, "Synthetic dataset CSV")->required();
    evaluate->add_option("--repeats", repeats, "Evaluation repeats");
    evaluate->add_option("--window", window, "Window for raw series inputs");
    evaluate->add_option("--stride", stride, "Stride for raw series inputs");
    evaluate->add_option("--perplexity", perplexity, "t-SNE perplexity");
    evaluate->add_option("--tsne-iters", tsne_iters, "t-SNE iterations");
    evaluate->add_option("--out", eval_out, "Output directory");
    add_seed(evaluate);

    // project -----------------------------------------------------------
    auto* project = app.add_subcommand("project", "PCA/t-SNE projections only");
    project->add_option("--real", real_path, "Real dataset CSV")->required();
    project->add_option("--synth", synth_path, "Synthetic dataset CSV")->required();
    project->add_option("--window", window, "Window for raw series inputs");
    project->add_option("--stride", stride, "Stride for raw series inputs");
    project->add_option("--perplexity", perplexity, "t-SNE perplexity");
    project->add_option("--tsne-iters", tsne_iters, "t-SNE iterations");
    project->add_option("--out", eval_out, "Output directory");
    add_seed(project);

    // ablate --------------------------------------------------------------
    std::string variants_arg = "full,wo_al,wo_dl,wo_jt,wo_rg";
    std::size_t ablate_repeats = 10;
    auto* ablate = app.add_subcommand("ablate", "Train and score ablation variants");
    ablate->add_option("--config", config_path, "Experiment config JSON")->required();
    ablate->add_option("--variants", variants_arg, "Comma list: full,wo_al,wo_dl,wo_jt,wo_rg");
    ablate->add_option("--repeats", ablate_repeats, "Evaluation repeats per variant");
    ablate->add_option("--out", out_override, "Output directory override");
    add_seed(ablate);

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        std::string config_text;
        try {
            config_text = read_file(config_path);
        } catch (const CLI::Error& e) {
            std::fprintf(stderr, "avatar: %s\n", e.what());
            return 2;
        }
        avatar_status status = avatar_train_run(
            config_text.c_str(), out_override.empty() ? nullptr : out_override.c_str(),
            seed_set ? 1 : 0, seed, resume_path.empty() ? nullptr : resume_path.c_str(), nullptr);
        if (status != AVATAR_OK) return fail_with(status, "train");
        std::printf("train: artifacts written to %s\n",
                    out_override.empty() ? "the configured out_dir" : out_override.c_str());
        return 0;
    }

    if (generate->parsed()) {
        ModelHandle model;
        avatar_status status = avatar_model_load(ckpt_path.c_str(), &model.ptr);
        if (status != AVATAR_OK) return fail_with(status, "load checkpoint");
        DatasetHandle ds;
        status = avatar_model_generate(model.ptr, gen_count, seed_set ? seed : 7,
                                       no_refine ? 0 : -1, &ds.ptr);
        if (status != AVATAR_OK) return fail_with(status, "generate");
        status = avatar_dataset_write_csv(ds.ptr, out_path.c_str(), normalized ? 0 : 1);
        if (status != AVATAR_OK) return fail_with(status, "write output");
        std::printf("generate: wrote %zu sequences to %s\n", gen_count, out_path.c_str());
        return 0;
    }

    if (evaluate->parsed() || project->parsed()) {
        DatasetHandle real, synth;
        avatar_status status = load_dataset_arg(real_path, window, stride, &real.ptr);
        if (status != AVATAR_OK) return fail_with(status, "load real dataset");
        status = load_dataset_arg(synth_path, window, stride, &synth.ptr);
        if (status != AVATAR_OK) return fail_with(status, "load synthetic dataset");

        avatar_eval_options options{};
        options.repeats = repeats;
        options.seed = seed_set ? seed : 7;
        options.perplexity = perplexity;
        options.tsne_iterations = tsne_iters;
        options.skip_scores = project->parsed() ? 1 : 0;

        ReportHandle report;
        status = avatar_evaluate(real.ptr, synth.ptr, &options, &report.ptr);
        if (status != AVATAR_OK) return fail_with(status, "evaluate");

        const std::string scores_path = eval_out + "/scores.csv";
        const std::string proj_path = eval_out + "/projections.csv";
        status = avatar_eval_write_csv(report.ptr,
                                       project->parsed() ? nullptr : scores_path.c_str(),
                                       proj_path.c_str());
        if (status != AVATAR_OK) return fail_with(status, "write report");

        if (!project->parsed()) {
            double rm = 0, rs = 0, fm = 0, fs = 0;
            avatar_eval_scores(report.ptr, &rm, &rs, &fm, &fs);
            std::printf("resemblance: %.4f +/- %.4f\nfidelity:    %.4f +/- %.4f\n", rm, rs, fm, fs);
        }
        std::printf("report written to %s\n", eval_out.c_str());
        return 0;
    }

    if (ablate->parsed()) {
        nlohmann::json config;
        try {
            config = nlohmann::json::parse(read_file(config_path));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "avatar: cannot parse config: %s\n", e.what());
            return 2;
        }
        const std::string base_out =
            out_override.empty() ? config.value("out_dir", std::string("avatar_ablate"))
                                 : out_override;

        std::vector<AblationVariant> catalog = {{"full", ""},
                                                {"wo_al", "disable_al"},
                                                {"wo_dl", "disable_dl"},
                                                {"wo_jt", "disable_jt"},
                                                {"wo_rg", "disable_rg"}};
        std::vector<AblationVariant> selected;
        std::stringstream ss(variants_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            bool known = false;
            for (const auto& v : catalog)
                if (v.name == item) {
                    selected.push_back(v);
                    known = true;
                }
            if (!known) {
                std::fprintf(stderr, "avatar: unknown ablation variant '%s'\n", item.c_str());
                return 2;
            }
        }

        std::string table = "variant,resemblance_mean,resemblance_std,fidelity_mean,fidelity_std\n";
        for (const auto& variant : selected) {
            nlohmann::json variant_config = config;
            if (!variant.flag.empty()) variant_config["train"][variant.flag] = true;
            const std::string variant_out = base_out + "/" + variant.name;
            variant_config["out_dir"] = variant_out;

            std::printf("ablate: training variant %s...\n", variant.name.c_str());
            ModelHandle model;
            avatar_status status =
                avatar_train_run(variant_config.dump().c_str(), nullptr, seed_set ? 1 : 0, seed,
                                 nullptr, &model.ptr);
            if (status != AVATAR_OK) return fail_with(status, "train " + variant.name);

            DatasetHandle real;
            const std::string real_csv = variant_out + "/train_data.csv";
            status = avatar_dataset_from_batch_csv(real_csv.c_str(), &real.ptr);
            if (status != AVATAR_OK) return fail_with(status, "load " + real_csv);
            size_t n_real = 0;
            avatar_dataset_dims(real.ptr, &n_real, nullptr, nullptr);

            DatasetHandle synth;
            status = avatar_model_generate(model.ptr, n_real, seed_set ? seed : 7, -1, &synth.ptr);
            if (status != AVATAR_OK) return fail_with(status, "generate " + variant.name);

            avatar_eval_options options{};
            options.repeats = ablate_repeats;
            options.seed = seed_set ? seed : 7;
            options.skip_projections = 1;
            ReportHandle report;
            status = avatar_evaluate(real.ptr, synth.ptr, &options, &report.ptr);
            if (status != AVATAR_OK) return fail_with(status, "evaluate " + variant.name);

            double rm = 0, rs = 0, fm = 0, fs = 0;
            avatar_eval_scores(report.ptr, &rm, &rs, &fm, &fs);
            char row[256];
            std::snprintf(row, sizeof(row), "%s,%.17g,%.17g,%.17g,%.17g\n", variant.name.c_str(),
                          rm, rs, fm, fs);
            table += row;
            std::printf("ablate: %s resemblance %.4f fidelity %.4f\n", variant.name.c_str(), rm, fm);
        }

        const std::string table_path = base_out + "/ablation.csv";
        std::ofstream out(table_path);
        out << table;
        if (!out.good()) {
            std::fprintf(stderr, "avatar: cannot write %s\n", table_path.c_str());
            return 4;
        }
        std::printf("ablate: table written to %s\n", table_path.c_str());
        return 0;
    }

    return 0;
}
