// Exercises the shared library strictly through the public C header.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "avatar/avatar.h"

namespace {

std::string temp_dir(const std::string& name) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove_all(path);
    return path;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTinyConfig = R"({
    "seed": 11,
    "out_dir": "PLACEHOLDER",
    "dataset": {"kind": "sines", "n": 40, "t": 10, "f": 2},
    "train": {"stage1_iters": 4, "stage2_iters": 3, "stage3_iters": 4,
              "batch_size": 8, "hidden_size": 5, "layer_count": 2, "latent_dim": 4},
    "eval": {"repeats": 1, "classifier_iters": 30, "predictor_iters": 30}
})";

}  // namespace

TEST_CASE("version and status names") {
    CHECK(std::strcmp(avatar_version(), "1.0.0") == 0);
    CHECK(std::strcmp(avatar_status_name(AVATAR_OK), "ok") == 0);
    CHECK(std::strcmp(avatar_status_name(AVATAR_ERR_IO), "io") == 0);
    CHECK(std::strcmp(avatar_status_name(AVATAR_ERR_DIVERGED), "diverged") == 0);
}

TEST_CASE("sine datasets: dims, determinism, csv round trip") {
    avatar_dataset* ds = nullptr;
    REQUIRE(avatar_dataset_sines(12, 8, 3, 77, &ds) == AVATAR_OK);
    size_t n = 0, t = 0, f = 0;
    CHECK(avatar_dataset_dims(ds, &n, &t, &f) == AVATAR_OK);
    CHECK(n == 12);
    CHECK(t == 8);
    CHECK(f == 3);

    const std::string dir = temp_dir("avatar_capi_ds");
    std::filesystem::create_directories(dir);
    const std::string a_path = dir + "/a.csv";
    const std::string b_path = dir + "/b.csv";
    CHECK(avatar_dataset_write_csv(ds, a_path.c_str(), 1) == AVATAR_OK);

    avatar_dataset* same = nullptr;
    REQUIRE(avatar_dataset_sines(12, 8, 3, 77, &same) == AVATAR_OK);
    CHECK(avatar_dataset_write_csv(same, b_path.c_str(), 1) == AVATAR_OK);
    CHECK(file_bytes(a_path) == file_bytes(b_path));

    avatar_dataset* loaded = nullptr;
    REQUIRE(avatar_dataset_from_batch_csv(a_path.c_str(), &loaded) == AVATAR_OK);
    size_t n2 = 0, t2 = 0, f2 = 0;
    avatar_dataset_dims(loaded, &n2, &t2, &f2);
    CHECK(n2 == 12);
    CHECK(t2 == 8);
    CHECK(f2 == 3);

    avatar_dataset_free(ds);
    avatar_dataset_free(same);
    avatar_dataset_free(loaded);
    std::filesystem::remove_all(dir);
}

TEST_CASE("error paths set status and message") {
    avatar_dataset* ds = nullptr;
    CHECK(avatar_dataset_sines(0, 8, 3, 1, &ds) == AVATAR_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(avatar_last_error()) > 0);

    CHECK(avatar_dataset_from_batch_csv("/no/such/file.csv", &ds) == AVATAR_ERR_IO);
    CHECK(avatar_dataset_sines(4, 4, 1, 1, nullptr) == AVATAR_ERR_INVALID_ARGUMENT);

    avatar_model* model = nullptr;
    CHECK(avatar_model_load("/no/such/model.ckpt", &model) == AVATAR_ERR_IO);

    CHECK(avatar_train_run("{ not json", nullptr, 0, 0, nullptr, nullptr) ==
          AVATAR_ERR_INVALID_ARGUMENT);
    CHECK(avatar_train_run(R"({"unknown_key": 1})", nullptr, 0, 0, nullptr, nullptr) ==
          AVATAR_ERR_INVALID_ARGUMENT);
    CHECK(std::string(avatar_last_error()).find("unknown_key") != std::string::npos);
}

TEST_CASE("train, save, load, generate and evaluate through the C API") {
    const std::string dir = temp_dir("avatar_capi_run");
    avatar_model* model = nullptr;
    REQUIRE(avatar_train_run(kTinyConfig, dir.c_str(), 0, 0, nullptr, &model) == AVATAR_OK);
    REQUIRE(model != nullptr);
    CHECK(std::filesystem::exists(dir + "/model.ckpt"));
    CHECK(std::filesystem::exists(dir + "/trainlog.csv"));
    CHECK(std::filesystem::exists(dir + "/resolved.json"));
    CHECK(std::filesystem::exists(dir + "/train_data.csv"));

    // Reload from disk and generate deterministically.
    avatar_model* loaded = nullptr;
    REQUIRE(avatar_model_load((dir + "/model.ckpt").c_str(), &loaded) == AVATAR_OK);

    avatar_dataset* synth_a = nullptr;
    avatar_dataset* synth_b = nullptr;
    REQUIRE(avatar_model_generate(loaded, 10, 5, -1, &synth_a) == AVATAR_OK);
    REQUIRE(avatar_model_generate(loaded, 10, 5, -1, &synth_b) == AVATAR_OK);
    const std::string ga = dir + "/synth_a.csv";
    const std::string gb = dir + "/synth_b.csv";
    CHECK(avatar_dataset_write_csv(synth_a, ga.c_str(), 1) == AVATAR_OK);
    CHECK(avatar_dataset_write_csv(synth_b, gb.c_str(), 1) == AVATAR_OK);
    CHECK(file_bytes(ga) == file_bytes(gb));

    size_t n = 0, t = 0, f = 0;
    avatar_dataset_dims(synth_a, &n, &t, &f);
    CHECK(n == 10);
    CHECK(t == 10);
    CHECK(f == 2);

    // Evaluate real vs synthetic.
    avatar_dataset* real = nullptr;
    REQUIRE(avatar_dataset_from_batch_csv((dir + "/train_data.csv").c_str(), &real) == AVATAR_OK);
    avatar_eval_options options{};
    options.repeats = 1;
    options.seed = 3;
    options.skip_projections = 1;
    avatar_eval_report* report = nullptr;
    REQUIRE(avatar_evaluate(real, synth_a, &options, &report) == AVATAR_OK);
    double rm = -1, rs = -1, fm = -1, fs = -1;
    CHECK(avatar_eval_scores(report, &rm, &rs, &fm, &fs) == AVATAR_OK);
    CHECK(rm >= 0.0);
    CHECK(rm <= 0.5);
    CHECK(fm >= 0.0);
    CHECK(rs == 0.0);  // single repeat

    const std::string scores = dir + "/scores.csv";
    CHECK(avatar_eval_write_csv(report, scores.c_str(), nullptr) == AVATAR_OK);
    std::string scores_text = file_bytes(scores);
    CHECK(scores_text.find("metric,mean,std,repeats") != std::string::npos);
    CHECK(scores_text.find("resemblance,") != std::string::npos);
    CHECK(scores_text.find("fidelity,") != std::string::npos);

    avatar_eval_report_free(report);
    avatar_dataset_free(real);
    avatar_dataset_free(synth_a);
    avatar_dataset_free(synth_b);
    avatar_model_free(model);
    avatar_model_free(loaded);
    std::filesystem::remove_all(dir);
}

TEST_CASE("trainlog determinism through the C API") {
    const std::string dir_a = temp_dir("avatar_capi_det_a");
    const std::string dir_b = temp_dir("avatar_capi_det_b");
    REQUIRE(avatar_train_run(kTinyConfig, dir_a.c_str(), 0, 0, nullptr, nullptr) == AVATAR_OK);
    REQUIRE(avatar_train_run(kTinyConfig, dir_b.c_str(), 0, 0, nullptr, nullptr) == AVATAR_OK);
    CHECK(file_bytes(dir_a + "/trainlog.csv") == file_bytes(dir_b + "/trainlog.csv"));
    CHECK(file_bytes(dir_a + "/train_data.csv") == file_bytes(dir_b + "/train_data.csv"));

    // Seed override changes the run.
    const std::string dir_c = temp_dir("avatar_capi_det_c");
    REQUIRE(avatar_train_run(kTinyConfig, dir_c.c_str(), 1, 999, nullptr, nullptr) == AVATAR_OK);
    CHECK(file_bytes(dir_a + "/trainlog.csv") != file_bytes(dir_c + "/trainlog.csv"));

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    std::filesystem::remove_all(dir_c);
}

TEST_CASE("model save round trip through the C API") {
    const std::string dir = temp_dir("avatar_capi_save");
    avatar_model* model = nullptr;
    REQUIRE(avatar_train_run(kTinyConfig, dir.c_str(), 0, 0, nullptr, &model) == AVATAR_OK);

    const std::string copy_path = dir + "/copy.ckpt";
    REQUIRE(avatar_model_save(model, copy_path.c_str()) == AVATAR_OK);
    CHECK(file_bytes(copy_path) == file_bytes(dir + "/model.ckpt"));

    avatar_model_free(model);
    std::filesystem::remove_all(dir);
}
