#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/adam.hpp"
#include "core/cells.hpp"
#include "core/common.hpp"
#include "core/losses.hpp"
#include "core/tensor.hpp"

namespace avatar {

void EvalConfig::validate() const {
    require(repeats >= 1, ErrorCategory::invalid_argument, "eval: repeats must be positive");
    require(train_frac > 0.0 && train_frac < 1.0, ErrorCategory::invalid_argument,
            "eval: train_frac must lie in (0, 1)");
    require(batch_size >= 1, ErrorCategory::invalid_argument, "eval: batch_size must be positive");
    require(perplexity >= 3.0, ErrorCategory::invalid_argument,
            "eval: perplexity must be at least 3");
}

namespace {

constexpr double kProbEps = 1e-7;

struct LstmNet {
    LstmCell cell;
    Tensor head_weight, head_bias;

    static LstmNet create(std::size_t input, std::size_t hidden, std::size_t output,
                          SeededRng& rng) {
        LstmNet net;
        net.cell = LstmCell::create(input, hidden, rng);
        net.head_weight = init_weight(hidden, output, rng);
        net.head_bias = Tensor::zeros({output}, true);
        return net;
    }

    std::vector<Tensor> parameters() {
        auto params = cell.parameters();
        params.push_back(head_weight);
        params.push_back(head_bias);
        return params;
    }

    // Hidden states for every step: N x T x H.
    Tensor hidden_sequence(const Tensor& x) const {
        const std::size_t n = x.dim(0), t_len = x.dim(1);
        Tensor h = Tensor::zeros({n, cell.hidden_size});
        Tensor c = Tensor::zeros({n, cell.hidden_size});
        std::vector<Tensor> steps;
        steps.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            auto out = lstm_step(cell, select_time(x, t), h, c);
            h = out.h;
            c = out.c;
            steps.push_back(h);
        }
        return stack_time(steps);
    }

    // Classification probability from the final hidden state: N x 1.
    Tensor classify(const Tensor& x) const {
        Tensor hidden = hidden_sequence(x);
        Tensor last = select_time(hidden, x.dim(1) - 1);
        return sigmoid(add(matmul(last, head_weight), head_bias));
    }

    // Per-step prediction: N x T x output.
    Tensor predict(const Tensor& x) const {
        return sigmoid(add(matmul(hidden_sequence(x), head_weight), head_bias));
    }
};

Tensor bce_loss(const Tensor& probs, const Tensor& labels) {
    Tensor p = clamp(probs, kProbEps, 1.0 - kProbEps);
    Tensor term = add(mul(labels, log(p)), mul(affine(labels, -1.0, 1.0), log(affine(p, -1.0, 1.0))));
    return affine(mean(term), -1.0, 0.0);
}

SequenceBatch concat_batches(const SequenceBatch& a, const SequenceBatch& b) {
    SequenceBatch out = SequenceBatch::empty(a.count + b.count, a.steps, a.features);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(),
              out.values.begin() + static_cast<std::ptrdiff_t>(a.values.size()));
    return out;
}

void check_comparable(const char* op, const SequenceBatch& real, const SequenceBatch& synth) {
    require(real.count >= 1 && synth.count >= 1, ErrorCategory::invalid_argument,
            std::string(op) + ": both datasets must be nonempty");
    require(real.steps == synth.steps && real.features == synth.features,
            ErrorCategory::invalid_argument,
            std::string(op) + ": shape mismatch between real and synthetic data");
}

double population_std(const std::vector<double>& xs, double mean_value) {
    double acc = 0.0;
    for (double x : xs) acc += (x - mean_value) * (x - mean_value);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

double resemblance_score(const SequenceBatch& real, const SequenceBatch& synth,
                         const EvalConfig& config, SeededRng& rng) {
    check_comparable("resemblance_score", real, synth);
    const double ratio = static_cast<double>(std::max(real.count, synth.count)) /
                         static_cast<double>(std::min(real.count, synth.count));
    require(ratio <= 10.0, ErrorCategory::invalid_argument,
            "resemblance_score: class imbalance beyond 10:1");

    SequenceBatch combined = concat_batches(real, synth);
    std::vector<double> labels(combined.count, 0.0);
    for (std::size_t i = 0; i < real.count; ++i) labels[i] = 1.0;

    SplitIndices split = split_shuffle(combined.count, config.train_frac, rng);
    LstmNet net = LstmNet::create(combined.features, 2 * combined.features, 1, rng);
    AdamState adam(config.learning_rate);
    auto params = net.parameters();
    const std::size_t batch = std::min(config.batch_size, split.train.size());

    for (std::size_t iter = 0; iter < config.classifier_iters; ++iter) {
        Tape::active().clear();
        for (Tensor& p : params) p.zero_grad();
        const auto idx = sample_batch(split.train, batch, rng);
        Tensor x = batch_to_tensor(combined, idx);
        std::vector<double> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
        Tensor label_tensor = Tensor::from_values({idx.size(), 1}, std::move(y));
        Tensor loss = bce_loss(net.classify(x), label_tensor);
        backward(loss);
        adam.step(params);
    }
    Tape::active().clear();

    std::size_t wrong = 0;
    {
        NoGradGuard inference;
        Tensor x = batch_to_tensor(combined, split.test);
        Tensor probs = net.classify(x);
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            const double predicted = probs.at(i) >= 0.5 ? 1.0 : 0.0;
            if (predicted != labels[split.test[i]]) ++wrong;
        }
        Tape::active().clear();
    }
    const double error = static_cast<double>(wrong) / static_cast<double>(split.test.size());
    return std::fabs(0.5 - error);
}

double predictive_fidelity(const SequenceBatch& real, const SequenceBatch& synth,
                           const EvalConfig& config, SeededRng& rng) {
    check_comparable("predictive_fidelity", real, synth);
    require(real.steps >= 2, ErrorCategory::invalid_argument,
            "predictive_fidelity: sequences need at least 2 steps");

    LstmNet net = LstmNet::create(real.features, real.features, real.features, rng);
    AdamState adam(config.learning_rate);
    auto params = net.parameters();
    std::vector<std::size_t> pool(synth.count);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    const std::size_t batch = std::min(config.batch_size, synth.count);

    for (std::size_t iter = 0; iter < config.predictor_iters; ++iter) {
        Tape::active().clear();
        for (Tensor& p : params) p.zero_grad();
        Tensor x = batch_to_tensor(synth, sample_batch(pool, batch, rng));
        Tensor inputs = slice_time(x, 0, x.dim(1) - 1);
        Tensor targets = slice_time(x, 1, x.dim(1));
        Tensor loss = mean(abs(sub(net.predict(inputs), targets)));
        backward(loss);
        adam.step(params);
    }
    Tape::active().clear();

    double mae = 0.0;
    {
        NoGradGuard inference;
        Tensor x = batch_to_tensor(real);
        Tensor inputs = slice_time(x, 0, x.dim(1) - 1);
        Tensor targets = slice_time(x, 1, x.dim(1));
        mae = mean(abs(sub(net.predict(inputs), targets))).scalar_value();
        Tape::active().clear();
    }
    return mae;
}

std::vector<double> temporal_flatten(const SequenceBatch& batch) {
    std::vector<double> flat(batch.count * batch.steps, 0.0);
    for (std::size_t n = 0; n < batch.count; ++n)
        for (std::size_t t = 0; t < batch.steps; ++t) {
            double acc = 0.0;
            for (std::size_t f = 0; f < batch.features; ++f) acc += batch.at(n, t, f);
            flat[n * batch.steps + t] = acc / static_cast<double>(batch.features);
        }
    return flat;
}

namespace {

SequenceBatch head_samples(const SequenceBatch& batch, std::size_t cap) {
    if (batch.count <= cap) return batch;
    SequenceBatch out = SequenceBatch::empty(cap, batch.steps, batch.features);
    std::copy_n(batch.values.begin(), out.values.size(), out.values.begin());
    return out;
}

}  // namespace

EvalReport run_full_evaluation(const SequenceBatch& real, const SequenceBatch& synth,
                               const EvalConfig& config, std::uint64_t master_seed,
                               bool with_scores, bool with_projections) {
    config.validate();
    check_comparable("run_full_evaluation", real, synth);

    EvalReport report;
    if (with_scores) {
        report.repeats = config.repeats;
        for (std::size_t i = 0; i < config.repeats; ++i) {
            SeededRng rng(master_seed + i);
            report.resemblance_runs.push_back(resemblance_score(real, synth, config, rng));
            report.fidelity_runs.push_back(predictive_fidelity(real, synth, config, rng));
        }
        auto mean_of = [](const std::vector<double>& xs) {
            double acc = 0.0;
            for (double x : xs) acc += x;
            return acc / static_cast<double>(xs.size());
        };
        report.resemblance_mean = mean_of(report.resemblance_runs);
        report.resemblance_std = population_std(report.resemblance_runs, report.resemblance_mean);
        report.fidelity_mean = mean_of(report.fidelity_runs);
        report.fidelity_std = population_std(report.fidelity_runs, report.fidelity_mean);
    }

    if (with_projections) {
        const SequenceBatch real_head = head_samples(real, config.max_projection_samples);
        const SequenceBatch synth_head = head_samples(synth, config.max_projection_samples);
        const std::size_t m_real = real_head.count;
        const std::size_t m = m_real + synth_head.count;

        std::vector<double> combined = temporal_flatten(real_head);
        const std::vector<double> synth_flat = temporal_flatten(synth_head);
        combined.insert(combined.end(), synth_flat.begin(), synth_flat.end());

        const std::vector<double> pca = pca_2d(combined, m, real.steps);
        for (std::size_t i = 0; i < m; ++i)
            report.projections.push_back({"pca", pca[i * 2], pca[i * 2 + 1], i >= m_real});

        if (m >= 8) {
            TsneOptions options;
            options.perplexity = std::min(config.perplexity, (static_cast<double>(m) - 1.0) / 3.0);
            options.iterations = config.tsne_iters;
            const TsneResult tsne = tsne_2d(combined, m, real.steps, options);
            for (std::size_t i = 0; i < m; ++i)
                report.projections.push_back(
                    {"tsne", tsne.embedding[i * 2], tsne.embedding[i * 2 + 1], i >= m_real});
        }
    }
    return report;
}

void write_scores_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "eval: cannot write " + path);
    char buf[256];
    out << "metric,mean,std,repeats\n";
    std::snprintf(buf, sizeof(buf), "resemblance,%.17g,%.17g,%zu\n", report.resemblance_mean,
                  report.resemblance_std, report.repeats);
    out << buf;
    std::snprintf(buf, sizeof(buf), "fidelity,%.17g,%.17g,%zu\n", report.fidelity_mean,
                  report.fidelity_std, report.repeats);
    out << buf;
    require(out.good(), ErrorCategory::io, "eval: write failed for " + path);
}

void write_projections_csv(const std::string& path, const std::vector<ProjectionRow>& rows) {
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "eval: cannot write " + path);
    out << "method,x,y,origin\n";
    char buf[256];
    for (const ProjectionRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%s\n", row.method.c_str(), row.x, row.y,
                      row.synthetic ? "synthetic" : "real");
        out << buf;
    }
    require(out.good(), ErrorCategory::io, "eval: write failed for " + path);
}

}  // namespace avatar
