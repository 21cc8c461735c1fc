#include "core/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "core/common.hpp"

namespace avatar {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string cell = trim(raw);
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    require(ec == std::errc() && ptr == end && !cell.empty(), ErrorCategory::io,
            "csv: non-numeric cell '" + cell + "' at row " + std::to_string(row) + ", column " +
                std::to_string(col));
    return value;
}

void format_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

SequenceBatch SequenceBatch::empty(std::size_t count, std::size_t steps, std::size_t features) {
    SequenceBatch b;
    b.count = count;
    b.steps = steps;
    b.features = features;
    b.values.assign(count * steps * features, 0.0);
    return b;
}

RawSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "csv: cannot open " + path);

    RawSeries series;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCategory::io,
            "csv: empty file " + path);
    for (const std::string& name : split_line(line)) series.feature_names.push_back(trim(name));
    series.features = series.feature_names.size();
    require(series.features > 0, ErrorCategory::io, "csv: empty header in " + path);

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        require(cells.size() == series.features, ErrorCategory::io,
                "csv: ragged row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                    " cells, expected " + std::to_string(series.features));
        for (std::size_t c = 0; c < cells.size(); ++c)
            series.values.push_back(parse_cell(cells[c], row, c + 1));
        ++series.steps;
    }
    require(series.steps > 0, ErrorCategory::io, "csv: no data rows in " + path);
    return series;
}

std::pair<RawSeries, NormalizerState> minmax_normalize(const RawSeries& series) {
    NormalizerState state;
    state.mins.assign(series.features, 0.0);
    state.maxs.assign(series.features, 0.0);
    for (std::size_t f = 0; f < series.features; ++f) {
        double lo = series.at(0, f), hi = series.at(0, f);
        for (std::size_t t = 1; t < series.steps; ++t) {
            lo = std::min(lo, series.at(t, f));
            hi = std::max(hi, series.at(t, f));
        }
        state.mins[f] = lo;
        state.maxs[f] = hi;
    }
    RawSeries out = series;
    for (std::size_t t = 0; t < series.steps; ++t)
        for (std::size_t f = 0; f < series.features; ++f)
            out.values[t * series.features + f] = state.normalize_value(series.at(t, f), f);
    return {std::move(out), std::move(state)};
}

SequenceBatch slice_windows(const RawSeries& series, std::size_t window, std::size_t stride) {
    require(window >= 1 && window <= series.steps, ErrorCategory::invalid_argument,
            "slice_windows: window " + std::to_string(window) + " exceeds series length " +
                std::to_string(series.steps));
    require(stride >= 1, ErrorCategory::invalid_argument, "slice_windows: stride must be >= 1");
    const std::size_t count = (series.steps - window) / stride + 1;
    SequenceBatch batch = SequenceBatch::empty(count, window, series.features);
    for (std::size_t n = 0; n < count; ++n)
        for (std::size_t t = 0; t < window; ++t)
            for (std::size_t f = 0; f < series.features; ++f)
                batch.at(n, t, f) = series.at(n * stride + t, f);
    return batch;
}

SequenceBatch generate_sines(std::size_t n, std::size_t t, std::size_t dims, SeededRng& rng,
                             std::vector<SineParams>* params_out) {
    require(n >= 1 && t >= 1 && dims >= 1, ErrorCategory::invalid_argument,
            "generate_sines: n, t, dims must all be positive");
    SequenceBatch batch = SequenceBatch::empty(n, t, dims);
    if (params_out) params_out->resize(n * dims);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t d = 0; d < dims; ++d) {
            const double eta = rng.uniform();
            const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
            if (params_out) (*params_out)[s * dims + d] = {eta, theta};
            for (std::size_t step = 0; step < t; ++step) {
                const double raw =
                    std::sin(2.0 * std::numbers::pi * eta * static_cast<double>(step) + theta);
                batch.at(s, step, d) = (raw + 1.0) / 2.0;
            }
        }
    }
    return batch;
}

NormalizerState sine_normalizer(std::size_t dims) {
    NormalizerState state;
    state.mins.assign(dims, -1.0);
    state.maxs.assign(dims, 1.0);
    // The sine rescale is exactly (x + 1) / 2, so invert it exactly rather
    // than through the epsilon-guarded span.
    return state;
}

SplitIndices split_shuffle(std::size_t count, double train_frac, SeededRng& rng) {
    require(train_frac > 0.0 && train_frac < 1.0, ErrorCategory::invalid_argument,
            "split_shuffle: train_frac must lie in (0, 1)");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    for (std::size_t i = count; i-- > 1;) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(order[i], order[j]);
    }
    const auto train_count = static_cast<std::size_t>(
        std::floor(static_cast<double>(count) * train_frac));
    require(train_count >= 1 && train_count < count, ErrorCategory::invalid_argument,
            "split_shuffle: split leaves an empty side (count " + std::to_string(count) + ")");
    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
    return split;
}

std::vector<std::size_t> sample_batch(const std::vector<std::size_t>& pool, std::size_t batch_size,
                                      SeededRng& rng) {
    require(!pool.empty(), ErrorCategory::invalid_argument, "sample_batch: empty pool");
    require(batch_size >= 1 && batch_size <= pool.size(), ErrorCategory::invalid_argument,
            "sample_batch: batch size " + std::to_string(batch_size) +
                " exceeds pool size " + std::to_string(pool.size()));
    std::vector<std::size_t> out(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) out[i] = pool[rng.uniform_index(pool.size())];
    return out;
}

Tensor batch_to_tensor(const SequenceBatch& batch, const std::vector<std::size_t>& indices) {
    require(!indices.empty(), ErrorCategory::invalid_argument, "batch_to_tensor: no indices");
    std::vector<double> values;
    values.reserve(indices.size() * batch.steps * batch.features);
    const std::size_t stride = batch.steps * batch.features;
    for (std::size_t idx : indices) {
        require(idx < batch.count, ErrorCategory::invalid_argument,
                "batch_to_tensor: index out of range");
        const double* src = batch.values.data() + idx * stride;
        values.insert(values.end(), src, src + stride);
    }
    return Tensor::from_values({indices.size(), batch.steps, batch.features}, std::move(values));
}

Tensor batch_to_tensor(const SequenceBatch& batch) {
    std::vector<std::size_t> all(batch.count);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return batch_to_tensor(batch, all);
}

SequenceBatch tensor_to_batch(const Tensor& t) {
    require(t.rank() == 3, ErrorCategory::invalid_argument,
            "tensor_to_batch: expected rank-3 tensor, got " + shape_to_string(t.shape()));
    SequenceBatch batch = SequenceBatch::empty(t.dim(0), t.dim(1), t.dim(2));
    auto v = t.values();
    batch.values.assign(v.begin(), v.end());
    return batch;
}

void write_batch_csv(const std::string& path, const SequenceBatch& batch) {
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "csv: cannot write " + path);
    std::string line = "sample_id,t";
    for (std::size_t f = 0; f < batch.features; ++f) line += ",f" + std::to_string(f);
    out << line << '\n';
    for (std::size_t n = 0; n < batch.count; ++n)
        for (std::size_t t = 0; t < batch.steps; ++t) {
            line.clear();
            line += std::to_string(n);
            line += ',';
            line += std::to_string(t);
            for (std::size_t f = 0; f < batch.features; ++f) {
                line += ',';
                format_double(line, batch.at(n, t, f));
            }
            out << line << '\n';
        }
    require(out.good(), ErrorCategory::io, "csv: write failed for " + path);
}

SequenceBatch read_batch_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "csv: cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCategory::io,
            "csv: empty file " + path);
    const auto header = split_line(line);
    require(header.size() >= 3 && trim(header[0]) == "sample_id" && trim(header[1]) == "t",
            ErrorCategory::io, "csv: " + path + " is not a sequence batch file");
    const std::size_t features = header.size() - 2;

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        require(cells.size() == header.size(), ErrorCategory::io,
                "csv: ragged row " + std::to_string(row_no) + " in " + path);
        for (std::size_t c = 2; c < cells.size(); ++c)
            values.push_back(parse_cell(cells[c], row_no, c + 1));
        ++rows;
    }
    require(rows > 0, ErrorCategory::io, "csv: no data rows in " + path);

    // Rows are (sample, step) in order; infer T from the first sample block.
    std::ifstream again(path);
    std::getline(again, line);
    std::size_t steps = 0;
    std::string first_id;
    while (std::getline(again, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (first_id.empty()) first_id = trim(cells[0]);
        if (trim(cells[0]) != first_id) break;
        ++steps;
    }
    require(steps > 0 && rows % steps == 0, ErrorCategory::io,
            "csv: inconsistent sample lengths in " + path);

    SequenceBatch batch;
    batch.count = rows / steps;
    batch.steps = steps;
    batch.features = features;
    batch.values = std::move(values);
    return batch;
}

}  // namespace avatar
