#include "core/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/common.hpp"

namespace avatar {

EigenDecomposition symmetric_eigen(const std::vector<double>& matrix, std::size_t n) {
    require(matrix.size() == n * n, ErrorCategory::invalid_argument,
            "symmetric_eigen: matrix size does not match dimension");
    std::vector<double> a = matrix;
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    const std::size_t max_sweeps = 100;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a[i * n + i];
    std::stable_sort(order.begin(), order.end(),
                     [&diag](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    EigenDecomposition result;
    result.eigenvalues.resize(n);
    result.eigenvectors.resize(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        result.eigenvalues[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i)
            result.eigenvectors[i * n + j] = v[i * n + order[j]];
    }
    return result;
}

std::vector<double> pca_2d(const std::vector<double>& points, std::size_t m, std::size_t dims) {
    require(m >= 3, ErrorCategory::invalid_argument, "pca_2d: needs at least 3 points");
    require(dims >= 2, ErrorCategory::invalid_argument, "pca_2d: needs at least 2 dimensions");
    require(points.size() == m * dims, ErrorCategory::invalid_argument,
            "pca_2d: point buffer size mismatch");

    std::vector<double> centered = points;
    for (std::size_t d = 0; d < dims; ++d) {
        double mu = 0.0;
        for (std::size_t i = 0; i < m; ++i) mu += points[i * dims + d];
        mu /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) centered[i * dims + d] -= mu;
    }

    std::vector<double> cov(dims * dims, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = centered.data() + i * dims;
        for (std::size_t d1 = 0; d1 < dims; ++d1)
            for (std::size_t d2 = d1; d2 < dims; ++d2) cov[d1 * dims + d2] += row[d1] * row[d2];
    }
    const double denom = static_cast<double>(m - 1);
    for (std::size_t d1 = 0; d1 < dims; ++d1)
        for (std::size_t d2 = d1; d2 < dims; ++d2) {
            cov[d1 * dims + d2] /= denom;
            cov[d2 * dims + d1] = cov[d1 * dims + d2];
        }

    EigenDecomposition eig = symmetric_eigen(cov, dims);

    // Deterministic sign: largest-magnitude coefficient positive.
    for (std::size_t j = 0; j < 2; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < dims; ++i) {
            const double mag = std::fabs(eig.eigenvectors[i * dims + j]);
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (eig.eigenvectors[arg * dims + j] < 0.0)
            for (std::size_t i = 0; i < dims; ++i) eig.eigenvectors[i * dims + j] = -eig.eigenvectors[i * dims + j];
    }

    std::vector<double> projected(m * 2, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dims; ++d)
                dot += centered[i * dims + d] * eig.eigenvectors[d * dims + j];
            projected[i * 2 + j] = dot;
        }
    return projected;
}

namespace {

// Conditional row distribution at a given precision; returns entropy (nats).
// Distances are shifted by the row minimum before exponentiation; the shift
// cancels in the normalization and keeps exp() away from underflow at any
// bandwidth.
double row_distribution(const std::vector<double>& sq_dist, std::size_t m, std::size_t row,
                        double beta, std::vector<double>& p_row) {
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
        if (j != row) d_min = std::min(d_min, sq_dist[row * m + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (j == row) {
            p_row[j] = 0.0;
            continue;
        }
        p_row[j] = std::exp(-beta * (sq_dist[row * m + j] - d_min));
        sum += p_row[j];
    }
    double entropy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (j == row) continue;
        p_row[j] /= sum;
        if (p_row[j] > 1e-300) entropy -= p_row[j] * std::log(p_row[j]);
    }
    return entropy;
}

}  // namespace

TsneResult tsne_2d(const std::vector<double>& points, std::size_t m, std::size_t dims,
                   const TsneOptions& options) {
    require(points.size() == m * dims, ErrorCategory::invalid_argument,
            "tsne_2d: point buffer size mismatch");
    require(options.perplexity >= 3.0, ErrorCategory::invalid_argument,
            "tsne_2d: perplexity must be at least 3");
    require(options.perplexity < static_cast<double>(m), ErrorCategory::invalid_argument,
            "tsne_2d: perplexity must be below the number of points");

    std::vector<double> sq_dist(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < dims; ++k) {
                const double diff = points[i * dims + k] - points[j * dims + k];
                d += diff * diff;
            }
            sq_dist[i * m + j] = d;
            sq_dist[j * m + i] = d;
        }

    // Bisection per row to hit the target perplexity.
    const double target_entropy = std::log(options.perplexity);
    std::vector<double> p_cond(m * m, 0.0);
    std::vector<double> p_row(m, 0.0);
    TsneResult result;
    result.row_perplexities.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        double entropy = row_distribution(sq_dist, m, i, beta, p_row);
        for (int iter = 0; iter < 200 && std::fabs(std::exp(entropy) - options.perplexity) > 1e-5;
             ++iter) {
            if (entropy > target_entropy) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = beta_lo == 0.0 ? beta / 2.0 : (beta + beta_lo) / 2.0;
            }
            entropy = row_distribution(sq_dist, m, i, beta, p_row);
        }
        result.row_perplexities[i] = std::exp(entropy);
        for (std::size_t j = 0; j < m; ++j) p_cond[i * m + j] = p_row[j];
    }

    // Symmetrize; every entry floored for log safety.
    std::vector<double> p(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            p[i * m + j] =
                std::max((p_cond[i * m + j] + p_cond[j * m + i]) / (2.0 * static_cast<double>(m)),
                         1e-12);
        }

    // PCA init rescaled to per-column std 1e-4.
    std::vector<double> y = pca_2d(points, m, dims);
    for (std::size_t d = 0; d < 2; ++d) {
        double mu = 0.0, var = 0.0;
        for (std::size_t i = 0; i < m; ++i) mu += y[i * 2 + d];
        mu /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double c = y[i * 2 + d] - mu;
            var += c * c;
        }
        var /= static_cast<double>(m);
        const double scale = var > 0.0 ? 1e-4 / std::sqrt(var) : 0.0;
        for (std::size_t i = 0; i < m; ++i) y[i * 2 + d] = (y[i * 2 + d] - mu) * scale;
    }

    std::vector<double> velocity(m * 2, 0.0);
    std::vector<double> gains(m * 2, 1.0);
    std::vector<double> q_unnorm(m * m, 0.0);
    std::vector<double> grad(m * 2, 0.0);
    result.kl_trace.reserve(options.iterations);

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        const bool exaggerating = iter < options.exaggeration_iters;
        const double p_scale = exaggerating ? options.exaggeration_factor : 1.0;

        double q_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const double dx = y[i * 2] - y[j * 2];
                const double dy = y[i * 2 + 1] - y[j * 2 + 1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                q_unnorm[i * m + j] = q;
                q_unnorm[j * m + i] = q;
                q_sum += 2.0 * q;
            }
        if (q_sum <= 0.0) q_sum = 1e-300;

        std::fill(grad.begin(), grad.end(), 0.0);
        double kl = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                const double pij = p_scale * p[i * m + j];
                const double qn = std::max(q_unnorm[i * m + j] / q_sum, 1e-12);
                const double mult = 4.0 * (pij - qn) * q_unnorm[i * m + j];
                grad[i * 2] += mult * (y[i * 2] - y[j * 2]);
                grad[i * 2 + 1] += mult * (y[i * 2 + 1] - y[j * 2 + 1]);
                if (j > i) kl += 2.0 * pij * std::log(pij / qn);
            }
        }
        result.kl_trace.push_back(kl);

        const double momentum = iter < options.momentum_switch_iter ? 0.5 : 0.8;
        for (std::size_t k = 0; k < m * 2; ++k) {
            const bool same_sign = (grad[k] > 0.0) == (velocity[k] > 0.0);
            gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            velocity[k] = momentum * velocity[k] - options.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        for (std::size_t d = 0; d < 2; ++d) {
            double mu = 0.0;
            for (std::size_t i = 0; i < m; ++i) mu += y[i * 2 + d];
            mu /= static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) y[i * 2 + d] -= mu;
        }
    }

    result.embedding = std::move(y);
    return result;
}

}  // namespace avatar
