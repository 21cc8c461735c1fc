#pragma once

#include <cstddef>
#include <vector>

namespace avatar {

// Symmetric eigendecomposition by cyclic Jacobi rotations; eigenpairs are
// returned sorted by descending eigenvalue.
struct EigenDecomposition {
    std::vector<double> eigenvalues;   // size n
    std::vector<double> eigenvectors;  // n x n, column j is the j-th eigenvector
};
EigenDecomposition symmetric_eigen(const std::vector<double>& matrix, std::size_t n);

// Projects M x D points onto the top-2 principal directions of the column
// covariance. Sign convention: the largest-magnitude component of each
// direction is positive. Requires M >= 3.
std::vector<double> pca_2d(const std::vector<double>& points, std::size_t m, std::size_t dims);

struct TsneOptions {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 100.0;
    std::size_t exaggeration_iters = 100;  // P scaled by 4 while active
    double exaggeration_factor = 4.0;
    std::size_t momentum_switch_iter = 250;  // 0.5 before, 0.8 after
};

struct TsneResult {
    std::vector<double> embedding;         // M x 2
    std::vector<double> kl_trace;          // objective per iteration
    std::vector<double> row_perplexities;  // achieved perplexity per point
};

// Exact O(M^2) t-SNE: per-row Gaussian bandwidths found by bisection against
// the target perplexity, symmetrized P, Student-t Q, gradient descent with
// momentum and gain adaptation, PCA initialization rescaled to std 1e-4.
TsneResult tsne_2d(const std::vector<double>& points, std::size_t m, std::size_t dims,
                   const TsneOptions& options);

}  // namespace avatar
