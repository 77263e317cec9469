#pragma once

#include "ocpd/tensor.hpp"

#include <cstdint>
#include <vector>

namespace ocpd {

struct AlsOptions {
    int max_iters = 500;
    double tol = 1e-8;   // relative loss change between sweeps
    std::uint64_t seed = 0;
};

struct AlsResult {
    KruskalFactors factors;
    /// Squared error after initialization, then after every sweep.
    std::vector<double> loss_trace;
    /// Number of least-squares solves that needed the 1e-10 * trace ridge.
    int ridge_solves = 0;
    int sweeps = 0;
    bool converged = false;
};

/// I x R matrix with i.i.d. U[0,1) entries from a seeded generator.
Matrix random_factor(std::size_t rows, std::size_t rank, std::uint64_t seed);

/// CP-ALS from a seeded uniform initialization. Requires 1 <= R <= min(IJ, JK, IK).
AlsResult cp_als(const DenseTensor3& t, std::size_t rank, const AlsOptions& opts = {});

/// CP-ALS from caller-provided factors; rejects an all-zero initial factor.
AlsResult cp_als(const DenseTensor3& t, KruskalFactors init, const AlsOptions& opts = {});

/// Solves X * G = rhs for X given a symmetric PSD Gram G; adds the 1e-10 * trace
/// ridge when G is numerically singular. Returns true if the ridge was used.
bool solve_gram(const Matrix& gram, const Matrix& rhs, Matrix& out);

} // namespace ocpd
