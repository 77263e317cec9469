#pragma once

#include "ocpd/nesgd.hpp"
#include "ocpd/tensor.hpp"

#include <cstdint>
#include <vector>

namespace ocpd {

struct StreamOptions {
    OptimizerKind kind = OptimizerKind::Nesgd;
    NesgdOptions nesgd = [] {
        NesgdOptions o;
        o.temporal_row = TemporalRow::LeastSquares;
        o.lr = {0.3, 0.01};
        return o;
    }();
    int max_epochs = 200;
    /// Stop once the epoch-to-epoch RMSE change falls below tol.
    double tol = 1e-7;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 1;
};

/// Factors, optimizer state and the retained training window. Single writer.
struct StreamDecomposition {
    KruskalFactors factors;
    NesgdState state;
    OptimizerKind kind = OptimizerKind::Nesgd;
    DenseTensor3 window;
    std::vector<double> epoch_rmse; // RMSE on the window after each epoch
    int epochs = 0;

    std::size_t rank() const noexcept { return factors.rank(); }
};

/// Rescales every column so A and B have unit norm, moving the scale into C.
/// Velocities are rescaled the same way when `state` is given.
void normalize_columns(KruskalFactors& f, NesgdState* state = nullptr);

/// Fits the training window with shuffled per-slice steps until the epoch RMSE
/// settles or the epoch budget runs out, normalizing
/// columns after each epoch. Temporal rows are re-solved by ridge
/// least squares against the final A, B so they match rows produced online.
StreamDecomposition decompose_stream_init(const DenseTensor3& window, std::size_t rank,
                                          const StreamOptions& opts = {});

/// Absorbs one I x J slice: least-squares temporal row, one step on A and B
/// using that slice (column norms of A and B held at their pre-step values),
/// then the row is appended to C (velocity row zero).
/// Returns the new temporal row.
Vector update_online(StreamDecomposition& d, const Matrix& slice);

} // namespace ocpd
