#include "ocpd/stream_decomposition.hpp"

#include "ocpd/cp_als.hpp"
#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ocpd {

void normalize_columns(KruskalFactors& f, NesgdState* state) {
    for (Eigen::Index r = 0; r < f.A.cols(); ++r) {
        const double na = f.A.col(r).norm();
        const double nb = f.B.col(r).norm();
        if (!(na > 0.0) || !(nb > 0.0)) continue;
        f.A.col(r) /= na;
        f.B.col(r) /= nb;
        f.C.col(r) *= na * nb;
        if (state) {
            state->vA.col(r) /= na;
            state->vB.col(r) /= nb;
            state->vC.col(r) *= na * nb;
        }
    }
}

StreamDecomposition decompose_stream_init(const DenseTensor3& window, std::size_t rank, const StreamOptions& opts) {
    if (rank == 0) {
        throw Error(ErrorCode::InvalidArgument, "rank must be positive");
    }
    if (opts.max_epochs < 0 || !(opts.tol >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "epoch budget and tol must be non-negative");
    }
    const std::size_t K = window.dim_k();

    StreamDecomposition d;
    d.kind = opts.kind;
    d.window = window;
    d.factors = KruskalFactors(random_factor(window.dim_i(), rank, opts.init_seed),
                               random_factor(window.dim_j(), rank, opts.init_seed + 1),
                               random_factor(K, rank, opts.init_seed + 2));
    d.state = NesgdState::init(d.factors, opts.nesgd);

    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffler(opts.shuffle_seed);

    double prev = rmse(window, d.factors);
    for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffler);
        for (std::size_t k : order) {
            sgd_step(window, k, d.factors, d.state, d.kind);
        }
        normalize_columns(d.factors, &d.state);
        const double cur = rmse(window, d.factors);
        d.epoch_rmse.push_back(cur);
        d.epochs = epoch + 1;
        if (std::abs(prev - cur) < opts.tol) break;
        prev = cur;
    }

    for (std::size_t k = 0; k < K; ++k) {
        d.factors.C.row(static_cast<Eigen::Index>(k)) =
            solve_temporal_row(window.slice(k), d.factors.A, d.factors.B).transpose();
    }
    d.state.vC.setZero();
    return d;
}

Vector update_online(StreamDecomposition& d, const Matrix& slice) {
    if (slice.rows() != d.factors.A.rows() || slice.cols() != d.factors.B.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "slice must be I x J");
    }
    require_finite(slice, "slice");
    Vector c_new = solve_temporal_row(slice, d.factors.A, d.factors.B);
    const Vector norm_a = d.factors.A.colwise().norm().transpose();
    const Vector norm_b = d.factors.B.colwise().norm().transpose();
    sgd_step_ab(slice, c_new, d.factors, d.state, d.kind);
    // The fit is flat along a joint rescaling of A and B (c absorbs it), so hold
    // the column norms; otherwise L1 shrinkage drifts the scale without bound.
    for (Eigen::Index r = 0; r < d.factors.A.cols(); ++r) {
        const double na = d.factors.A.col(r).norm();
        const double nb = d.factors.B.col(r).norm();
        if (na > 0.0) d.factors.A.col(r) *= norm_a(r) / na;
        if (nb > 0.0) d.factors.B.col(r) *= norm_b(r) / nb;
    }

    const Eigen::Index k = d.factors.C.rows();
    d.factors.C.conservativeResize(k + 1, Eigen::NoChange);
    d.factors.C.row(k) = c_new.transpose();
    d.state.vC.conservativeResize(k + 1, Eigen::NoChange);
    d.state.vC.row(k).setZero();
    return c_new;
}

} // namespace ocpd
