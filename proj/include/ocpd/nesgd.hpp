#pragma once

#include "ocpd/tensor.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace ocpd {

enum class OptimizerKind {
    Sgd,   // w += eta * grad
    Psgd,  // SGD plus Gaussian perturbation
    Nesgd, // Nesterov momentum, perturbation and L1 shrinkage
};

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

/// How the velocity accumulates the (scaled) gradient.
enum class VelocityForm {
    Classical, // v = friction * v + grad
    Ema,       // v = friction * v + (1 - friction) * grad
};

/// Per-block step normalization.
enum class StepScaling {
    None,      // literal eta * grad
    Lipschitz, // grad divided by the block's slice Lipschitz constant
};

/// Treatment of the sampled slice's temporal row.
enum class TemporalRow {
    Gradient,     // same stochastic step as A and B
    LeastSquares, // exact ridge least-squares row, then step A and B
};

/// eta(t) = eta0 / (1 + decay * t).
struct LearningRate {
    double eta0 = 1.0;
    double decay = 1.0;
    double operator()(std::uint64_t t) const noexcept {
        return eta0 / (1.0 + decay * static_cast<double>(t));
    }
};

struct NesgdOptions {
    LearningRate lr;
    double friction = 0.9;       // gamma, in [0, 1)
    double perturb_sigma = 1e-3; // noise standard deviation (times eta(t) when perturb_decay)
    bool perturb_decay = true;
    double l1_beta = 1e-4;       // elementwise subgradient penalty beta * sign(w)
    bool nag_lookahead = true;   // gradient at w + gamma * v instead of w
    VelocityForm velocity = VelocityForm::Classical;
    StepScaling scaling = StepScaling::Lipschitz;
    TemporalRow temporal_row = TemporalRow::Gradient;
    std::uint64_t seed = 0;      // perturbation stream

    void validate() const;
};

struct NesgdState {
    NesgdOptions opts;
    Matrix vA, vB, vC;
    std::uint64_t step = 0;
    std::mt19937_64 rng;

    /// Zero velocities shaped like `f`, generator seeded from opts.seed.
    static NesgdState init(const KruskalFactors& f, const NesgdOptions& opts);

    double eta() const noexcept { return opts.lr(step); }
    double noise_sigma() const noexcept;
};

/// Descent direction (X_(m) - F_m (KR)^T) (KR) for mode m, where KR is C kr B,
/// C kr A or B kr A. This is -1/2 of the loss gradient; updates use "+ eta".
Matrix cp_gradient(const Matrix& x_unfold, const KruskalFactors& f, int mode);

/// Per-slice directions for X_k ~ A diag(c) B^T.
struct SliceDirections {
    Matrix gA;  // I x R
    Matrix gB;  // J x R
    Vector gc;  // R
};
SliceDirections slice_directions(const Matrix& slice, const Matrix& A, const Matrix& B, const Vector& c);

/// Ridge (1e-10 * trace) least-squares temporal row for one slice: argmin_c ||X - A diag(c) B^T||.
Vector solve_temporal_row(const Matrix& slice, const Matrix& A, const Matrix& B);

/// In-place stochastic step on frontal slice `k` of `t`. Throws diverged when any
/// touched entry leaves [-1e12, 1e12].
void sgd_step(const DenseTensor3& t, std::size_t k, KruskalFactors& f, NesgdState& state, OptimizerKind kind);

/// One step on a detached slice whose temporal row is held fixed at `c`; updates A and B only.
void sgd_step_ab(const Matrix& slice, const Vector& c, KruskalFactors& f, NesgdState& state, OptimizerKind kind);

/// Value-semantics wrapper around sgd_step.
std::pair<KruskalFactors, NesgdState> sgd_sweep(const DenseTensor3& t, KruskalFactors f, NesgdState state,
                                                OptimizerKind kind, std::size_t sample_k);

} // namespace ocpd
