#pragma once

#include "ocpd/bordered_system.hpp"
#include "ocpd/kernel.hpp"
#include "ocpd/tensor.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace ocpd {

/// One-class SVM in the standard dual: 0 <= alpha_i <= c_bound, sum(alpha) = 1,
/// g(x) = sum_j alpha_j K(x, x_j) - rho.
struct OcsvmModel {
    Matrix train_x;     // n x d, one training vector per row
    Vector alpha;       // n
    double rho = 0.0;
    double nu = 0.5;
    double c_bound = 0; // 1 / (nu n) at rest; moves during an insertion
    KernelSpec kernel;

    BorderedSystem sys;                // S, in s_order
    std::vector<std::size_t> error;    // E, sorted
    std::vector<std::size_t> reserve;  // Rv, sorted
    Matrix gram;                       // cached K over train_x

    std::size_t size() const noexcept { return static_cast<std::size_t>(train_x.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(train_x.cols()); }
    const std::vector<std::size_t>& support() const noexcept { return sys.s_order; }

    /// g(x_i) for every training vector, from the cached Gram matrix.
    Vector training_decisions() const;
};

struct SmoOptions {
    double tol = 1e-8;              // stop when the maximal pair violation drops below
    long long max_updates = 1000000;
};

/// Batch training by pairwise (SMO) updates from the uniform start alpha = 1/n.
/// Requires n >= 2, 0 < nu < 1 and nu n >= 1 (else nu-too-small).
OcsvmModel train_batch(const Matrix& x, double nu, const KernelSpec& kernel, const SmoOptions& opts = {});

double decision_value(const OcsvmModel& m, const Vector& x);

/// +1 when g(x) >= 0, else -1.
int classify(const OcsvmModel& m, const Vector& x);

struct KktPartition {
    std::vector<std::size_t> S, E, R;
};

/// Partitions indices by alpha (0, c_bound or strictly inside, alpha tolerance
/// 1e-9 * c_bound) and checks the matching decision-value row within `tol`.
/// Throws KktViolation for the worst offender. `pending` is skipped (a candidate
/// mid-insertion has no KKT row yet).
KktPartition kkt_partition(const OcsvmModel& m, double tol, std::optional<std::size_t> pending = std::nullopt);

/// Rho for an empty margin set: midpoint of [max_E G, min_R G] where G = K alpha.
double rho_without_margin(const Vector& kalpha, const std::vector<std::size_t>& error,
                          const std::vector<std::size_t>& reserve);

/// Rebuilds E, Rv, S (ascending) and q_inv from alpha. With `snap`, alphas within
/// 1e-9 * c_bound of a bound are set to it exactly.
void rebuild_sets(OcsvmModel& m, bool snap);

/// rebuild_sets with snapping, then rho from the margin set. Used after batch
/// training and by fallbacks.
void refresh_partition(OcsvmModel& m);

} // namespace ocpd
