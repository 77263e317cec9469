#pragma once

#include "ocpd/tensor.hpp"

#include <cstddef>
#include <vector>

namespace ocpd {

/// Maintained inverse of Q = [[0, 1^T], [1, K_SS]] over the margin support set S.
/// Row/column 0 belongs to the offset variable b = -rho; row p (p >= 1) to
/// s_order[p - 1]. With S empty, q_inv is 0 x 0.
struct BorderedSystem {
    Matrix q_inv;
    std::vector<std::size_t> s_order;
    /// Number of times an update fell back to a full recompute.
    int recomputes = 0;

    bool empty() const noexcept { return s_order.empty(); }
    std::size_t size() const noexcept { return s_order.size(); }

    /// Position of `index` in s_order, or size() if absent.
    std::size_t position(std::size_t index) const noexcept;

    /// Explicit Q for the current s_order, taking kernel values from `gram`.
    Matrix assemble(const Matrix& gram) const;

    /// max |q_inv * Q - I|; 0 for the empty system.
    double residual(const Matrix& gram) const;

    /// Inverts Q from scratch (full-pivot LU, pseudo-inverse if singular).
    static BorderedSystem recompute(const Matrix& gram, std::vector<std::size_t> s_order);
};

/// Appends `new_index` to S with a bordered (Schur complement) update. Falls back
/// to a full recompute when the pivot is below max(1e-12, 1e-2 K_kk) in magnitude.
void q_inverse_expand(BorderedSystem& sys, const Matrix& gram, std::size_t new_index);

/// Removes `leaving_index` from S (rank-1 downdate); recomputes on a tiny pivot.
void q_inverse_shrink(BorderedSystem& sys, const Matrix& gram, std::size_t leaving_index);

} // namespace ocpd
