#include "ocpd/bordered_system.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>

namespace ocpd {

namespace {

constexpr double kPivotTol = 1e-12;
// Expansion pivots below this fraction of K_kk amplify earlier rounding by 1 / pivot.
constexpr double kRelativePivotTol = 1e-2;

void check_index(const Matrix& gram, std::size_t index) {
    if (index >= static_cast<std::size_t>(gram.rows())) {
        throw Error(ErrorCode::InvalidArgument, "support index outside the kernel matrix");
    }
}

} // namespace

std::size_t BorderedSystem::position(std::size_t index) const noexcept {
    return static_cast<std::size_t>(std::find(s_order.begin(), s_order.end(), index) - s_order.begin());
}

Matrix BorderedSystem::assemble(const Matrix& gram) const {
    const auto m = static_cast<Eigen::Index>(s_order.size());
    Matrix q(m + 1, m + 1);
    q(0, 0) = 0.0;
    for (Eigen::Index p = 0; p < m; ++p) {
        q(0, p + 1) = q(p + 1, 0) = 1.0;
        for (Eigen::Index r = 0; r < m; ++r) {
            q(p + 1, r + 1) = gram(static_cast<Eigen::Index>(s_order[static_cast<std::size_t>(p)]),
                                   static_cast<Eigen::Index>(s_order[static_cast<std::size_t>(r)]));
        }
    }
    return q;
}

double BorderedSystem::residual(const Matrix& gram) const {
    if (empty()) return 0.0;
    const Matrix q = assemble(gram);
    return (q_inv * q - Matrix::Identity(q.rows(), q.cols())).cwiseAbs().maxCoeff();
}

BorderedSystem BorderedSystem::recompute(const Matrix& gram, std::vector<std::size_t> s_order) {
    BorderedSystem sys;
    for (std::size_t idx : s_order) check_index(gram, idx);
    sys.s_order = std::move(s_order);
    if (sys.s_order.empty()) {
        sys.q_inv.resize(0, 0);
        return sys;
    }
    const Matrix q = sys.assemble(gram);
    Eigen::FullPivLU<Matrix> lu(q);
    if (lu.isInvertible()) {
        sys.q_inv = lu.inverse();
    } else {
        sys.q_inv = q.completeOrthogonalDecomposition().pseudoInverse();
    }
    return sys;
}

void q_inverse_expand(BorderedSystem& sys, const Matrix& gram, std::size_t new_index) {
    check_index(gram, new_index);
    if (sys.position(new_index) != sys.size()) {
        throw Error(ErrorCode::InvalidArgument, "index already in the margin set");
    }
    const auto k = static_cast<Eigen::Index>(new_index);
    if (sys.empty()) {
        sys.s_order.push_back(new_index);
        sys.q_inv.resize(2, 2);
        sys.q_inv << -gram(k, k), 1.0, 1.0, 0.0;
        return;
    }
    const auto m = static_cast<Eigen::Index>(sys.size());
    Vector u(m + 1);
    u(0) = 1.0;
    for (Eigen::Index p = 0; p < m; ++p) u(p + 1) = gram(static_cast<Eigen::Index>(sys.s_order[static_cast<std::size_t>(p)]), k);
    const Vector w = sys.q_inv * u;
    const double s = gram(k, k) - u.dot(w);
    sys.s_order.push_back(new_index);
    if (!(std::abs(s) >= std::max(kPivotTol, kRelativePivotTol * std::abs(gram(k, k))))) {
        ++sys.recomputes;
        const int count = sys.recomputes;
        sys = BorderedSystem::recompute(gram, std::move(sys.s_order));
        sys.recomputes = count;
        return;
    }
    Matrix next(m + 2, m + 2);
    next.topLeftCorner(m + 1, m + 1) = sys.q_inv + w * w.transpose() / s;
    next.topRightCorner(m + 1, 1) = -w / s;
    next.bottomLeftCorner(1, m + 1) = -w.transpose() / s;
    next(m + 1, m + 1) = 1.0 / s;
    sys.q_inv = std::move(next);
}

void q_inverse_shrink(BorderedSystem& sys, const Matrix& gram, std::size_t leaving_index) {
    const std::size_t pos = sys.position(leaving_index);
    if (pos == sys.size()) {
        throw Error(ErrorCode::InvalidArgument, "index not in the margin set");
    }
    sys.s_order.erase(sys.s_order.begin() + static_cast<std::ptrdiff_t>(pos));
    if (sys.s_order.empty()) {
        sys.q_inv.resize(0, 0);
        return;
    }
    const auto n = sys.q_inv.rows();
    const auto p = static_cast<Eigen::Index>(pos) + 1;
    const double c = sys.q_inv(p, p);
    if (!(std::abs(c) >= kPivotTol)) {
        ++sys.recomputes;
        const int count = sys.recomputes;
        sys = BorderedSystem::recompute(gram, std::move(sys.s_order));
        sys.recomputes = count;
        return;
    }
    // Keep every row/column except p, then apply A - b_col b_row^T / c.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < n; ++r)
        if (r != p) keep.push_back(r);
    const auto m = static_cast<Eigen::Index>(keep.size());
    Matrix a(m, m);
    Vector col(m), row(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        col(r) = sys.q_inv(keep[static_cast<std::size_t>(r)], p);
        row(r) = sys.q_inv(p, keep[static_cast<std::size_t>(r)]);
        for (Eigen::Index s = 0; s < m; ++s) a(r, s) = sys.q_inv(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(s)]);
    }
    sys.q_inv = a - col * row.transpose() / c;
}

} // namespace ocpd
