#include "ocpd/ocsvm.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ocpd {

Vector OcsvmModel::training_decisions() const {
    return (gram * alpha).array() - rho;
}

namespace {

constexpr double kAlphaTol = 1e-9; // relative to c_bound

void validate_training_set(const Matrix& x, double nu) {
    if (x.rows() < 2 || x.cols() < 1) {
        throw Error(ErrorCode::InvalidArgument, "training needs at least two vectors");
    }
    require_finite(x, "training vectors");
    if (!(nu > 0.0 && nu < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "nu must lie in (0, 1)");
    }
    if (nu * static_cast<double>(x.rows()) < 1.0 - 1e-12) {
        throw Error(ErrorCode::NuTooSmall, "nu * n = " + std::to_string(nu * static_cast<double>(x.rows())) +
                                               " < 1, the box cannot hold sum(alpha) = 1");
    }
}

} // namespace

double rho_without_margin(const Vector& kalpha, const std::vector<std::size_t>& error,
                          const std::vector<std::size_t>& reserve) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i : error) lo = std::max(lo, kalpha(static_cast<Eigen::Index>(i)));
    for (std::size_t i : reserve) hi = std::min(hi, kalpha(static_cast<Eigen::Index>(i)));
    if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
}

void rebuild_sets(OcsvmModel& m, bool snap) {
    const double c = m.c_bound;
    std::vector<std::size_t> s;
    m.error.clear();
    m.reserve.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
        double& a = m.alpha(static_cast<Eigen::Index>(i));
        if (a <= kAlphaTol * c) {
            if (snap) a = 0.0;
            m.reserve.push_back(i);
        } else if (a >= c * (1.0 - kAlphaTol)) {
            if (snap) a = c;
            m.error.push_back(i);
        } else {
            s.push_back(i);
        }
    }
    m.sys = BorderedSystem::recompute(m.gram, std::move(s));
}

void refresh_partition(OcsvmModel& m) {
    rebuild_sets(m, true);
    const Vector kalpha = m.gram * m.alpha;
    if (m.sys.empty()) {
        m.rho = rho_without_margin(kalpha, m.error, m.reserve);
    } else {
        double sum = 0.0;
        for (std::size_t i : m.sys.s_order) sum += kalpha(static_cast<Eigen::Index>(i));
        m.rho = sum / static_cast<double>(m.sys.size());
    }
}

OcsvmModel train_batch(const Matrix& x, double nu, const KernelSpec& kernel, const SmoOptions& opts) {
    validate_training_set(x, nu);
    kernel.validate();
    const Eigen::Index n = x.rows();

    OcsvmModel m;
    m.train_x = x;
    m.nu = nu;
    m.kernel = kernel;
    m.c_bound = 1.0 / (nu * static_cast<double>(n));
    m.gram = kernel_matrix(kernel, x);
    m.alpha = Vector::Constant(n, 1.0 / static_cast<double>(n));
    const double c = m.c_bound;
    const Matrix& K = m.gram;

    Vector grad = K * m.alpha;
    for (long long it = 0; it < opts.max_updates; ++it) {
        // i: may grow (alpha < C) with the smallest gradient.
        Eigen::Index i = -1;
        double g_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (m.alpha(t) < c && grad(t) < g_min) {
                g_min = grad(t);
                i = t;
            }
        }
        // j: may shrink (alpha > 0); second-order choice among violators.
        Eigen::Index j = -1;
        double g_max = -std::numeric_limits<double>::infinity();
        double best = -1.0;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!(m.alpha(t) > 0.0)) continue;
            g_max = std::max(g_max, grad(t));
            const double diff = grad(t) - g_min;
            if (i < 0 || diff <= 0.0) continue;
            double curv = K(i, i) + K(t, t) - 2.0 * K(i, t);
            if (curv <= 1e-12) curv = 1e-12;
            const double gain = diff * diff / curv;
            if (gain > best) {
                best = gain;
                j = t;
            }
        }
        if (i < 0 || j < 0 || g_max - g_min < opts.tol) break;

        double curv = K(i, i) + K(j, j) - 2.0 * K(i, j);
        if (curv <= 1e-12) curv = 1e-12;
        double delta = (grad(j) - grad(i)) / curv;
        const double room_i = c - m.alpha(i);
        const double room_j = m.alpha(j);
        if (delta >= room_i || delta >= room_j) {
            if (room_i <= room_j) {
                delta = room_i;
                m.alpha(i) = c;
                m.alpha(j) = room_i == room_j ? 0.0 : m.alpha(j) - delta;
            } else {
                delta = room_j;
                m.alpha(i) += delta;
                m.alpha(j) = 0.0;
            }
        } else {
            m.alpha(i) += delta;
            m.alpha(j) -= delta;
        }
        grad += delta * (K.col(i) - K.col(j));
    }

    refresh_partition(m);
    return m;
}

double decision_value(const OcsvmModel& m, const Vector& x) {
    if (x.size() != m.train_x.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "input length differs from the training vectors");
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.alpha.size(); ++j) {
        if (m.alpha(j) != 0.0) sum += m.alpha(j) * kernel_eval(m.kernel, x, m.train_x.row(j).transpose());
    }
    return sum - m.rho;
}

int classify(const OcsvmModel& m, const Vector& x) {
    return decision_value(m, x) >= 0.0 ? 1 : -1;
}

KktPartition kkt_partition(const OcsvmModel& m, double tol, std::optional<std::size_t> pending) {
    const double c = m.c_bound;
    const double atol = kAlphaTol * c;
    const Vector g = m.training_decisions();
    KktPartition p;
    double worst = 0.0;
    std::size_t worst_index = 0;
    std::string worst_row;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (pending && *pending == i) continue;
        const double a = m.alpha(static_cast<Eigen::Index>(i));
        const double gi = g(static_cast<Eigen::Index>(i));
        double violation = 0.0;
        const char* row = "";
        if (a < -atol || a > c + atol) {
            violation = std::max(-a, a - c);
            row = "box";
        } else if (a <= atol) {
            p.R.push_back(i);
            violation = -gi;
            row = "reserve (g >= 0)";
        } else if (a >= c - atol) {
            p.E.push_back(i);
            violation = gi;
            row = "error (g <= 0)";
        } else {
            p.S.push_back(i);
            violation = std::abs(gi);
            row = "margin (g = 0)";
        }
        if (violation > tol && violation > worst) {
            worst = violation;
            worst_index = i;
            worst_row = row;
        }
    }
    if (worst > 0.0) {
        throw KktViolation(worst_index, worst, "index " + std::to_string(worst_index) + " violates the " +
                                                   worst_row + " row by " + std::to_string(worst));
    }
    return p;
}

} // namespace ocpd
