#include "ocpd/kernel.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

namespace ocpd {

std::string_view to_string(KernelKind kind) noexcept {
    return kind == KernelKind::Rbf ? "RBF" : "LINEAR";
}

KernelKind parse_kernel(std::string_view name) {
    std::string up(name);
    for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (up == "RBF") return KernelKind::Rbf;
    if (up == "LINEAR") return KernelKind::Linear;
    throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
    if (kind == KernelKind::Rbf && !(sigma > 0.0 && std::isfinite(sigma))) {
        throw Error(ErrorCode::InvalidArgument, "RBF sigma must be positive and finite");
    }
}

namespace {

double eval_unchecked(const KernelSpec& k, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
    if (k.kind == KernelKind::Linear) return x.dot(y);
    return std::exp(-(x - y).squaredNorm() / (2.0 * k.sigma * k.sigma));
}

} // namespace

double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::ShapeMismatch, "kernel arguments differ in length");
    }
    return eval_unchecked(k, x, y);
}

Matrix kernel_matrix(const KernelSpec& k, const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = eval_unchecked(k, x.row(i).transpose(), x.row(i).transpose());
        for (Eigen::Index j = 0; j < i; ++j) {
            g(i, j) = g(j, i) = eval_unchecked(k, x.row(i).transpose(), x.row(j).transpose());
        }
    }
    return g;
}

Vector kernel_column(const KernelSpec& k, const Matrix& x, const Vector& y) {
    if (x.cols() != y.size()) {
        throw Error(ErrorCode::ShapeMismatch, "kernel arguments differ in length");
    }
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = eval_unchecked(k, x.row(i).transpose(), y);
    return out;
}

double median_pairwise_distance(const Matrix& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) d.push_back((x.row(i) - x.row(j)).norm());
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med > 0.0 ? med : 1.0;
}

} // namespace ocpd
