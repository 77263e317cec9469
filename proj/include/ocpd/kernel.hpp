#pragma once

#include "ocpd/tensor.hpp"

#include <string_view>

namespace ocpd {

enum class KernelKind { Rbf, Linear };

std::string_view to_string(KernelKind kind) noexcept;
KernelKind parse_kernel(std::string_view name);

struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double sigma = 1.0; // RBF bandwidth

    void validate() const;
};

/// RBF: exp(-|x - y|^2 / (2 sigma^2)); LINEAR: x . y.
double kernel_eval(const KernelSpec& k, const Vector& x, const Vector& y);

/// Gram matrix over the rows of x.
Matrix kernel_matrix(const KernelSpec& k, const Matrix& x);

/// K(row i of x, y) for every row of x.
Vector kernel_column(const KernelSpec& k, const Matrix& x, const Vector& y);

/// Median of the pairwise Euclidean distances between rows; 1.0 when it is zero
/// or there are fewer than two rows.
double median_pairwise_distance(const Matrix& x);

} // namespace ocpd
