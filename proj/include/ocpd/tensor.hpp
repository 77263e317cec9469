#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ocpd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws non-finite if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

/// Dense I x J x K array (features x locations x time). Values are stored
/// row-major by (i, j, k): offset = (i * J + j) * K + k.
class DenseTensor3 {
public:
    DenseTensor3() = default;
    DenseTensor3(std::size_t I, std::size_t J, std::size_t K);
    DenseTensor3(std::size_t I, std::size_t J, std::size_t K, std::vector<double> values);

    /// Stacks I x J frontal slices along the time mode.
    static DenseTensor3 from_slices(const std::vector<Matrix>& slices);

    std::size_t dim_i() const noexcept { return I_; }
    std::size_t dim_j() const noexcept { return J_; }
    std::size_t dim_k() const noexcept { return K_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[(i * J_ + j) * K_ + k];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return values_[(i * J_ + j) * K_ + k];
    }

    const std::vector<double>& values() const noexcept { return values_; }

    /// Frontal slice X(:, :, k) as an I x J matrix.
    Matrix slice(std::size_t k) const;

    /// Sub-tensor of time steps [k0, k0 + count).
    DenseTensor3 time_range(std::size_t k0, std::size_t count) const;

    bool operator==(const DenseTensor3&) const = default;

private:
    std::size_t I_ = 0, J_ = 0, K_ = 0;
    std::vector<double> values_;
};

/// Rank-R CP model: X(i,j,k) ~ sum_r A(i,r) B(j,r) C(k,r).
struct KruskalFactors {
    Matrix A; // I x R
    Matrix B; // J x R
    Matrix C; // K x R

    KruskalFactors() = default;
    KruskalFactors(Matrix a, Matrix b, Matrix c);

    std::size_t rank() const noexcept { return static_cast<std::size_t>(A.cols()); }

    /// Checks equal column counts and finiteness.
    void validate() const;
};

/// Matricization with Kolda-Bader column order:
///   mode 1: I x JK, column j + J*k
///   mode 2: J x IK, column i + I*k
///   mode 3: K x IJ, column i + I*j
Matrix unfold(const DenseTensor3& t, int mode);

/// Column-wise Kronecker product. Row (a * q.rows() + b) of column r is p(a,r) * q(b,r).
Matrix khatri_rao(const Matrix& p, const Matrix& q);

DenseTensor3 kruskal_reconstruct(const KruskalFactors& f);

double rmse(const DenseTensor3& t, const KruskalFactors& f);

/// Sum of squared residuals ||X - [[A,B,C]]||_F^2.
double squared_error(const DenseTensor3& t, const KruskalFactors& f);

} // namespace ocpd
