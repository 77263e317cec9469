#include "ocpd/tensor.hpp"

#include "ocpd/error.hpp"

#include <cmath>
#include <string>

namespace ocpd {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonFinite, std::string(what) + " contains NaN or Inf");
    }
}

DenseTensor3::DenseTensor3(std::size_t I, std::size_t J, std::size_t K)
    : DenseTensor3(I, J, K, std::vector<double>(I * J * K, 0.0)) {}

DenseTensor3::DenseTensor3(std::size_t I, std::size_t J, std::size_t K, std::vector<double> values)
    : I_(I), J_(J), K_(K), values_(std::move(values)) {
    if (I == 0 || J == 0 || K == 0) {
        throw Error(ErrorCode::InvalidArgument, "tensor dimensions must be positive");
    }
    if (values_.size() != I * J * K) {
        throw Error(ErrorCode::ShapeMismatch, "tensor value count " + std::to_string(values_.size()) +
                                                  " != I*J*K = " + std::to_string(I * J * K));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFinite, "tensor entries must be finite");
        }
    }
}

DenseTensor3 DenseTensor3::from_slices(const std::vector<Matrix>& slices) {
    if (slices.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no slices");
    }
    const auto I = static_cast<std::size_t>(slices.front().rows());
    const auto J = static_cast<std::size_t>(slices.front().cols());
    const std::size_t K = slices.size();
    std::vector<double> values(I * J * K);
    for (std::size_t k = 0; k < K; ++k) {
        const Matrix& s = slices[k];
        if (static_cast<std::size_t>(s.rows()) != I || static_cast<std::size_t>(s.cols()) != J) {
            throw Error(ErrorCode::ShapeMismatch, "slice " + std::to_string(k) + " has a different shape");
        }
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t j = 0; j < J; ++j) {
                values[(i * J + j) * K + k] = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    return DenseTensor3(I, J, K, std::move(values));
}

Matrix DenseTensor3::slice(std::size_t k) const {
    if (k >= K_) {
        throw Error(ErrorCode::InvalidArgument, "slice index out of range");
    }
    Matrix s(static_cast<Eigen::Index>(I_), static_cast<Eigen::Index>(J_));
    for (std::size_t i = 0; i < I_; ++i) {
        for (std::size_t j = 0; j < J_; ++j) {
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j, k);
        }
    }
    return s;
}

DenseTensor3 DenseTensor3::time_range(std::size_t k0, std::size_t count) const {
    if (count == 0 || k0 + count > K_) {
        throw Error(ErrorCode::InvalidArgument, "time range outside tensor");
    }
    std::vector<double> values(I_ * J_ * count);
    for (std::size_t i = 0; i < I_; ++i) {
        for (std::size_t j = 0; j < J_; ++j) {
            for (std::size_t k = 0; k < count; ++k) {
                values[(i * J_ + j) * count + k] = (*this)(i, j, k0 + k);
            }
        }
    }
    return DenseTensor3(I_, J_, count, std::move(values));
}

KruskalFactors::KruskalFactors(Matrix a, Matrix b, Matrix c) : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
    validate();
}

void KruskalFactors::validate() const {
    if (A.cols() == 0 || A.cols() != B.cols() || A.cols() != C.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "factor matrices must share a positive column count");
    }
    require_finite(A, "factor A");
    require_finite(B, "factor B");
    require_finite(C, "factor C");
}

Matrix unfold(const DenseTensor3& t, int mode) {
    const auto I = static_cast<Eigen::Index>(t.dim_i());
    const auto J = static_cast<Eigen::Index>(t.dim_j());
    const auto K = static_cast<Eigen::Index>(t.dim_k());
    Matrix out;
    switch (mode) {
    case 1:
        out.resize(I, J * K);
        for (Eigen::Index i = 0; i < I; ++i)
            for (Eigen::Index j = 0; j < J; ++j)
                for (Eigen::Index k = 0; k < K; ++k) out(i, j + J * k) = t(i, j, k);
        break;
    case 2:
        out.resize(J, I * K);
        for (Eigen::Index i = 0; i < I; ++i)
            for (Eigen::Index j = 0; j < J; ++j)
                for (Eigen::Index k = 0; k < K; ++k) out(j, i + I * k) = t(i, j, k);
        break;
    case 3:
        out.resize(K, I * J);
        for (Eigen::Index i = 0; i < I; ++i)
            for (Eigen::Index j = 0; j < J; ++j)
                for (Eigen::Index k = 0; k < K; ++k) out(k, i + I * j) = t(i, j, k);
        break;
    default:
        throw Error(ErrorCode::BadMode, "mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
    return out;
}

Matrix khatri_rao(const Matrix& p, const Matrix& q) {
    if (p.cols() != q.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "khatri_rao operands need equal column counts");
    }
    Matrix out(p.rows() * q.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.cols(); ++r) {
        for (Eigen::Index a = 0; a < p.rows(); ++a) {
            out.col(r).segment(a * q.rows(), q.rows()) = p(a, r) * q.col(r);
        }
    }
    return out;
}

DenseTensor3 kruskal_reconstruct(const KruskalFactors& f) {
    f.validate();
    const auto I = static_cast<std::size_t>(f.A.rows());
    const auto J = static_cast<std::size_t>(f.B.rows());
    const auto K = static_cast<std::size_t>(f.C.rows());
    // X_(1) = A (C kr B)^T, column j + J*k.
    const Matrix x1 = f.A * khatri_rao(f.C, f.B).transpose();
    std::vector<double> values(I * J * K);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t k = 0; k < K; ++k)
                values[(i * J + j) * K + k] =
                    x1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + J * k));
    return DenseTensor3(I, J, K, std::move(values));
}

double squared_error(const DenseTensor3& t, const KruskalFactors& f) {
    if (static_cast<std::size_t>(f.A.rows()) != t.dim_i() || static_cast<std::size_t>(f.B.rows()) != t.dim_j() ||
        static_cast<std::size_t>(f.C.rows()) != t.dim_k()) {
        throw Error(ErrorCode::ShapeMismatch, "factor row counts do not match tensor dimensions");
    }
    const DenseTensor3 model = kruskal_reconstruct(f);
    double acc = 0.0;
    for (std::size_t n = 0; n < t.size(); ++n) {
        const double d = t.values()[n] - model.values()[n];
        acc += d * d;
    }
    return acc;
}

double rmse(const DenseTensor3& t, const KruskalFactors& f) {
    return std::sqrt(squared_error(t, f) / static_cast<double>(t.size()));
}

} // namespace ocpd
