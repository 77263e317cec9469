#include "ocpd/cp_als.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ocpd {

Matrix random_factor(std::size_t rows, std::size_t rank, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rank));
    // Fill row by row so the draw order is independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = unif(rng);
    return m;
}

bool solve_gram(const Matrix& gram, const Matrix& rhs, Matrix& out) {
    // rhs is n x R, gram is R x R; want out = rhs * gram^{-1}.
    Eigen::LDLT<Matrix> ldlt(gram);
    const double trace = gram.trace();
    bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive();
    if (!singular) {
        const auto d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        singular = dmax <= 0.0 || d.minCoeff() <= 1e-13 * dmax;
    }
    if (!singular) {
        out = ldlt.solve(rhs.transpose()).transpose();
        return false;
    }
    const double ridge = 1e-10 * std::max(trace, 1e-300);
    Matrix reg = gram;
    reg.diagonal().array() += ridge;
    out = reg.ldlt().solve(rhs.transpose()).transpose();
    return true;
}

AlsResult cp_als(const DenseTensor3& t, std::size_t rank, const AlsOptions& opts) {
    const std::size_t I = t.dim_i(), J = t.dim_j(), K = t.dim_k();
    if (rank == 0 || rank > std::min({I * J, J * K, I * K})) {
        throw Error(ErrorCode::InvalidArgument, "rank must satisfy 1 <= R <= min(IJ, JK, IK)");
    }
    KruskalFactors init(random_factor(I, rank, opts.seed), random_factor(J, rank, opts.seed + 1),
                        random_factor(K, rank, opts.seed + 2));
    return cp_als(t, std::move(init), opts);
}

AlsResult cp_als(const DenseTensor3& t, KruskalFactors f, const AlsOptions& opts) {
    if (opts.max_iters < 1 || !(opts.tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "AlsOptions needs max_iters >= 1 and tol > 0");
    }
    f.validate();
    if (f.A.isZero(0.0) || f.B.isZero(0.0) || f.C.isZero(0.0)) {
        throw Error(ErrorCode::InvalidArgument, "zero factor initialization is a stationary point");
    }
    const std::size_t rank = f.rank();
    if (static_cast<std::size_t>(f.A.rows()) != t.dim_i() || static_cast<std::size_t>(f.B.rows()) != t.dim_j() ||
        static_cast<std::size_t>(f.C.rows()) != t.dim_k()) {
        throw Error(ErrorCode::ShapeMismatch, "initial factors do not match tensor dimensions");
    }
    if (rank > std::min({t.dim_i() * t.dim_j(), t.dim_j() * t.dim_k(), t.dim_i() * t.dim_k()})) {
        throw Error(ErrorCode::InvalidArgument, "rank must satisfy R <= min(IJ, JK, IK)");
    }

    const Matrix x1 = unfold(t, 1);
    const Matrix x2 = unfold(t, 2);
    const Matrix x3 = unfold(t, 3);

    AlsResult res;
    res.loss_trace.push_back(squared_error(t, f));
    for (int sweep = 0; sweep < opts.max_iters; ++sweep) {
        Matrix gram = (f.C.transpose() * f.C).cwiseProduct(f.B.transpose() * f.B);
        res.ridge_solves += solve_gram(gram, x1 * khatri_rao(f.C, f.B), f.A);

        gram = (f.C.transpose() * f.C).cwiseProduct(f.A.transpose() * f.A);
        res.ridge_solves += solve_gram(gram, x2 * khatri_rao(f.C, f.A), f.B);

        gram = (f.B.transpose() * f.B).cwiseProduct(f.A.transpose() * f.A);
        res.ridge_solves += solve_gram(gram, x3 * khatri_rao(f.B, f.A), f.C);

        f.validate();
        const double prev = res.loss_trace.back();
        const double loss = squared_error(t, f);
        res.loss_trace.push_back(loss);
        res.sweeps = sweep + 1;
        if (loss == 0.0 || (prev > 0.0 && std::abs(prev - loss) / prev < opts.tol)) {
            res.converged = true;
            break;
        }
    }
    res.factors = std::move(f);
    return res;
}

} // namespace ocpd
