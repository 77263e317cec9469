#include "ocpd/nesgd.hpp"

#include "ocpd/cp_als.hpp"
#include "ocpd/error.hpp"

#include <cctype>
#include <cmath>
#include <string>

namespace ocpd {

std::string_view to_string(OptimizerKind kind) noexcept {
    switch (kind) {
    case OptimizerKind::Sgd: return "SGD";
    case OptimizerKind::Psgd: return "PSGD";
    case OptimizerKind::Nesgd: return "NESGD";
    }
    return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
    std::string up(name);
    for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (up == "SGD") return OptimizerKind::Sgd;
    if (up == "PSGD") return OptimizerKind::Psgd;
    if (up == "NESGD") return OptimizerKind::Nesgd;
    throw Error(ErrorCode::InvalidArgument, "unknown optimizer '" + std::string(name) + "'");
}

void NesgdOptions::validate() const {
    if (!(friction >= 0.0 && friction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "friction must lie in [0, 1)");
    }
    if (!(perturb_sigma >= 0.0) || !(l1_beta >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "perturb_sigma and l1_beta must be >= 0");
    }
    if (!(lr.eta0 >= 0.0) || !(lr.decay >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate parameters must be >= 0");
    }
}

NesgdState NesgdState::init(const KruskalFactors& f, const NesgdOptions& opts) {
    opts.validate();
    NesgdState s;
    s.opts = opts;
    s.vA = Matrix::Zero(f.A.rows(), f.A.cols());
    s.vB = Matrix::Zero(f.B.rows(), f.B.cols());
    s.vC = Matrix::Zero(f.C.rows(), f.C.cols());
    s.rng.seed(opts.seed);
    return s;
}

double NesgdState::noise_sigma() const noexcept {
    return opts.perturb_decay ? opts.perturb_sigma * eta() : opts.perturb_sigma;
}

Matrix cp_gradient(const Matrix& x_unfold, const KruskalFactors& f, int mode) {
    const Matrix* factor = nullptr;
    Matrix kr;
    switch (mode) {
    case 1: factor = &f.A; kr = khatri_rao(f.C, f.B); break;
    case 2: factor = &f.B; kr = khatri_rao(f.C, f.A); break;
    case 3: factor = &f.C; kr = khatri_rao(f.B, f.A); break;
    default: throw Error(ErrorCode::BadMode, "mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
    if (x_unfold.rows() != factor->rows() || x_unfold.cols() != kr.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "unfolding shape does not match factors for mode " + std::to_string(mode));
    }
    return (x_unfold - *factor * kr.transpose()) * kr;
}

SliceDirections slice_directions(const Matrix& slice, const Matrix& A, const Matrix& B, const Vector& c) {
    if (slice.rows() != A.rows() || slice.cols() != B.rows() || A.cols() != B.cols() || c.size() != A.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "slice does not match factor shapes");
    }
    const Matrix Ac = A * c.asDiagonal();
    const Matrix residual = slice - Ac * B.transpose();
    SliceDirections d;
    d.gA = residual * (B * c.asDiagonal());
    d.gB = residual.transpose() * Ac;
    d.gc = (A.transpose() * residual * B).diagonal();
    return d;
}

Vector solve_temporal_row(const Matrix& slice, const Matrix& A, const Matrix& B) {
    if (slice.rows() != A.rows() || slice.cols() != B.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "slice does not match factor shapes");
    }
    Matrix gram = (A.transpose() * A).cwiseProduct(B.transpose() * B);
    gram.diagonal().array() += 1e-10 * std::max(gram.trace(), 1e-300);
    const Vector rhs = (A.transpose() * slice * B).diagonal();
    return gram.ldlt().solve(rhs);
}

namespace {

double lambda_max(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double inverse_scale(const Matrix& gram, StepScaling scaling) {
    if (scaling == StepScaling::None) return 1.0;
    const double l = lambda_max(gram);
    return l > 1e-300 ? 1.0 / l : 1.0;
}

Matrix sign_of(const Matrix& m) {
    return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

void add_noise(Matrix& m, std::normal_distribution<double>& dist, std::mt19937_64& rng) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += dist(rng);
}

void check_bounded(const Matrix& m, const char* what) {
    if (!m.allFinite() || m.cwiseAbs().maxCoeff() > 1e12) {
        throw Error(ErrorCode::Diverged, std::string(what) + " left [-1e12, 1e12]");
    }
}

// Shared update for A, B and optionally one temporal row `c` (1 x R).
void step_blocks(const Matrix& slice, Matrix& A, Matrix& B, Matrix& c, Matrix& vA, Matrix& vB, Matrix& vc,
                 bool update_c, NesgdState& state, OptimizerKind kind) {
    const NesgdOptions& o = state.opts;
    const double eta = state.eta();
    const bool momentum = kind == OptimizerKind::Nesgd;
    const double friction = momentum ? o.friction : 0.0;

    Matrix A_eval = A, B_eval = B, c_eval = c;
    if (momentum && o.nag_lookahead && friction != 0.0) {
        A_eval += friction * vA;
        B_eval += friction * vB;
        if (update_c) c_eval += friction * vc;
    }
    const Vector cv = c_eval.row(0).transpose();
    SliceDirections d = slice_directions(slice, A_eval, B_eval, cv);

    const Matrix ccT = cv * cv.transpose();
    const Matrix AtA = A_eval.transpose() * A_eval;
    const Matrix BtB = B_eval.transpose() * B_eval;
    d.gA *= inverse_scale(BtB.cwiseProduct(ccT), o.scaling);
    d.gB *= inverse_scale(AtA.cwiseProduct(ccT), o.scaling);
    Matrix gc = d.gc.transpose();
    if (update_c) gc *= inverse_scale(AtA.cwiseProduct(BtB), o.scaling);

    if (momentum) {
        const double mix = o.velocity == VelocityForm::Ema ? 1.0 - friction : 1.0;
        vA = friction * vA + mix * d.gA;
        vB = friction * vB + mix * d.gB;
        if (update_c) vc = friction * vc + mix * gc;
        if (o.l1_beta > 0.0) {
            A += eta * (vA - o.l1_beta * sign_of(A));
            B += eta * (vB - o.l1_beta * sign_of(B));
            if (update_c) c += eta * (vc - o.l1_beta * sign_of(c));
        } else {
            A += eta * vA;
            B += eta * vB;
            if (update_c) c += eta * vc;
        }
    } else {
        A += eta * d.gA;
        B += eta * d.gB;
        if (update_c) c += eta * gc;
    }

    const double sigma = state.noise_sigma();
    if (kind != OptimizerKind::Sgd && sigma > 0.0) {
        std::normal_distribution<double> dist(0.0, sigma);
        add_noise(A, dist, state.rng);
        add_noise(B, dist, state.rng);
        if (update_c) add_noise(c, dist, state.rng);
    }
    check_bounded(A, "factor A");
    check_bounded(B, "factor B");
    if (update_c) check_bounded(c, "temporal row");
    ++state.step;
}

void check_state_shapes(const KruskalFactors& f, const NesgdState& s) {
    if (s.vA.rows() != f.A.rows() || s.vA.cols() != f.A.cols() || s.vB.rows() != f.B.rows() ||
        s.vB.cols() != f.B.cols() || s.vC.rows() != f.C.rows() || s.vC.cols() != f.C.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "velocity shapes do not match factors");
    }
}

} // namespace

void sgd_step(const DenseTensor3& t, std::size_t k, KruskalFactors& f, NesgdState& state, OptimizerKind kind) {
    check_state_shapes(f, state);
    if (k >= t.dim_k() || static_cast<std::size_t>(f.C.rows()) != t.dim_k()) {
        throw Error(ErrorCode::InvalidArgument, "sample index outside the time mode");
    }
    const Matrix slice = t.slice(k);
    const auto row = static_cast<Eigen::Index>(k);
    Matrix c = f.C.row(row);
    Matrix vc = state.vC.row(row);
    bool update_c = true;
    if (state.opts.temporal_row == TemporalRow::LeastSquares) {
        c.row(0) = solve_temporal_row(slice, f.A, f.B).transpose();
        update_c = false;
    }
    step_blocks(slice, f.A, f.B, c, state.vA, state.vB, vc, update_c, state, kind);
    f.C.row(row) = c;
    state.vC.row(row) = vc;
}

void sgd_step_ab(const Matrix& slice, const Vector& c, KruskalFactors& f, NesgdState& state, OptimizerKind kind) {
    if (state.vA.rows() != f.A.rows() || state.vB.rows() != f.B.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "velocity shapes do not match factors");
    }
    Matrix crow = c.transpose();
    Matrix vc = Matrix::Zero(1, crow.cols());
    step_blocks(slice, f.A, f.B, crow, state.vA, state.vB, vc, false, state, kind);
}

std::pair<KruskalFactors, NesgdState> sgd_sweep(const DenseTensor3& t, KruskalFactors f, NesgdState state,
                                                OptimizerKind kind, std::size_t sample_k) {
    sgd_step(t, sample_k, f, state, kind);
    return {std::move(f), std::move(state)};
}

} // namespace ocpd
