#include "ocpd/advisor.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

namespace ocpd {

std::string_view to_string(UpdatePolicy p) noexcept {
    switch (p) {
    case UpdatePolicy::TensorAdvised: return "TENSOR_ADVISED";
    case UpdatePolicy::Threshold: return "THRESHOLD";
    case UpdatePolicy::SelfAdvisedStub: return "SELF_ADVISED_STUB";
    case UpdatePolicy::None: return "NONE";
    }
    return "?";
}

std::string_view to_string(Action a) noexcept {
    switch (a) {
    case Action::Accept: return "ACCEPT";
    case Action::UpdateModel: return "UPDATE_MODEL";
    case Action::ReportAnomaly: return "REPORT_ANOMALY";
    }
    return "?";
}

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& ch : out) {
        ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
}

/// Indices of the k nearest rows to row j (ties by index), with distances.
std::vector<std::pair<double, std::size_t>> nearest(const Matrix& b, std::size_t j, std::size_t k) {
    const auto J = static_cast<std::size_t>(b.rows());
    if (J < 2) throw Error(ErrorCode::TooFewLocations, "need at least two locations");
    if (k == 0 || k >= J) {
        throw Error(ErrorCode::InvalidArgument, "k_neighbors must satisfy 1 <= k < J");
    }
    if (j >= J) throw Error(ErrorCode::InvalidArgument, "location index out of range");
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(J - 1);
    for (std::size_t n = 0; n < J; ++n) {
        if (n != j) d.emplace_back((b.row(static_cast<Eigen::Index>(j)) - b.row(static_cast<Eigen::Index>(n))).norm(), n);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    d.resize(k);
    return d;
}

} // namespace

UpdatePolicy parse_policy(std::string_view name) {
    const std::string up = upper(name);
    if (up == "TENSOR_ADVISED") return UpdatePolicy::TensorAdvised;
    if (up == "THRESHOLD") return UpdatePolicy::Threshold;
    if (up == "SELF_ADVISED_STUB") return UpdatePolicy::SelfAdvisedStub;
    if (up == "NONE") return UpdatePolicy::None;
    throw Error(ErrorCode::InvalidArgument, "unknown update policy '" + std::string(name) + "'");
}

Action parse_action(std::string_view name) {
    const std::string up = upper(name);
    if (up == "ACCEPT") return Action::Accept;
    if (up == "UPDATE_MODEL") return Action::UpdateModel;
    if (up == "REPORT_ANOMALY") return Action::ReportAnomaly;
    throw Error(ErrorCode::ParseError, "unknown action '" + std::string(name) + "'");
}

void AdvisorConfig::validate(std::size_t locations) const {
    if (locations < 2) throw Error(ErrorCode::TooFewLocations, "need at least two locations");
    if (k_neighbors == 0 || k_neighbors >= locations) {
        throw Error(ErrorCode::InvalidArgument, "k_neighbors must satisfy 1 <= k < J");
    }
    if (!(gamma_change >= 0.0) || !std::isfinite(gamma_change)) {
        throw Error(ErrorCode::InvalidArgument, "gamma_change must be finite and >= 0");
    }
    if (!(confidence > 0.0 && confidence <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "confidence must lie in (0, 1]");
    }
    if (!(threshold <= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be <= 0");
}

KnnDirections knn_unit_vectors(const Matrix& b, std::size_t j, std::size_t k) {
    KnnDirections out;
    for (const auto& [dist, n] : nearest(b, j, k)) {
        out.neighbours.push_back(n);
        if (dist < 1e-12) {
            out.vectors.push_back(Vector::Zero(b.cols()));
            out.degenerate = true;
        } else {
            out.vectors.push_back((b.row(static_cast<Eigen::Index>(j)) - b.row(static_cast<Eigen::Index>(n))).transpose() / dist);
        }
    }
    return out;
}

Vector knn_score(const Matrix& b, std::size_t k) {
    Vector s(b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        const auto d = nearest(b, static_cast<std::size_t>(j), k);
        double sum = 0.0;
        for (const auto& e : d) sum += e.first;
        s(j) = sum / static_cast<double>(k);
    }
    return s;
}

LocationSnapshot LocationSnapshot::take(const Matrix& b, std::size_t k) {
    return {b, knn_score(b, k)};
}

EnvironmentalChange environmental_change(const LocationSnapshot& prev, const LocationSnapshot& curr,
                                         const AdvisorConfig& cfg) {
    if (prev.knn_scores.size() != curr.knn_scores.size() || prev.b.rows() != curr.b.rows() ||
        prev.b.cols() != curr.b.cols() || prev.knn_scores.size() == 0) {
        throw Error(ErrorCode::ShapeMismatch, "snapshots differ in shape");
    }
    const Vector change = (curr.knn_scores - prev.knn_scores).cwiseAbs();
    const auto exceeded = (change.array() > cfg.gamma_change).count();
    EnvironmentalChange e;
    e.probability = static_cast<double>(exceeded) / static_cast<double>(change.size());
    e.mean_abs_change = change.mean();
    return e;
}

double environmental_probability(const LocationSnapshot& prev, const LocationSnapshot& curr,
                                 const AdvisorConfig& cfg) {
    return environmental_change(prev, curr, cfg).probability;
}

double advised_decision(double g_raw, double p_env, const AdvisorConfig& cfg) {
    return p_env >= cfg.confidence ? std::abs(g_raw) : g_raw;
}

Action baseline_threshold_policy(double g_raw, double threshold) {
    if (!(threshold <= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be <= 0");
    if (g_raw >= 0.0) return Action::Accept;
    if (g_raw >= threshold) return Action::UpdateModel;
    return Action::ReportAnomaly;
}

} // namespace ocpd
