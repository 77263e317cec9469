#pragma once

#include "ocpd/tensor.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace ocpd {

enum class UpdatePolicy { TensorAdvised, Threshold, SelfAdvisedStub, None };
enum class Action { Accept, UpdateModel, ReportAnomaly };

std::string_view to_string(UpdatePolicy p) noexcept;
std::string_view to_string(Action a) noexcept;
UpdatePolicy parse_policy(std::string_view name);
Action parse_action(std::string_view name);

struct AdvisorConfig {
    std::size_t k_neighbors = 3;
    /// Acceptable per-location knn-score change. 0 means calibrate from the
    /// training window when the pipeline is trained.
    double gamma_change = 0.0;
    double confidence = 0.9;
    UpdatePolicy policy = UpdatePolicy::TensorAdvised;
    /// Used by THRESHOLD (and the self-advised stub); must be <= 0.
    double threshold = -0.1;

    /// Checks the ranges; `locations` is J.
    void validate(std::size_t locations) const;
};

struct KnnDirections {
    std::vector<Vector> vectors; // one per neighbour, nearest first
    std::vector<std::size_t> neighbours;
    bool degenerate = false;     // some neighbour coincided with row j
};

/// Unit vectors (b_j - b_n) / |b_j - b_n| towards row j from its k nearest rows.
/// Coincident rows (distance < 1e-12) give a zero vector and set `degenerate`.
KnnDirections knn_unit_vectors(const Matrix& b, std::size_t j, std::size_t k);

/// Mean Euclidean distance from each row to its k nearest other rows.
Vector knn_score(const Matrix& b, std::size_t k);

struct LocationSnapshot {
    Matrix b;
    Vector knn_scores;

    static LocationSnapshot take(const Matrix& b, std::size_t k);
};

struct EnvironmentalChange {
    double probability = 0.0;     // fraction of locations with |change| > gamma_change
    double mean_abs_change = 0.0; // mean |change| over locations (diagnostic)
};

EnvironmentalChange environmental_change(const LocationSnapshot& prev, const LocationSnapshot& curr,
                                         const AdvisorConfig& cfg);

double environmental_probability(const LocationSnapshot& prev, const LocationSnapshot& curr,
                                 const AdvisorConfig& cfg);

/// |g| when p_env >= confidence, g otherwise.
double advised_decision(double g_raw, double p_env, const AdvisorConfig& cfg);

/// ACCEPT for g >= 0, UPDATE_MODEL for threshold <= g < 0, else REPORT_ANOMALY.
Action baseline_threshold_policy(double g_raw, double threshold);

} // namespace ocpd
