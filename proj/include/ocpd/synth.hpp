#pragma once

#include "ocpd/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace ocpd {

/// x -> (x + mu_shift) * sigma_scale on the chosen locations for time steps
/// [start_k, end_k). An empty location list means every location.
struct DriftSpec {
    std::size_t start_k = 0;
    std::optional<std::size_t> end_k;
    double mu_shift = 0.0;
    double sigma_scale = 1.0;
    std::vector<std::size_t> locations;

    bool global(std::size_t J) const;
};

struct SynthSpec {
    std::size_t I = 60, J = 12, K = 1000;
    std::size_t rank = 2;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    /// Temporal factor entries are 1 - temporal_spread + temporal_spread * U[0,1).
    double temporal_spread = 1.0;
    /// Location factor entries are location_floor + (1 - location_floor) * U[0,1).
    double location_floor = 0.0;
    std::vector<DriftSpec> drifts;

    void validate() const;
};

enum class Label { Healthy, DriftedHealthy, Anomalous };

std::string_view to_string(Label l) noexcept;
Label parse_label(std::string_view s);

struct SynthData {
    DenseTensor3 tensor;
    KruskalFactors truth;   // noiseless, drift-free generating factors
    std::vector<Label> labels; // one per time step
};

/// Uniform U[0,1) factors from the seed (A, B, C in turn, B and C mapped through
/// location_floor and temporal_spread), the rank-R tensor,
/// then the drifts in list order, then N(0, noise_sigma^2) per entry.
/// A time step touched by a drift on a subset of locations is anomalous; one
/// touched only by global drifts is drifted-healthy.
SynthData synthesize(const SynthSpec& spec);

/// Appends single-step drifts of `mu_shift` at t = first, first + every, ...
/// (< last), the n-th one on location n mod J.
void add_point_faults(SynthSpec& spec, std::size_t first, std::size_t last, std::size_t every, double mu_shift);

/// CSV `t,label`.
void write_labels(const std::vector<Label>& labels, const std::filesystem::path& path);
std::vector<Label> read_labels(const std::filesystem::path& path);

/// Sibling file for ground truth: `<stem>_labels.csv`.
std::filesystem::path labels_path(const std::filesystem::path& tensor_csv);

} // namespace ocpd
