#pragma once

#include "ocpd/advisor.hpp"
#include "ocpd/kernel.hpp"
#include "ocpd/ocsvm.hpp"
#include "ocpd/stream_decomposition.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

namespace ocpd {

struct PipelineConfig {
    AdvisorConfig advisor;
    StreamOptions stream;
    std::size_t rank = 2;
    double nu = 0.02;
    KernelSpec kernel{KernelKind::Rbf, 0.0}; // sigma <= 0: median pairwise distance of the training rows
    /// Trailing training slices replayed to calibrate gamma_change when it is 0.
    std::size_t calibration_slices = 100;

    void validate() const;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& c);
PipelineConfig config_from_json(const nlohmann::json& j);

struct Verdict {
    std::size_t t = 0;
    double g_raw = 0.0;
    double p_env = 0.0;
    double g_advised = 0.0;
    Action action = Action::Accept;
    double mean_abs_change = 0.0;
    double slice_rmse = 0.0; // fit of the slice after the update (not in the CSV)
};

/// Single writer; events are processed in order.
struct PipelineState {
    PipelineConfig cfg;
    StreamDecomposition decomp;
    OcsvmModel model;
    LocationSnapshot snapshot;
    std::size_t next_t = 0;   // time index of the next event
    int batch_retrains = 0;   // insertions that fell back to train_batch
};

/// Decomposes the window, trains the OCSVM on its temporal rows, calibrates
/// gamma_change if needed and takes the first location snapshot.
PipelineState train_pipeline(const DenseTensor3& window, PipelineConfig cfg);

/// Per-location |knn-score change| while replaying the last `slices` window
/// slices through a copy of the decomposition, in event order.
std::vector<double> replay_knn_changes(const StreamDecomposition& d, std::size_t k, std::size_t slices);

/// 3 x the median of `changes`, floored at 1e-12.
double gamma_from_changes(std::vector<double> changes);

double calibrate_gamma_change(const StreamDecomposition& d, std::size_t k, std::size_t slices);

/// update_online, score c_new, compare location snapshots, then act per policy.
/// On REPORT_ANOMALY the model, the snapshot and A, B (with velocities) are
/// restored; the temporal row is still appended.
Verdict process_event(PipelineState& state, const Matrix& slice);

/// CSV `t,g_raw,p_env,g_advised,action`.
void write_verdict_header(std::ostream& out);
void write_verdict_row(const Verdict& v, std::ostream& out);
std::vector<Verdict> read_verdicts(std::istream& in);

/// Bundle: config, factors, optimizer state, model and snapshot. Doubles are hex strings.
void save_bundle(const PipelineState& s, const std::filesystem::path& path);
PipelineState load_bundle(const std::filesystem::path& path);

} // namespace ocpd
