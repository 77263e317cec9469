#pragma once

#include "ocpd/pipeline.hpp"
#include "ocpd/synth.hpp"

#include <optional>
#include <vector>

#include <json.hpp>

namespace ocpd {

struct WindowRate {
    std::size_t start_t = 0;
    std::size_t events = 0;
    std::size_t healthy = 0;
    std::size_t false_alarms = 0;
    std::optional<double> false_alarm_rate; // empty when the window has no healthy events
};

struct RunMetrics {
    std::size_t events = 0;
    std::vector<WindowRate> windows;                       // consecutive windows of `window` events
    std::optional<double> false_alarm_rate;                // over all healthy events
    std::optional<double> final_window_false_alarm_rate;   // last `window` events
    std::optional<double> post_onset_false_alarm_rate;     // from the first drifted-healthy event on
    std::optional<double> detection_rate;                  // reports among anomalous events
    std::size_t updates = 0;
    std::vector<double> rmse_trace;                        // per-event slice RMSE, when known
};

/// Healthy means healthy or drifted-healthy; a false alarm is REPORT_ANOMALY on
/// such an event. `labels` is indexed by absolute time t. Throws empty-stream for
/// no verdicts.
RunMetrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<Label>& labels,
                           std::size_t window = 100);

nlohmann::ordered_json metrics_to_json(const RunMetrics& m);

} // namespace ocpd
