#include "ocpd/metrics.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <string>

namespace ocpd {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

} // namespace

RunMetrics compute_metrics(const std::vector<Verdict>& verdicts, const std::vector<Label>& labels, std::size_t window) {
    if (verdicts.empty()) throw Error(ErrorCode::EmptyStream, "no events to score");
    if (window == 0) throw Error(ErrorCode::InvalidArgument, "window must be positive");
    RunMetrics m;
    m.events = verdicts.size();

    std::optional<std::size_t> onset;
    std::size_t healthy = 0, alarms = 0, anomalous = 0, detected = 0, post_healthy = 0, post_alarms = 0;
    for (std::size_t e = 0; e < verdicts.size(); ++e) {
        const Verdict& v = verdicts[e];
        if (v.t >= labels.size()) {
            throw Error(ErrorCode::ShapeMismatch, "no label for t = " + std::to_string(v.t));
        }
        const Label l = labels[v.t];
        const bool report = v.action == Action::ReportAnomaly;
        if (v.action == Action::UpdateModel) ++m.updates;
        if (e % window == 0) m.windows.push_back({v.t, 0, 0, 0, std::nullopt});
        WindowRate& w = m.windows.back();
        ++w.events;
        if (l == Label::DriftedHealthy && !onset) onset = e;
        if (l == Label::Anomalous) {
            ++anomalous;
            detected += report;
            continue;
        }
        ++healthy;
        alarms += report;
        ++w.healthy;
        w.false_alarms += report;
        if (onset) {
            ++post_healthy;
            post_alarms += report;
        }
    }
    for (auto& w : m.windows) w.false_alarm_rate = ratio(w.false_alarms, w.healthy);
    m.false_alarm_rate = ratio(alarms, healthy);
    std::size_t tail_healthy = 0, tail_alarms = 0;
    for (std::size_t e = verdicts.size() - std::min(window, verdicts.size()); e < verdicts.size(); ++e) {
        if (labels[verdicts[e].t] == Label::Anomalous) continue;
        ++tail_healthy;
        tail_alarms += verdicts[e].action == Action::ReportAnomaly;
    }
    m.final_window_false_alarm_rate = ratio(tail_alarms, tail_healthy);
    m.post_onset_false_alarm_rate = ratio(post_alarms, post_healthy);
    m.detection_rate = ratio(detected, anomalous);
    return m;
}

nlohmann::ordered_json metrics_to_json(const RunMetrics& m) {
    nlohmann::ordered_json j;
    j["events"] = m.events;
    j["false_alarm_rate"] = opt(m.false_alarm_rate);
    j["final_window_false_alarm_rate"] = opt(m.final_window_false_alarm_rate);
    j["post_onset_false_alarm_rate"] = opt(m.post_onset_false_alarm_rate);
    j["detection_rate"] = opt(m.detection_rate);
    j["updates"] = m.updates;
    auto windows = nlohmann::ordered_json::array();
    for (const auto& w : m.windows) {
        nlohmann::ordered_json wj;
        wj["start_t"] = w.start_t;
        wj["events"] = w.events;
        wj["healthy"] = w.healthy;
        wj["false_alarms"] = w.false_alarms;
        wj["false_alarm_rate"] = opt(w.false_alarm_rate);
        windows.push_back(std::move(wj));
    }
    j["windows"] = std::move(windows);
    if (!m.rmse_trace.empty()) j["rmse_trace"] = m.rmse_trace;
    return j;
}

} // namespace ocpd
