#include "ocpd/error.hpp"
#include "ocpd/metrics.hpp"
#include "ocpd/ocsvm_io.hpp"
#include "ocpd/pipeline.hpp"
#include "ocpd/synth.hpp"

#include "acceptance/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace ocpd;

namespace {

SynthSpec small_stream(std::uint64_t seed) {
    SynthSpec s;
    s.I = 20;
    s.J = 8;
    s.K = 300;
    s.seed = seed;
    s.noise_sigma = 0.01;
    s.temporal_spread = 0.005;
    s.location_floor = 0.5;
    return s;
}

PipelineConfig small_config() {
    PipelineConfig c;
    c.calibration_slices = 50;
    return c;
}

std::string model_dump(const OcsvmModel& m) { return model_to_json(m).dump(); }

bool same_snapshot(const LocationSnapshot& a, const LocationSnapshot& b) {
    return a.b == b.b && a.knn_scores == b.knn_scores;
}

void check_verdict(const Verdict& v, const AdvisorConfig& c) {
    switch (v.action) {
    case Action::Accept:
        CHECK(v.g_raw >= 0.0);
        break;
    case Action::UpdateModel:
        CHECK(v.g_raw < 0.0);
        CHECK(v.p_env >= c.confidence);
        break;
    case Action::ReportAnomaly:
        CHECK(v.g_raw < 0.0);
        CHECK(v.p_env < c.confidence);
        break;
    }
    CHECK(v.p_env >= 0.0);
    CHECK(v.p_env <= 1.0);
}

} // namespace

TEST_CASE("training calibrates gamma, sigma and the snapshot") {
    const SynthData d = synthesize(small_stream(101));
    const PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
    CHECK(s.cfg.advisor.gamma_change > 0.0);
    CHECK(s.cfg.kernel.sigma > 0.0);
    CHECK(s.next_t == 200);
    CHECK(s.model.size() == 200);
    CHECK(s.snapshot.b == s.decomp.factors.B);
    // Most training rows score as healthy.
    const Vector g = s.model.training_decisions();
    CHECK(static_cast<double>((g.array() >= -1e-6).count()) / 200.0 >= 1.0 - s.cfg.nu - 0.05);
}

TEST_CASE("gamma from knn changes") {
    CHECK(gamma_from_changes({0.1, 0.3, 0.2}) == doctest::Approx(0.6));
    CHECK(gamma_from_changes({0.0, 0.0}) == 1e-12);
    CHECK_THROWS_AS(gamma_from_changes({}), Error);
}

TEST_CASE("in-distribution slices are accepted") {
    const SynthData d = synthesize(small_stream(102));
    PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
    std::size_t accepted = 0;
    for (std::size_t k = 200; k < 300; ++k) accepted += process_event(s, d.tensor.slice(k)).action == Action::Accept;
    CHECK(static_cast<double>(accepted) / 100.0 >= 1.0 - s.cfg.nu - 0.05);
}

TEST_CASE("a fault on one location is reported") {
    SynthSpec spec = small_stream(103);
    add_point_faults(spec, 220, 300, 20, 0.15);
    const SynthData d = synthesize(spec);
    PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
    for (std::size_t k = 200; k < 300; ++k) {
        const Verdict v = process_event(s, d.tensor.slice(k));
        if (d.labels[k] == Label::Anomalous) {
            CHECK(v.action == Action::ReportAnomaly);
            CHECK(v.p_env < 0.9);
        }
    }
}

TEST_CASE("a global drift is absorbed") {
    const SynthData d = synthesize(scenario::drift_stream(1));
    PipelineState s = train_pipeline(d.tensor.time_range(0, scenario::kWindow), PipelineConfig{});
    std::size_t updates = 0, incorporated = 0, considered = 0;
    for (std::size_t k = scenario::kWindow; k < 1000; ++k) {
        const Verdict v = process_event(s, d.tensor.slice(k));
        if (k < scenario::kDriftStart) continue;
        updates += v.action == Action::UpdateModel;
        if (k >= scenario::kDriftStart + 100 && k < scenario::kDriftStart + 200) {
            ++considered;
            incorporated += v.action != Action::ReportAnomaly;
        }
    }
    CHECK(updates > 0);
    CHECK(static_cast<double>(incorporated) / static_cast<double>(considered) > 0.95);
}

TEST_CASE("verdict invariants over random streams") {
    std::mt19937_64 rng(104);
    for (int rep = 0; rep < 4; ++rep) {
        SynthSpec spec = small_stream(200 + static_cast<std::uint64_t>(rep));
        std::uniform_int_distribution<std::size_t> start(200, 290);
        std::uniform_real_distribution<double> mu(-0.5, 0.5);
        for (int n = 0; n < 4; ++n) {
            DriftSpec dr;
            dr.start_k = start(rng);
            dr.end_k = dr.start_k + 1 + rng() % 10;
            dr.mu_shift = mu(rng);
            dr.sigma_scale = 1.0 + 0.5 * mu(rng);
            if (rng() % 2) dr.locations = {rng() % 8, rng() % 8};
            spec.drifts.push_back(dr);
        }
        const SynthData d = synthesize(spec);
        PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
        for (std::size_t k = 200; k < 300; ++k) check_verdict(process_event(s, d.tensor.slice(k)), s.cfg.advisor);
    }
}

TEST_CASE("the frozen policy never changes the model") {
    SynthSpec spec = small_stream(105);
    DriftSpec g;
    g.start_k = 250;
    g.mu_shift = 1.0;
    spec.drifts.push_back(g);
    add_point_faults(spec, 205, 250, 10, 0.15);
    const SynthData d = synthesize(spec);
    PipelineConfig cfg = small_config();
    cfg.advisor.policy = UpdatePolicy::None;
    PipelineState s = train_pipeline(d.tensor.time_range(0, 200), cfg);
    const std::string before = model_dump(s.model);
    std::size_t reports = 0;
    for (std::size_t k = 200; k < 300; ++k) {
        const Verdict v = process_event(s, d.tensor.slice(k));
        CHECK(v.action != Action::UpdateModel);
        reports += v.action == Action::ReportAnomaly;
    }
    CHECK(reports > 0);
    CHECK(model_dump(s.model) == before);
}

TEST_CASE("reported events leave the model, snapshot and factors alone") {
    SynthSpec spec = small_stream(106);
    add_point_faults(spec, 205, 300, 5, 0.15);
    const SynthData d = synthesize(spec);
    PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
    std::size_t reports = 0;
    for (std::size_t k = 200; k < 300; ++k) {
        const std::string model = model_dump(s.model);
        const LocationSnapshot snap = s.snapshot;
        const Matrix A = s.decomp.factors.A, B = s.decomp.factors.B;
        const Verdict v = process_event(s, d.tensor.slice(k));
        if (v.action != Action::ReportAnomaly) continue;
        ++reports;
        CHECK(model_dump(s.model) == model);
        CHECK(same_snapshot(s.snapshot, snap));
        CHECK(s.decomp.factors.A == A);
        CHECK(s.decomp.factors.B == B);
        CHECK(s.decomp.factors.C.rows() == static_cast<Eigen::Index>(k + 1));
    }
    CHECK(reports > 0);
}

TEST_CASE("threshold policies follow the baseline rule") {
    SynthSpec spec = small_stream(107);
    DriftSpec g;
    g.start_k = 240;
    g.mu_shift = 0.3;
    spec.drifts.push_back(g);
    const SynthData d = synthesize(spec);
    for (UpdatePolicy p : {UpdatePolicy::Threshold, UpdatePolicy::SelfAdvisedStub}) {
        PipelineConfig cfg = small_config();
        cfg.advisor.policy = p;
        cfg.advisor.threshold = -0.05;
        PipelineState s = train_pipeline(d.tensor.time_range(0, 200), cfg);
        for (std::size_t k = 200; k < 300; ++k) {
            const Verdict v = process_event(s, d.tensor.slice(k));
            CHECK(v.action == baseline_threshold_policy(v.g_raw, -0.05));
        }
    }
}

TEST_CASE("bundle round trip continues the stream identically") {
    SynthSpec spec = small_stream(108);
    add_point_faults(spec, 230, 300, 10, 0.15);
    const SynthData d = synthesize(spec);
    PipelineState s = train_pipeline(d.tensor.time_range(0, 200), small_config());
    for (std::size_t k = 200; k < 220; ++k) process_event(s, d.tensor.slice(k));

    const auto path = std::filesystem::temp_directory_path() / "ocpd_bundle_test.json";
    save_bundle(s, path);
    PipelineState back = load_bundle(path);
    std::filesystem::remove(path);

    CHECK(back.next_t == s.next_t);
    CHECK(back.cfg.advisor.gamma_change == s.cfg.advisor.gamma_change);
    CHECK(back.cfg.kernel.sigma == s.cfg.kernel.sigma);
    CHECK(model_dump(back.model) == model_dump(s.model));
    CHECK(back.decomp.factors.A == s.decomp.factors.A);
    CHECK(back.decomp.factors.C == s.decomp.factors.C);
    for (Eigen::Index i = 0; i < s.model.train_x.rows(); ++i) {
        const Vector x = s.model.train_x.row(i).transpose();
        CHECK(std::abs(decision_value(back.model, x) - decision_value(s.model, x)) <= 1e-9);
    }
    for (std::size_t k = 220; k < 300; ++k) {
        const Verdict a = process_event(s, d.tensor.slice(k));
        const Verdict b = process_event(back, d.tensor.slice(k));
        CHECK(a.action == b.action);
        CHECK(a.g_raw == b.g_raw);
        CHECK(a.p_env == b.p_env);
    }
}

TEST_CASE("a training-only bundle has nothing left to stream") {
    const SynthData d = synthesize(small_stream(109));
    const PipelineState s = train_pipeline(d.tensor.time_range(0, 300), small_config());
    CHECK(s.next_t == d.tensor.dim_k());
}

TEST_CASE("config JSON round trip") {
    PipelineConfig c;
    c.rank = 3;
    c.nu = 0.07;
    c.kernel = {KernelKind::Linear, 2.5};
    c.advisor.k_neighbors = 4;
    c.advisor.gamma_change = 0.123;
    c.advisor.confidence = 0.8;
    c.advisor.policy = UpdatePolicy::Threshold;
    c.advisor.threshold = -0.3;
    c.stream.nesgd.friction = 0.5;
    c.stream.max_epochs = 17;
    const PipelineConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back).dump() == config_to_json(c).dump());
    CHECK(back.advisor.policy == UpdatePolicy::Threshold);
    CHECK(back.kernel.kind == KernelKind::Linear);

    nlohmann::json bad = config_to_json(c);
    bad["nu"] = 1.5;
    CHECK_THROWS_AS(config_from_json(bad), Error);
}

TEST_CASE("verdict CSV round trip") {
    std::vector<Verdict> vs(3);
    vs[0] = {500, -0.25, 1.0 / 12.0, -0.25, Action::ReportAnomaly};
    vs[1] = {501, 0.125, 0.0, 0.125, Action::Accept};
    vs[2] = {502, -1e-7, 1.0, 1e-7, Action::UpdateModel};
    std::stringstream out;
    write_verdict_header(out);
    for (const Verdict& v : vs) write_verdict_row(v, out);
    CHECK(out.str().rfind("t,g_raw,p_env,g_advised,action\n", 0) == 0);
    const auto back = read_verdicts(out);
    REQUIRE(back.size() == 3);
    for (std::size_t n = 0; n < 3; ++n) {
        CHECK(back[n].t == vs[n].t);
        CHECK(back[n].g_raw == vs[n].g_raw);
        CHECK(back[n].p_env == vs[n].p_env);
        CHECK(back[n].g_advised == vs[n].g_advised);
        CHECK(back[n].action == vs[n].action);
    }
    std::istringstream bad("t,g,p\n");
    CHECK_THROWS_AS(read_verdicts(bad), Error);
}
