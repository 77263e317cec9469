#include "ocpd/bench.hpp"
#include "ocpd/cp_als.hpp"
#include "ocpd/error.hpp"
#include "ocpd/metrics.hpp"
#include "ocpd/synth.hpp"
#include "ocpd/tensor_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace ocpd;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SynthSpec tiny(std::uint64_t seed) {
    SynthSpec s;
    s.I = 10;
    s.J = 6;
    s.K = 40;
    s.seed = seed;
    return s;
}

} // namespace

TEST_CASE("synthesis is deterministic in the seed") {
    SynthSpec s = tiny(7);
    s.noise_sigma = 0.05;
    add_point_faults(s, 10, 30, 5, 0.3);
    const SynthData a = synthesize(s), b = synthesize(s);
    CHECK(a.tensor.values() == b.tensor.values());
    CHECK(a.labels == b.labels);

    const auto dir = std::filesystem::temp_directory_path() / "ocpd_synth_test";
    std::filesystem::create_directories(dir);
    write_tensor(a.tensor, dir / "a.csv");
    write_tensor(b.tensor, dir / "b.csv");
    write_labels(a.labels, dir / "a_labels.csv");
    write_labels(b.labels, dir / "b_labels.csv");
    CHECK(file_bytes(dir / "a.csv") == file_bytes(dir / "b.csv"));
    CHECK(file_bytes(dir / "a_labels.csv") == file_bytes(dir / "b_labels.csv"));
    CHECK(read_labels(dir / "a_labels.csv") == a.labels);
    CHECK(labels_path(dir / "a.csv") == dir / "a_labels.csv");
    std::filesystem::remove_all(dir);

    s.seed = 8;
    CHECK(synthesize(s).tensor.values() != a.tensor.values());
}

TEST_CASE("noiseless synthetic data is recovered by ALS") {
    SynthSpec s = tiny(11);
    s.K = 30;
    s.temporal_spread = 0.5;
    s.location_floor = 0.2;
    const SynthData d = synthesize(s);
    CHECK(rmse(d.tensor, d.truth) == 0.0);
    CHECK(rmse(d.tensor, cp_als(d.tensor, 2).factors) <= 1e-4);
}

TEST_CASE("factor ranges follow floor and spread") {
    SynthSpec s = tiny(12);
    s.temporal_spread = 0.1;
    s.location_floor = 0.6;
    const SynthData d = synthesize(s);
    CHECK(d.truth.B.minCoeff() >= 0.6);
    CHECK(d.truth.B.maxCoeff() < 1.0);
    CHECK(d.truth.C.minCoeff() >= 0.9);
    CHECK(d.truth.C.maxCoeff() < 1.0);
}

TEST_CASE("a global drift shifts every entry") {
    SynthSpec base = tiny(13);
    SynthSpec drifted = base;
    DriftSpec g;
    g.start_k = 20;
    g.end_k = 30;
    g.mu_shift = 2.0;
    g.sigma_scale = 3.0;
    drifted.drifts.push_back(g);
    const SynthData a = synthesize(base), b = synthesize(drifted);
    for (std::size_t k = 0; k < 40; ++k)
        for (std::size_t j = 0; j < 6; ++j)
            for (std::size_t i = 0; i < 10; ++i) {
                const double expect = (k >= 20 && k < 30) ? (a.tensor(i, j, k) + 2.0) * 3.0 : a.tensor(i, j, k);
                CHECK(b.tensor(i, j, k) == doctest::Approx(expect).epsilon(1e-14));
            }
    for (std::size_t k = 0; k < 40; ++k)
        CHECK(b.labels[k] == ((k >= 20 && k < 30) ? Label::DriftedHealthy : Label::Healthy));
}

TEST_CASE("labels for local and global drifts") {
    SynthSpec s = tiny(14);
    DriftSpec local;
    local.start_k = 5;
    local.end_k = 8;
    local.locations = {1, 3};
    DriftSpec all_listed;
    all_listed.start_k = 10;
    all_listed.end_k = 12;
    all_listed.locations = {0, 1, 2, 3, 4, 5};
    DriftSpec global;
    global.start_k = 7;
    s.drifts = {local, all_listed, global};
    const SynthData d = synthesize(s);
    CHECK(d.labels[4] == Label::Healthy);
    CHECK(d.labels[5] == Label::Anomalous);
    CHECK(d.labels[7] == Label::Anomalous);
    CHECK(d.labels[8] == Label::DriftedHealthy);
    CHECK(d.labels[10] == Label::DriftedHealthy);
    CHECK(d.labels[39] == Label::DriftedHealthy);
}

TEST_CASE("point faults rotate over locations") {
    SynthSpec s = tiny(15);
    add_point_faults(s, 3, 30, 4, 0.2);
    REQUIRE(s.drifts.size() == 7);
    for (std::size_t n = 0; n < 7; ++n) {
        CHECK(s.drifts[n].start_k == 3 + 4 * n);
        CHECK(s.drifts[n].end_k == 4 + 4 * n);
        CHECK(s.drifts[n].locations == std::vector<std::size_t>{n % 6});
        CHECK(s.drifts[n].mu_shift == 0.2);
    }
    CHECK_THROWS_AS(add_point_faults(s, 0, 10, 0, 0.1), Error);
}

TEST_CASE("SynthSpec validation") {
    SynthSpec s = tiny(16);
    CHECK_NOTHROW(s.validate());
    s.rank = 0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = tiny(16);
    s.location_floor = 1.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = tiny(16);
    DriftSpec d;
    d.start_k = 40;
    s.drifts.push_back(d);
    CHECK_THROWS_AS(s.validate(), Error);
    s.drifts[0].start_k = 5;
    s.drifts[0].end_k = 5;
    CHECK_THROWS_AS(s.validate(), Error);
    s.drifts[0].end_k.reset();
    s.drifts[0].locations = {6};
    CHECK_THROWS_AS(s.validate(), Error);
    CHECK_THROWS_AS(parse_label("sick"), Error);
}

TEST_CASE("metrics match an independent recount") {
    std::mt19937_64 rng(17);
    const std::size_t T = 250, start = 30;
    std::vector<Label> labels(start + T);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const auto r = rng() % 10;
        labels[t] = r == 0 ? Label::Anomalous : (t >= 150 ? Label::DriftedHealthy : Label::Healthy);
    }
    std::vector<Verdict> vs;
    for (std::size_t t = start; t < start + T; ++t) {
        Verdict v;
        v.t = t;
        v.action = static_cast<Action>(rng() % 3);
        vs.push_back(v);
    }
    const RunMetrics m = compute_metrics(vs, labels, 100);

    std::size_t healthy = 0, fa = 0, anom = 0, det = 0, post_h = 0, post_fa = 0, tail_h = 0, tail_fa = 0, upd = 0;
    for (std::size_t e = 0; e < T; ++e) {
        const Label l = labels[vs[e].t];
        const bool rep = vs[e].action == Action::ReportAnomaly;
        upd += vs[e].action == Action::UpdateModel;
        if (l == Label::Anomalous) {
            ++anom;
            det += rep;
            continue;
        }
        ++healthy;
        fa += rep;
        if (vs[e].t >= 150) {
            ++post_h;
            post_fa += rep;
        }
        if (e >= T - 100) {
            ++tail_h;
            tail_fa += rep;
        }
    }
    CHECK(m.events == T);
    CHECK(m.updates == upd);
    CHECK(*m.false_alarm_rate == doctest::Approx(double(fa) / double(healthy)));
    CHECK(*m.detection_rate == doctest::Approx(double(det) / double(anom)));
    CHECK(*m.post_onset_false_alarm_rate == doctest::Approx(double(post_fa) / double(post_h)));
    CHECK(*m.final_window_false_alarm_rate == doctest::Approx(double(tail_fa) / double(tail_h)));
    REQUIRE(m.windows.size() == 3);
    CHECK(m.windows[0].start_t == start);
    CHECK(m.windows[2].events == 50);
    std::size_t wsum = 0;
    for (const auto& w : m.windows) wsum += w.false_alarms;
    CHECK(wsum == fa);

    const auto j = metrics_to_json(m);
    CHECK(j["events"] == T);
    CHECK(j["windows"].size() == 3);
}

TEST_CASE("metrics edge cases") {
    CHECK_THROWS_AS(compute_metrics({}, {Label::Healthy}), Error);
    try {
        compute_metrics({}, {});
        FAIL("expected empty-stream");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyStream);
    }
    Verdict v;
    v.t = 0;
    const RunMetrics m = compute_metrics({v}, {Label::Anomalous});
    CHECK_FALSE(m.false_alarm_rate.has_value());
    CHECK(*m.detection_rate == 0.0);
    CHECK(metrics_to_json(m)["false_alarm_rate"].is_null());
    v.t = 1;
    CHECK_THROWS_AS(compute_metrics({v}, {Label::Healthy}), Error);
}

TEST_CASE("bench with no steps logs only the initialization") {
    const SynthData d = synthesize(tiny(18));
    BenchOptions o;
    o.steps = 0;
    const auto traces = bench_optimizers(d.tensor, o);
    REQUIRE(traces.size() == 3);
    const KruskalFactors init(random_factor(10, 2, 0), random_factor(6, 2, 1), random_factor(40, 2, 2));
    for (const auto& tr : traces) {
        REQUIRE(tr.points.size() == 1);
        CHECK(tr.points[0].step == 0);
        CHECK(tr.points[0].rmse == rmse(d.tensor, init));
    }
}

TEST_CASE("bench is reproducible and optimizers share the start") {
    SynthSpec s = tiny(19);
    s.noise_sigma = 0.01;
    const SynthData d = synthesize(s);
    BenchOptions o;
    o.steps = 200;
    o.log_every = 20;
    const auto a = bench_optimizers(d.tensor, o), b = bench_optimizers(d.tensor, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t n = 0; n < a.size(); ++n) {
        REQUIRE(a[n].points.size() == b[n].points.size());
        for (std::size_t p = 0; p < a[n].points.size(); ++p) CHECK(a[n].points[p].rmse == b[n].points[p].rmse);
        CHECK(a[n].points.front().rmse == a[0].points.front().rmse);
        CHECK(a[n].points.back().step == 200);
    }
    std::ostringstream x, y;
    write_bench_csv(a, x);
    write_bench_csv(b, y);
    CHECK(x.str() == y.str());
    CHECK(x.str().rfind("step,rmse,optimizer\n", 0) == 0);
}

TEST_CASE("steps to reach and best final") {
    BenchTrace fast{OptimizerKind::Nesgd, {{0, 1.0}, {50, 0.2}, {100, 0.1}}, false};
    BenchTrace slow{OptimizerKind::Sgd, {{0, 1.0}, {50, 0.5}, {100, 0.3}}, false};
    BenchTrace bad{OptimizerKind::Psgd, {{0, 1.0}, {50, 0.01}}, true};
    CHECK(steps_to_reach(fast, 0.2) == 50);
    CHECK(steps_to_reach(slow, 0.2) == std::nullopt);
    CHECK(best_final_rmse({fast, slow, bad}) == 0.1);
}

TEST_CASE("a drift on every location moves each location mean by the shift") {
    SynthSpec s = tiny(20);
    s.K = 200;
    s.noise_sigma = 0.01;
    s.temporal_spread = 0.0;
    DriftSpec g;
    g.start_k = 100;
    g.mu_shift = 0.7;
    s.drifts.push_back(g);
    const SynthData d = synthesize(s);
    for (std::size_t j = 0; j < 6; ++j) {
        double before = 0.0, after = 0.0;
        for (std::size_t k = 0; k < 200; ++k)
            for (std::size_t i = 0; i < 10; ++i) (k < 100 ? before : after) += d.tensor(i, j, k) / 1000.0;
        CHECK(after - before == doctest::Approx(0.7).epsilon(0.01));
    }
}
