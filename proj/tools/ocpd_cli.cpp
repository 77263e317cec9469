#include "ocpd/bench.hpp"
#include "ocpd/error.hpp"
#include "ocpd/metrics.hpp"
#include "ocpd/pipeline.hpp"
#include "ocpd/synth.hpp"
#include "ocpd/tensor_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ocpd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Benchmark dims relative to the full-size time axis.
constexpr double kReferenceTimeSteps = 10000.0;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, sep))
        if (!part.empty()) out.push_back(part);
    return out;
}

std::size_t parse_index(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used == v.size()) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, "drift " + key + ": expected a non-negative integer, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, "drift " + key + ": expected a number, got '" + v + "'");
}

// "start-k=700,mu-shift=2,sigma-scale=2,end-k=800,locations=1;4" (locations default: all)
DriftSpec parse_drift(const std::string& text) {
    DriftSpec d;
    bool has_start = false;
    for (const auto& field : split(text, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "drift field '" + field + "' lacks '='");
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "start-k") {
            d.start_k = parse_index(key, value);
            has_start = true;
        } else if (key == "end-k") {
            d.end_k = parse_index(key, value);
        } else if (key == "mu-shift") {
            d.mu_shift = parse_real(key, value);
        } else if (key == "sigma-scale") {
            d.sigma_scale = parse_real(key, value);
        } else if (key == "locations") {
            if (value != "all")
                for (const auto& j : split(value, ';')) d.locations.push_back(parse_index(key, j));
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown drift field '" + key + "'");
        }
    }
    if (!has_start) throw Error(ErrorCode::InvalidArgument, "drift needs start-k");
    return d;
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    }
};

// ---- synth ----

struct SynthArgs {
    SynthSpec spec;
    std::vector<std::string> drifts;
    std::size_t fault_first = 0, fault_last = 0, fault_every = 10;
    double fault_mu = 0.0;
    std::string out;
};

void run_synth(const SynthArgs& a) {
    SynthSpec spec = a.spec;
    for (const auto& d : a.drifts) spec.drifts.push_back(parse_drift(d));
    if (a.fault_last > a.fault_first) add_point_faults(spec, a.fault_first, a.fault_last, a.fault_every, a.fault_mu);
    const SynthData data = synthesize(spec);
    write_tensor(data.tensor, a.out);
    write_labels(data.labels, labels_path(a.out));
}

// ---- bench ----

struct BenchArgs {
    std::string tensor, out, meta;
    std::string optimizers = "sgd,psgd,nesgd";
    BenchOptions opts;
    double eta0 = 1.0, decay = 1.0;
};

void run_bench(const BenchArgs& a) {
    const DenseTensor3 t = read_tensor(a.tensor);
    BenchOptions opts = a.opts;
    opts.optimizers.clear();
    for (const auto& name : split(a.optimizers, ',')) opts.optimizers.push_back(parse_optimizer(name));
    opts.nesgd.lr = {a.eta0, a.decay};
    const Timer timer;
    const auto traces = bench_optimizers(t, opts);
    std::cerr << "bench: " << timer.ms() << " ms\n";

    std::ofstream out(a.out);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + a.out);
    write_bench_csv(traces, out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + a.out);

    nlohmann::ordered_json meta;
    meta["I"] = t.dim_i();
    meta["J"] = t.dim_j();
    meta["K"] = t.dim_k();
    meta["time_scale"] = static_cast<double>(t.dim_k()) / kReferenceTimeSteps;
    meta["rank"] = opts.rank;
    meta["steps"] = opts.steps;
    meta["eta0"] = opts.nesgd.lr.eta0;
    meta["decay"] = opts.nesgd.lr.decay;
    meta["init_seed"] = opts.init_seed;
    meta["shuffle_seed"] = opts.shuffle_seed;
    const double best = best_final_rmse(traces);
    const double tau = 1.1 * best;
    meta["best_final_rmse"] = format_double(best);
    meta["tau"] = format_double(tau);
    auto runs = nlohmann::ordered_json::array();
    for (const auto& tr : traces) {
        nlohmann::ordered_json r;
        r["optimizer"] = std::string(to_string(tr.kind));
        r["final_rmse"] = tr.points.empty() ? "" : format_double(tr.points.back().rmse);
        r["diverged"] = tr.diverged;
        const auto reach = steps_to_reach(tr, tau);
        r["steps_to_tau"] = reach ? nlohmann::ordered_json(*reach) : nlohmann::ordered_json(nullptr);
        runs.push_back(std::move(r));
    }
    meta["runs"] = std::move(runs);
    fs::path meta_path = a.meta;
    if (meta_path.empty()) {
        meta_path = a.out;
        meta_path.replace_filename(meta_path.stem().string() + "_meta.json");
    }
    write_json(meta, meta_path);
}

// ---- train ----

struct PipelineFlags {
    std::optional<std::size_t> rank, k_neighbors;
    std::optional<double> nu, sigma, gamma_change, confidence, threshold;
    std::optional<std::string> kernel, policy;
};

void apply_flags(PipelineConfig& c, const PipelineFlags& f) {
    if (f.rank) c.rank = *f.rank;
    if (f.nu) c.nu = *f.nu;
    if (f.kernel) c.kernel.kind = parse_kernel(*f.kernel);
    if (f.sigma) c.kernel.sigma = *f.sigma;
    if (f.k_neighbors) c.advisor.k_neighbors = *f.k_neighbors;
    if (f.gamma_change) c.advisor.gamma_change = *f.gamma_change;
    if (f.confidence) c.advisor.confidence = *f.confidence;
    if (f.threshold) c.advisor.threshold = *f.threshold;
    if (f.policy) c.advisor.policy = parse_policy(*f.policy);
    c.validate();
}

struct TrainArgs {
    std::string tensor, config, out;
    std::size_t window = 500;
    PipelineFlags flags;
};

void run_train(const TrainArgs& a) {
    const DenseTensor3 t = read_tensor(a.tensor);
    if (a.window == 0 || a.window > t.dim_k()) {
        throw Error(ErrorCode::InvalidArgument, "window must lie in [1, K]");
    }
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : config_from_json(read_json(a.config));
    apply_flags(cfg, a.flags);
    const Timer timer;
    const PipelineState s = train_pipeline(t.time_range(0, a.window), cfg);
    std::cerr << "train: " << timer.ms() << " ms, " << s.decomp.epochs << " epochs, window rmse "
              << s.decomp.epoch_rmse.back() << '\n';
    save_bundle(s, a.out);
}

// ---- stream ----

struct StreamArgs {
    std::string bundle, tensor, verdicts, metrics, labels, bundle_out;
    std::optional<std::string> policy;
    std::size_t window = 100;
};

void run_stream(const StreamArgs& a) {
    PipelineState s = load_bundle(a.bundle);
    if (a.policy) s.cfg.advisor.policy = parse_policy(*a.policy);
    const DenseTensor3 t = read_tensor(a.tensor);
    const std::size_t I = static_cast<std::size_t>(s.decomp.factors.A.rows());
    const std::size_t J = static_cast<std::size_t>(s.decomp.factors.B.rows());
    if (t.dim_i() != I || t.dim_j() != J) throw Error(ErrorCode::ShapeMismatch, "tensor dims do not match the bundle");
    if (s.next_t >= t.dim_k()) throw Error(ErrorCode::EmptyStream, "no slices after the training window");

    std::ofstream out(a.verdicts);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + a.verdicts);
    write_verdict_header(out);
    std::vector<Verdict> verdicts;
    const Timer timer;
    while (s.next_t < t.dim_k()) {
        verdicts.push_back(process_event(s, t.slice(s.next_t)));
        write_verdict_row(verdicts.back(), out);
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + a.verdicts);
    std::cerr << "stream: " << verdicts.size() << " events, " << timer.ms() << " ms, " << s.batch_retrains
              << " batch retrains\n";

    if (!a.metrics.empty()) {
        const std::string labels = a.labels.empty() ? labels_path(a.tensor).string() : a.labels;
        RunMetrics m = compute_metrics(verdicts, read_labels(labels), a.window);
        for (const auto& v : verdicts) m.rmse_trace.push_back(v.slice_rmse);
        auto j = metrics_to_json(m);
        j["policy"] = std::string(to_string(s.cfg.advisor.policy));
        j["batch_retrains"] = s.batch_retrains;
        write_json(j, a.metrics);
    }
    if (!a.bundle_out.empty()) save_bundle(s, a.bundle_out);
}

// ---- eval ----

struct EvalArgs {
    std::string verdicts, labels, out;
    std::size_t window = 100;
};

void run_eval(const EvalArgs& a) {
    std::ifstream in(a.verdicts);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + a.verdicts);
    const auto verdicts = read_verdicts(in);
    const auto j = metrics_to_json(compute_metrics(verdicts, read_labels(a.labels), a.window));
    if (a.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(j, a.out);
    }
}

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--rank", f.rank, "CP rank");
    cmd->add_option("--nu", f.nu, "OCSVM nu in (0,1)");
    cmd->add_option("--kernel", f.kernel, "RBF or LINEAR");
    cmd->add_option("--sigma", f.sigma, "RBF width; 0 = median pairwise distance");
    cmd->add_option("--k-neighbors", f.k_neighbors, "knn size for location scores");
    cmd->add_option("--gamma-change", f.gamma_change, "acceptable knn-score change; 0 = calibrate");
    cmd->add_option("--confidence", f.confidence, "P threshold for environmental change");
    cmd->add_option("--threshold", f.threshold, "THRESHOLD policy cut-off (<= 0)");
    cmd->add_option("--policy", f.policy, "TENSOR_ADVISED, THRESHOLD, SELF_ADVISED_STUB or NONE");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online CP decomposition with a tensor-advised incremental one-class SVM"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic tensor and its labels");
    c_synth->add_option("--out", synth.out, "tensor CSV (labels go to <stem>_labels.csv)")->required();
    c_synth->add_option("--i", synth.spec.I, "features");
    c_synth->add_option("--j", synth.spec.J, "locations");
    c_synth->add_option("--k", synth.spec.K, "time steps");
    c_synth->add_option("--rank", synth.spec.rank, "rank of the generating factors");
    c_synth->add_option("--seed", synth.spec.seed);
    c_synth->add_option("--noise-sigma", synth.spec.noise_sigma);
    c_synth->add_option("--temporal-spread", synth.spec.temporal_spread, "C entries are 1 - s + s * U[0,1)");
    c_synth->add_option("--location-floor", synth.spec.location_floor, "B entries are f + (1 - f) * U[0,1)");
    c_synth->add_option("--drift", synth.drifts,
                        "start-k=N,mu-shift=X,sigma-scale=Y[,end-k=N][,locations=all|j;j...] (repeatable)");
    c_synth->add_option("--fault-first", synth.fault_first, "first single-step fault");
    c_synth->add_option("--fault-last", synth.fault_last, "faults stop before this step");
    c_synth->add_option("--fault-every", synth.fault_every, "fault spacing");
    c_synth->add_option("--fault-mu", synth.fault_mu, "fault shift on one location");

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "compare SGD, PSGD and NESGD traces");
    c_bench->add_option("--tensor", bench.tensor)->required();
    c_bench->add_option("--out", bench.out, "CSV step,rmse,optimizer")->required();
    c_bench->add_option("--meta", bench.meta, "metadata JSON (default <stem>_meta.json)");
    c_bench->add_option("--rank", bench.opts.rank);
    c_bench->add_option("--optimizers", bench.optimizers, "comma list");
    c_bench->add_option("--steps", bench.opts.steps);
    c_bench->add_option("--log-every", bench.opts.log_every);
    c_bench->add_option("--init-seed", bench.opts.init_seed);
    c_bench->add_option("--shuffle-seed", bench.opts.shuffle_seed);
    c_bench->add_option("--eta0", bench.eta0, "eta(t) = eta0 / (1 + decay t)");
    c_bench->add_option("--decay", bench.decay);
    c_bench->add_option("--friction", bench.opts.nesgd.friction);
    c_bench->add_option("--perturb-sigma", bench.opts.nesgd.perturb_sigma);
    c_bench->add_option("--l1-beta", bench.opts.nesgd.l1_beta);
    c_bench->add_option("--seed", bench.opts.nesgd.seed, "perturbation seed");

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "fit the training window and save a bundle");
    c_train->add_option("--tensor", train.tensor)->required();
    c_train->add_option("--out", train.out, "bundle JSON")->required();
    c_train->add_option("--window", train.window, "training slices from t = 0");
    c_train->add_option("--config", train.config, "pipeline config JSON; flags override it");
    add_pipeline_flags(c_train, train.flags);

    StreamArgs stream;
    auto* c_stream = app.add_subcommand("stream", "feed the remaining slices through the pipeline");
    c_stream->add_option("--bundle", stream.bundle)->required();
    c_stream->add_option("--tensor", stream.tensor)->required();
    c_stream->add_option("--verdicts", stream.verdicts, "CSV t,g_raw,p_env,g_advised,action")->required();
    c_stream->add_option("--metrics", stream.metrics, "metrics JSON (needs labels)");
    c_stream->add_option("--labels", stream.labels, "default <tensor stem>_labels.csv");
    c_stream->add_option("--policy", stream.policy, "override the bundle's policy");
    c_stream->add_option("--window", stream.window, "events per false-alarm window");
    c_stream->add_option("--bundle-out", stream.bundle_out, "save the state after the stream");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "recompute metrics from a verdicts CSV");
    c_eval->add_option("--verdicts", eval.verdicts)->required();
    c_eval->add_option("--labels", eval.labels)->required();
    c_eval->add_option("--out", eval.out, "metrics JSON (default stdout)");
    c_eval->add_option("--window", eval.window, "events per false-alarm window");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*c_synth) run_synth(synth);
        if (*c_bench) run_bench(bench);
        if (*c_train) run_train(train);
        if (*c_stream) run_stream(stream);
        if (*c_eval) run_eval(eval);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_numerical(e.code()) ? kExitNumerical : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
