#include "ocpd/pipeline.hpp"

#include "ocpd/error.hpp"
#include "ocpd/incremental.hpp"
#include "ocpd/ocsvm_io.hpp"
#include "ocpd/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ocpd {

namespace {

std::string_view velocity_name(VelocityForm v) { return v == VelocityForm::Classical ? "classical" : "ema"; }
std::string_view scaling_name(StepScaling s) { return s == StepScaling::Lipschitz ? "lipschitz" : "none"; }
std::string_view row_name(TemporalRow r) { return r == TemporalRow::LeastSquares ? "least-squares" : "gradient"; }

VelocityForm parse_velocity(const std::string& s) {
    if (s == "classical") return VelocityForm::Classical;
    if (s == "ema") return VelocityForm::Ema;
    throw Error(ErrorCode::InvalidArgument, "unknown velocity form '" + s + "'");
}
StepScaling parse_scaling(const std::string& s) {
    if (s == "lipschitz") return StepScaling::Lipschitz;
    if (s == "none") return StepScaling::None;
    throw Error(ErrorCode::InvalidArgument, "unknown step scaling '" + s + "'");
}
TemporalRow parse_row(const std::string& s) {
    if (s == "least-squares") return TemporalRow::LeastSquares;
    if (s == "gradient") return TemporalRow::Gradient;
    throw Error(ErrorCode::InvalidArgument, "unknown temporal row mode '" + s + "'");
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(hex_double(m(r, c)));
        rows.push_back(std::move(row));
    }
    nlohmann::ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["values"] = std::move(rows);
    return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& values = j.at("values");
    if (static_cast<Eigen::Index>(values.size()) != rows) throw Error(ErrorCode::ParseError, "matrix row count");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = values.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::ParseError, "matrix column count");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = parse_hex_double(row.at(static_cast<std::size_t>(c)).get<std::string>());
    }
    return m;
}

void insert_or_retrain(PipelineState& s, const Vector& c) {
    try {
        add_sample(s.model, c);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Immobile) throw;
        Matrix x(s.model.train_x.rows() + 1, s.model.train_x.cols());
        x.topRows(s.model.train_x.rows()) = s.model.train_x;
        x.bottomRows(1) = c.transpose();
        s.model = train_batch(x, s.model.nu, s.model.kernel);
        ++s.batch_retrains;
    }
}

} // namespace

void PipelineConfig::validate() const {
    if (rank == 0) throw Error(ErrorCode::InvalidArgument, "rank must be positive");
    if (!(nu > 0.0 && nu < 1.0)) throw Error(ErrorCode::InvalidArgument, "nu must lie in (0, 1)");
    if (kernel.kind == KernelKind::Rbf && kernel.sigma > 0.0) kernel.validate();
    stream.nesgd.validate();
}

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["rank"] = c.rank;
    j["nu"] = c.nu;
    j["kernel"] = std::string(to_string(c.kernel.kind));
    j["sigma"] = c.kernel.sigma;
    j["dual_convention"] = "standard";
    j["k_neighbors"] = c.advisor.k_neighbors;
    j["gamma_change"] = c.advisor.gamma_change;
    j["confidence"] = c.advisor.confidence;
    j["update_policy"] = std::string(to_string(c.advisor.policy));
    j["threshold"] = c.advisor.threshold;
    j["calibration_slices"] = c.calibration_slices;
    const NesgdOptions& o = c.stream.nesgd;
    nlohmann::ordered_json opt;
    opt["kind"] = std::string(to_string(c.stream.kind));
    opt["eta0"] = o.lr.eta0;
    opt["decay"] = o.lr.decay;
    opt["friction"] = o.friction;
    opt["perturb_sigma"] = o.perturb_sigma;
    opt["perturb_decay"] = o.perturb_decay;
    opt["l1_beta"] = o.l1_beta;
    opt["l1_mode"] = "subgradient";
    opt["nag_lookahead"] = o.nag_lookahead;
    opt["velocity"] = std::string(velocity_name(o.velocity));
    opt["scaling"] = std::string(scaling_name(o.scaling));
    opt["temporal_row"] = std::string(row_name(o.temporal_row));
    opt["seed"] = o.seed;
    opt["max_epochs"] = c.stream.max_epochs;
    opt["tol"] = c.stream.tol;
    opt["init_seed"] = c.stream.init_seed;
    opt["shuffle_seed"] = c.stream.shuffle_seed;
    j["optimizer"] = std::move(opt);
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    // Missing keys keep their defaults so hand-written configs can be partial.
    try {
        PipelineConfig c;
        c.rank = j.value("rank", c.rank);
        c.nu = j.value("nu", c.nu);
        if (j.contains("kernel")) c.kernel.kind = parse_kernel(j.at("kernel").get<std::string>());
        c.kernel.sigma = j.value("sigma", 0.0);
        if (j.contains("dual_convention") && j.at("dual_convention").get<std::string>() != "standard") {
            throw Error(ErrorCode::InvalidArgument, "only dual_convention = standard is supported");
        }
        c.advisor.k_neighbors = j.value("k_neighbors", c.advisor.k_neighbors);
        c.advisor.gamma_change = j.value("gamma_change", c.advisor.gamma_change);
        c.advisor.confidence = j.value("confidence", c.advisor.confidence);
        if (j.contains("update_policy")) c.advisor.policy = parse_policy(j.at("update_policy").get<std::string>());
        c.advisor.threshold = j.value("threshold", c.advisor.threshold);
        c.calibration_slices = j.value("calibration_slices", c.calibration_slices);
        if (j.contains("optimizer")) {
            const auto& opt = j.at("optimizer");
            NesgdOptions& o = c.stream.nesgd;
            if (opt.contains("kind")) c.stream.kind = parse_optimizer(opt.at("kind").get<std::string>());
            o.lr.eta0 = opt.value("eta0", o.lr.eta0);
            o.lr.decay = opt.value("decay", o.lr.decay);
            o.friction = opt.value("friction", o.friction);
            o.perturb_sigma = opt.value("perturb_sigma", o.perturb_sigma);
            o.perturb_decay = opt.value("perturb_decay", o.perturb_decay);
            o.l1_beta = opt.value("l1_beta", o.l1_beta);
            if (opt.contains("l1_mode") && opt.at("l1_mode").get<std::string>() != "subgradient") {
                throw Error(ErrorCode::InvalidArgument, "only l1_mode = subgradient is supported");
            }
            o.nag_lookahead = opt.value("nag_lookahead", o.nag_lookahead);
            if (opt.contains("velocity")) o.velocity = parse_velocity(opt.at("velocity").get<std::string>());
            if (opt.contains("scaling")) o.scaling = parse_scaling(opt.at("scaling").get<std::string>());
            if (opt.contains("temporal_row")) o.temporal_row = parse_row(opt.at("temporal_row").get<std::string>());
            o.seed = opt.value("seed", o.seed);
            c.stream.max_epochs = opt.value("max_epochs", c.stream.max_epochs);
            c.stream.tol = opt.value("tol", c.stream.tol);
            c.stream.init_seed = opt.value("init_seed", c.stream.init_seed);
            c.stream.shuffle_seed = opt.value("shuffle_seed", c.stream.shuffle_seed);
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
    }
}

std::vector<double> replay_knn_changes(const StreamDecomposition& d, std::size_t k, std::size_t slices) {
    StreamDecomposition copy = d;
    const std::size_t K = d.window.dim_k();
    const std::size_t count = std::min(std::max<std::size_t>(slices, 1), K);
    std::vector<double> changes;
    Vector prev = knn_score(copy.factors.B, k);
    for (std::size_t t = K - count; t < K; ++t) {
        update_online(copy, d.window.slice(t));
        const Vector curr = knn_score(copy.factors.B, k);
        for (Eigen::Index j = 0; j < curr.size(); ++j) changes.push_back(std::abs(curr(j) - prev(j)));
        prev = curr;
    }
    return changes;
}

double gamma_from_changes(std::vector<double> changes) {
    if (changes.empty()) throw Error(ErrorCode::InvalidArgument, "no knn-score changes to calibrate from");
    const auto mid = changes.begin() + static_cast<std::ptrdiff_t>(changes.size() / 2);
    std::nth_element(changes.begin(), mid, changes.end());
    return std::max(3.0 * *mid, 1e-12);
}

double calibrate_gamma_change(const StreamDecomposition& d, std::size_t k, std::size_t slices) {
    return gamma_from_changes(replay_knn_changes(d, k, slices));
}

PipelineState train_pipeline(const DenseTensor3& window, PipelineConfig cfg) {
    cfg.validate();
    cfg.advisor.validate(window.dim_j());
    PipelineState s;
    s.decomp = decompose_stream_init(window, cfg.rank, cfg.stream);
    const Matrix& C = s.decomp.factors.C;
    if (cfg.kernel.kind == KernelKind::Rbf && !(cfg.kernel.sigma > 0.0)) {
        cfg.kernel.sigma = median_pairwise_distance(C);
    }
    s.model = train_batch(C, cfg.nu, cfg.kernel);
    if (cfg.advisor.gamma_change == 0.0) {
        cfg.advisor.gamma_change = calibrate_gamma_change(s.decomp, cfg.advisor.k_neighbors, cfg.calibration_slices);
    }
    s.snapshot = LocationSnapshot::take(s.decomp.factors.B, cfg.advisor.k_neighbors);
    s.next_t = window.dim_k();
    s.cfg = std::move(cfg);
    return s;
}

Verdict process_event(PipelineState& state, const Matrix& slice) {
    const AdvisorConfig& ac = state.cfg.advisor;
    Verdict v;
    v.t = state.next_t;
    const Matrix A0 = state.decomp.factors.A, B0 = state.decomp.factors.B;
    const Matrix vA0 = state.decomp.state.vA, vB0 = state.decomp.state.vB;
    const Vector c = update_online(state.decomp, slice);
    ++state.next_t;
    const Matrix& f_a = state.decomp.factors.A;
    const Matrix& f_b = state.decomp.factors.B;
    v.slice_rmse = std::sqrt((slice - f_a * c.asDiagonal() * f_b.transpose()).squaredNorm() /
                             static_cast<double>(slice.size()));
    v.g_raw = decision_value(state.model, c);
    LocationSnapshot curr = LocationSnapshot::take(state.decomp.factors.B, ac.k_neighbors);
    const EnvironmentalChange env = environmental_change(state.snapshot, curr, ac);
    v.p_env = env.probability;
    v.mean_abs_change = env.mean_abs_change;
    v.g_advised = v.g_raw;

    switch (ac.policy) {
    case UpdatePolicy::TensorAdvised:
        if (v.g_raw >= 0.0) {
            v.action = Action::Accept;
        } else {
            v.g_advised = advised_decision(v.g_raw, v.p_env, ac);
            v.action = v.p_env >= ac.confidence ? Action::UpdateModel : Action::ReportAnomaly;
        }
        break;
    case UpdatePolicy::Threshold:
    case UpdatePolicy::SelfAdvisedStub:
        v.action = baseline_threshold_policy(v.g_raw, ac.threshold);
        break;
    case UpdatePolicy::None:
        v.action = v.g_raw >= 0.0 ? Action::Accept : Action::ReportAnomaly;
        break;
    }

    if (v.action == Action::UpdateModel) insert_or_retrain(state, c);
    if (v.action != Action::ReportAnomaly) {
        state.snapshot = std::move(curr);
    } else {
        // A reported slice must not pull the factors towards the anomaly.
        state.decomp.factors.A = A0;
        state.decomp.factors.B = B0;
        state.decomp.state.vA = vA0;
        state.decomp.state.vB = vB0;
    }
    return v;
}

void write_verdict_header(std::ostream& out) { out << "t,g_raw,p_env,g_advised,action\n"; }

void write_verdict_row(const Verdict& v, std::ostream& out) {
    out << v.t << ',' << format_double(v.g_raw) << ',' << format_double(v.p_env) << ',' << format_double(v.g_advised)
        << ',' << to_string(v.action) << '\n';
}

std::vector<Verdict> read_verdicts(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "t,g_raw,p_env,g_advised,action") {
        throw Error(ErrorCode::ParseError, "verdicts: expected header t,g_raw,p_env,g_advised,action");
    }
    std::vector<Verdict> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string f[5];
        for (auto& field : f) {
            if (!std::getline(row, field, ',')) throw Error(ErrorCode::ParseError, "verdicts: short row '" + line + "'");
        }
        Verdict v;
        try {
            v.t = std::stoul(f[0]);
            v.g_raw = std::stod(f[1]);
            v.p_env = std::stod(f[2]);
            v.g_advised = std::stod(f[3]);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "verdicts: bad row '" + line + "'");
        }
        v.action = parse_action(f[4]);
        out.push_back(v);
    }
    return out;
}

void save_bundle(const PipelineState& s, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["config"] = config_to_json(s.cfg);
    nlohmann::ordered_json f;
    f["A"] = matrix_to_json(s.decomp.factors.A);
    f["B"] = matrix_to_json(s.decomp.factors.B);
    f["C"] = matrix_to_json(s.decomp.factors.C);
    j["factors"] = std::move(f);
    nlohmann::ordered_json st;
    st["vA"] = matrix_to_json(s.decomp.state.vA);
    st["vB"] = matrix_to_json(s.decomp.state.vB);
    st["vC"] = matrix_to_json(s.decomp.state.vC);
    st["step"] = s.decomp.state.step;
    std::ostringstream rng;
    rng << s.decomp.state.rng;
    st["rng"] = rng.str();
    j["optimizer_state"] = std::move(st);
    j["model"] = model_to_json(s.model);
    nlohmann::ordered_json snap;
    snap["b"] = matrix_to_json(s.snapshot.b);
    snap["knn_scores"] = matrix_to_json(s.snapshot.knn_scores);
    j["snapshot"] = std::move(snap);
    j["next_t"] = s.next_t;
    j["batch_retrains"] = s.batch_retrains;

    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

PipelineState load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        PipelineState s;
        s.cfg = config_from_json(j.at("config"));
        const auto& f = j.at("factors");
        s.decomp.factors = KruskalFactors(matrix_from_json(f.at("A")), matrix_from_json(f.at("B")), matrix_from_json(f.at("C")));
        s.decomp.kind = s.cfg.stream.kind;
        s.decomp.state = NesgdState::init(s.decomp.factors, s.cfg.stream.nesgd);
        const auto& st = j.at("optimizer_state");
        s.decomp.state.vA = matrix_from_json(st.at("vA"));
        s.decomp.state.vB = matrix_from_json(st.at("vB"));
        s.decomp.state.vC = matrix_from_json(st.at("vC"));
        s.decomp.state.step = st.at("step").get<std::uint64_t>();
        std::istringstream rng(st.at("rng").get<std::string>());
        rng >> s.decomp.state.rng;
        if (!rng) throw Error(ErrorCode::ParseError, "bad generator state");
        s.model = model_from_json(j.at("model"));
        const auto& snap = j.at("snapshot");
        s.snapshot.b = matrix_from_json(snap.at("b"));
        s.snapshot.knn_scores = matrix_from_json(snap.at("knn_scores"));
        s.next_t = j.at("next_t").get<std::size_t>();
        s.batch_retrains = j.at("batch_retrains").get<int>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

} // namespace ocpd
