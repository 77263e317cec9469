#include "ocpd/incremental.hpp"

#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace ocpd {

std::string_view to_string(SetName s) noexcept {
    switch (s) {
    case SetName::S: return "S";
    case SetName::E: return "E";
    case SetName::R: return "R";
    case SetName::Candidate: return "candidate";
    }
    return "?";
}

namespace {

SetName parse_set(const std::string& s) {
    if (s == "S") return SetName::S;
    if (s == "E") return SetName::E;
    if (s == "R") return SetName::R;
    if (s == "candidate") return SetName::Candidate;
    throw Error(ErrorCode::ParseError, "unknown set '" + s + "'");
}

} // namespace

nlohmann::ordered_json event_to_json(const MigrationEvent& e) {
    nlohmann::ordered_json j;
    j["case"] = e.case_id;
    j["index"] = e.index;
    j["from"] = std::string(to_string(e.from));
    j["to"] = std::string(to_string(e.to));
    j["delta_alpha_c"] = e.delta_alpha_c;
    j["phase"] = e.phase;
    return j;
}

MigrationEvent event_from_json(const nlohmann::json& j) {
    try {
        MigrationEvent e;
        e.case_id = j.at("case").get<int>();
        e.index = j.at("index").get<std::size_t>();
        e.from = parse_set(j.at("from").get<std::string>());
        e.to = parse_set(j.at("to").get<std::string>());
        e.delta_alpha_c = j.at("delta_alpha_c").get<double>();
        e.phase = j.at("phase").get<int>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ParseError, std::string("migration event: ") + ex.what());
    }
}

void write_audit_log(const std::vector<MigrationEvent>& events, std::ostream& out) {
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

std::vector<MigrationEvent> read_audit_log(std::istream& in) {
    std::vector<MigrationEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& ex) {
            throw Error(ErrorCode::ParseError, std::string("audit log: ") + ex.what());
        }
    }
    return events;
}

namespace {

constexpr double kZeroStep = 1e-14;  // smaller increments count as zero
constexpr double kSlopeTol = 1e-11;  // sensitivities below this cannot block

enum class Loc : unsigned char { S, E, R, Cand };

SetName set_of(Loc l) {
    switch (l) {
    case Loc::S: return SetName::S;
    case Loc::E: return SetName::E;
    case Loc::R: return SetName::R;
    case Loc::Cand: return SetName::Candidate;
    }
    return SetName::Candidate;
}

struct Choice {
    double delta = 0.0;
    int case_id = 0;
    std::size_t index = 0;
    Loc from = Loc::S;
    Loc to = Loc::S;
    bool valid = false;
};

void offer(Choice& best, double delta, int case_id, std::size_t index, Loc from, Loc to) {
    if (!std::isfinite(delta)) return;
    if (delta < kZeroStep) delta = 0.0;
    const bool better = !best.valid || delta < best.delta ||
                        (delta == best.delta && (case_id < best.case_id ||
                                                 (case_id == best.case_id && index < best.index)));
    if (better) best = {delta, case_id, index, from, to, true};
}

struct CandidateInfo {
    double alpha = 0.0;
    double g = 0.0;
    double gamma = 0.0;
    std::size_t index = 0;
};

/// Cases 1-3 over the model's own indices plus, when `cand` is set, cases 4 and 5.
/// `cdot` is the rate of the upper bound along the path.
Choice choose(const Vector& alpha, const Vector& g, const std::vector<Loc>& loc, const BorderedSystem& sys,
              const Vector& beta, const Vector& gamma, double c_bound, double cdot,
              const std::optional<CandidateInfo>& cand) {
    Choice best;
    for (std::size_t p = 0; p < sys.size(); ++p) {
        const std::size_t i = sys.s_order[p];
        const double b = beta(static_cast<Eigen::Index>(p) + 1);
        const double a = alpha(static_cast<Eigen::Index>(i));
        if (b - cdot > kSlopeTol) offer(best, (c_bound - a) / (b - cdot), 1, i, Loc::S, Loc::E);
        if (b < -kSlopeTol) offer(best, -a / b, 2, i, Loc::S, Loc::R);
    }
    for (std::size_t i = 0; i < loc.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (loc[i] == Loc::E && gamma(ii) > kSlopeTol) offer(best, -g(ii) / gamma(ii), 3, i, Loc::E, Loc::S);
        if (loc[i] == Loc::R && gamma(ii) < -kSlopeTol) offer(best, -g(ii) / gamma(ii), 3, i, Loc::R, Loc::S);
    }
    if (cand) {
        if (cand->gamma > kSlopeTol) offer(best, -cand->g / cand->gamma, 4, cand->index, Loc::Cand, Loc::S);
        offer(best, c_bound - cand->alpha, 5, cand->index, Loc::Cand, Loc::E);
    }
    return best;
}

std::vector<Loc> locations_of(const OcsvmModel& m) {
    std::vector<Loc> loc(m.size(), Loc::R);
    for (std::size_t i : m.sys.s_order) loc[i] = Loc::S;
    for (std::size_t i : m.error) loc[i] = Loc::E;
    for (std::size_t i : m.reserve) loc[i] = Loc::R;
    return loc;
}

/// Working state of one insertion. The candidate is appended to the model up front
/// with alpha 0 so every decision value includes its contribution.
class Path {
public:
    Path(OcsvmModel model, const Vector& x_c, const MigrationObserver& observer)
        : m_(std::move(model)), observer_(observer) {
        const auto n = static_cast<Eigen::Index>(m_.size());
        const Vector kc = kernel_column(m_.kernel, m_.train_x, x_c);
        m_.train_x.conservativeResize(n + 1, Eigen::NoChange);
        m_.train_x.row(n) = x_c.transpose();
        m_.gram.conservativeResize(n + 1, n + 1);
        m_.gram.col(n).head(n) = kc;
        m_.gram.row(n).head(n) = kc.transpose();
        m_.gram(n, n) = kernel_eval(m_.kernel, x_c, x_c);
        m_.alpha.conservativeResize(n + 1);
        m_.alpha(n) = 0.0;
        loc_ = locations_of(m_);
        loc_.resize(static_cast<std::size_t>(n) + 1, Loc::Cand);
        loc_[static_cast<std::size_t>(n)] = Loc::Cand;
        cand_ = static_cast<std::size_t>(n);
        budget_ = 20 * (static_cast<std::size_t>(n) + 10);
        recompute_g();
    }

    void shrink_bound() {
        const double target = 1.0 / (m_.nu * static_cast<double>(m_.size()));
        while (m_.c_bound > target) {
            spend();
            if (m_.sys.empty()) {
                seed_from_reserve();
                continue;
            }
            std::vector<std::size_t> movers;
            for (std::size_t i = 0; i < loc_.size(); ++i)
                if (loc_[i] == Loc::E) movers.push_back(i);
            const Vector beta = sensitivities(movers, -1.0);
            const Vector gamma = slopes(movers, -1.0, beta);
            const Choice c = choose(m_.alpha, g_, loc_, m_.sys, beta, gamma, m_.c_bound, -1.0, std::nullopt);
            const double remaining = m_.c_bound - target;
            if (!c.valid || c.delta > remaining) {
                advance(remaining, beta, movers, -1.0, -1.0);
                m_.c_bound = target;
                pin_errors();
                recompute_g();
                break;
            }
            advance(c.delta, beta, movers, -1.0, -1.0);
            pin_errors();
            migrate(c, 1);
        }
        m_.c_bound = target;
        pin_errors();
        recompute_g();
    }

    void grow_candidate() {
        const auto ci = static_cast<Eigen::Index>(cand_);
        if (g_(ci) >= 0.0) {
            loc_[cand_] = Loc::R;
            return;
        }
        const std::vector<std::size_t> movers{cand_};
        for (;;) {
            spend();
            if (m_.sys.empty()) {
                if (seed_from_error()) return;
                continue;
            }
            const Vector beta = sensitivities(movers, 1.0);
            const Vector gamma = slopes(movers, 1.0, beta);
            std::vector<Loc> others = loc_;
            const CandidateInfo info{m_.alpha(ci), g_(ci), gamma(ci), cand_};
            const Choice c = choose(m_.alpha, g_, others, m_.sys, beta, gamma, m_.c_bound, 0.0, info);
            if (!c.valid) {
                throw Error(ErrorCode::Immobile, "no admissible increment for the candidate");
            }
            advance(c.delta, beta, movers, 1.0, 0.0);
            migrate(c, 2);
            if (c.case_id >= 4) return;
        }
    }

    OcsvmModel finish() {
        if (m_.sys.empty()) {
            sync_sets();
            m_.rho = rho_without_margin(m_.gram * m_.alpha, m_.error, m_.reserve);
        }
        sync_sets();
        return std::move(m_);
    }

    std::vector<MigrationEvent> events;

private:
    void spend() {
        if (budget_-- == 0) {
            throw Error(ErrorCode::Immobile, "insertion path did not terminate");
        }
    }

    void recompute_g() {
        g_ = m_.gram * m_.alpha;
        g_.array() -= m_.rho;
    }

    /// beta = -q_inv [sum of rates; K_S,movers * rates]
    Vector sensitivities(const std::vector<std::size_t>& movers, double rate) const {
        const auto s = static_cast<Eigen::Index>(m_.sys.size());
        Vector u = Vector::Zero(s + 1);
        u(0) = rate * static_cast<double>(movers.size());
        for (Eigen::Index p = 0; p < s; ++p) {
            const auto sp = static_cast<Eigen::Index>(m_.sys.s_order[static_cast<std::size_t>(p)]);
            for (std::size_t mv : movers) u(p + 1) += rate * m_.gram(sp, static_cast<Eigen::Index>(mv));
        }
        return -(m_.sys.q_inv * u);
    }

    /// Rate of change of every decision value along the current direction.
    Vector slopes(const std::vector<std::size_t>& movers, double rate, const Vector& beta) const {
        Vector gamma = Vector::Constant(m_.gram.rows(), beta(0));
        for (std::size_t mv : movers) gamma += rate * m_.gram.col(static_cast<Eigen::Index>(mv));
        for (std::size_t p = 0; p < m_.sys.size(); ++p) {
            gamma += beta(static_cast<Eigen::Index>(p) + 1) * m_.gram.col(static_cast<Eigen::Index>(m_.sys.s_order[p]));
        }
        return gamma;
    }

    void advance(double delta, const Vector& beta, const std::vector<std::size_t>& movers, double rate, double cdot) {
        if (delta != 0.0) {
            for (std::size_t p = 0; p < m_.sys.size(); ++p) {
                m_.alpha(static_cast<Eigen::Index>(m_.sys.s_order[p])) += beta(static_cast<Eigen::Index>(p) + 1) * delta;
            }
            m_.rho -= beta(0) * delta;
            for (std::size_t mv : movers) m_.alpha(static_cast<Eigen::Index>(mv)) += rate * delta;
            m_.c_bound += cdot * delta;
        }
    }

    void pin_errors() {
        for (std::size_t i = 0; i < loc_.size(); ++i)
            if (loc_[i] == Loc::E) m_.alpha(static_cast<Eigen::Index>(i)) = m_.c_bound;
    }

    void migrate(const Choice& c, int phase) {
        const auto ii = static_cast<Eigen::Index>(c.index);
        switch (c.to) {
        case Loc::E:
            m_.alpha(ii) = m_.c_bound;
            if (c.from == Loc::S) q_inverse_shrink(m_.sys, m_.gram, c.index);
            break;
        case Loc::R:
            m_.alpha(ii) = 0.0;
            if (c.from == Loc::S) q_inverse_shrink(m_.sys, m_.gram, c.index);
            break;
        case Loc::S:
            q_inverse_expand(m_.sys, m_.gram, c.index);
            break;
        case Loc::Cand:
            break;
        }
        loc_[c.index] = c.to;
        recompute_g();
        record(c, phase);
    }

    void record(const Choice& c, int phase) {
        MigrationEvent e;
        e.case_id = c.case_id;
        e.index = c.index;
        e.from = set_of(c.from);
        e.to = set_of(c.to);
        e.delta_alpha_c = c.delta;
        e.phase = phase;
        events.push_back(e);
        if (observer_) {
            sync_sets();
            const bool moving = loc_[cand_] == Loc::Cand;
            observer_(m_, e, moving ? std::optional<std::size_t>(cand_) : std::nullopt);
        }
    }

    /// Empty margin set while mass leaves the box: raise rho until the reserve
    /// vector with the smallest decision value reaches the margin.
    void seed_from_reserve() {
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < loc_.size(); ++i) {
            if (loc_[i] == Loc::R && (!pick || g_(static_cast<Eigen::Index>(i)) < g_(static_cast<Eigen::Index>(*pick)))) pick = i;
        }
        if (!pick) throw Error(ErrorCode::Immobile, "every vector is at the bound; the box cannot shrink");
        m_.rho += g_(static_cast<Eigen::Index>(*pick));
        recompute_g();
        migrate({0.0, 3, *pick, Loc::R, Loc::S, true}, 1);
    }

    /// Empty margin set while the candidate gains mass: lower rho until an error
    /// vector or the candidate reaches the margin. Returns true if the candidate did.
    bool seed_from_error() {
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < loc_.size(); ++i) {
            if (loc_[i] == Loc::E && (!pick || g_(static_cast<Eigen::Index>(i)) > g_(static_cast<Eigen::Index>(*pick)))) pick = i;
        }
        const auto ci = static_cast<Eigen::Index>(cand_);
        const double shift_c = -g_(ci);
        const bool candidate_first = !pick || shift_c < -g_(static_cast<Eigen::Index>(*pick));
        if (candidate_first) {
            m_.rho -= shift_c;
            recompute_g();
            migrate({0.0, 4, cand_, Loc::Cand, m_.alpha(ci) > 0.0 ? Loc::S : Loc::R, true}, 2);
            return true;
        }
        m_.rho += g_(static_cast<Eigen::Index>(*pick));
        recompute_g();
        migrate({0.0, 3, *pick, Loc::E, Loc::S, true}, 2);
        return false;
    }

    void sync_sets() {
        m_.error.clear();
        m_.reserve.clear();
        for (std::size_t i = 0; i < loc_.size(); ++i) {
            if (loc_[i] == Loc::E) m_.error.push_back(i);
            if (loc_[i] == Loc::R) m_.reserve.push_back(i);
        }
    }

    OcsvmModel m_;
    const MigrationObserver& observer_;
    std::vector<Loc> loc_;
    std::size_t cand_ = 0;
    std::size_t budget_ = 0;
    Vector g_;
};

} // namespace

Vector compute_beta(const OcsvmModel& m, const BorderedSystem& sys, const Vector& x_c) {
    if (sys.empty()) {
        throw Error(ErrorCode::EmptyMarginSet, "margin set is empty; adjust rho first");
    }
    const auto s = static_cast<Eigen::Index>(sys.size());
    Vector u(s + 1);
    u(0) = 1.0;
    for (Eigen::Index p = 0; p < s; ++p) {
        u(p + 1) = kernel_eval(m.kernel, m.train_x.row(static_cast<Eigen::Index>(sys.s_order[static_cast<std::size_t>(p)])).transpose(), x_c);
    }
    return -(sys.q_inv * u);
}

Vector compute_gamma(const OcsvmModel& m, const BorderedSystem& sys, const Vector& beta, const Vector& x_c) {
    if (beta.size() != static_cast<Eigen::Index>(sys.size()) + 1) {
        throw Error(ErrorCode::ShapeMismatch, "beta length must be |S| + 1");
    }
    const auto n = static_cast<Eigen::Index>(m.size());
    Vector gamma(n + 1);
    gamma.head(n) = kernel_column(m.kernel, m.train_x, x_c).array() + beta(0);
    double gc = kernel_eval(m.kernel, x_c, x_c) + beta(0);
    for (std::size_t p = 0; p < sys.size(); ++p) {
        const auto sp = static_cast<Eigen::Index>(sys.s_order[p]);
        const double b = beta(static_cast<Eigen::Index>(p) + 1);
        gamma.head(n) += b * m.gram.col(sp);
        gc += b * kernel_eval(m.kernel, m.train_x.row(sp).transpose(), x_c);
    }
    gamma(n) = gc;
    return gamma;
}

MigrationEvent min_delta_alpha(const OcsvmModel& m, const BorderedSystem& sys, const Vector& beta,
                               const Vector& gamma, double alpha_c, double g_c) {
    const auto n = static_cast<Eigen::Index>(m.size());
    if (gamma.size() != n + 1 || beta.size() != static_cast<Eigen::Index>(sys.size()) + 1) {
        throw Error(ErrorCode::ShapeMismatch, "beta/gamma lengths do not match the model");
    }
    if (!(g_c < 0.0) || alpha_c > m.c_bound) {
        throw Error(ErrorCode::InvalidArgument, "candidate must violate (g_c < 0) with alpha_c <= c_bound");
    }
    OcsvmModel probe = m;
    probe.sys = sys;
    const std::vector<Loc> loc = locations_of(probe);
    const Vector g = m.training_decisions();
    const CandidateInfo info{alpha_c, g_c, gamma(n), static_cast<std::size_t>(n)};
    const Choice c = choose(m.alpha, g, loc, sys, beta, gamma.head(n), m.c_bound, 0.0, info);
    if (!c.valid || (c.delta == 0.0 && c.case_id == 5)) {
        throw Error(ErrorCode::Immobile, "no positive increment of alpha_c exists");
    }
    MigrationEvent e;
    e.case_id = c.case_id;
    e.index = c.index;
    e.from = set_of(c.from);
    e.to = set_of(c.to);
    e.delta_alpha_c = c.delta;
    return e;
}

std::vector<MigrationEvent> add_sample(OcsvmModel& m, const Vector& x_c, const MigrationObserver& observer) {
    if (x_c.size() != m.train_x.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "candidate length differs from the training vectors");
    }
    if (!x_c.allFinite()) {
        throw Error(ErrorCode::NonFinite, "candidate has non-finite entries");
    }
    Path path(m, x_c, observer);
    path.shrink_bound();
    path.grow_candidate();
    std::vector<MigrationEvent> events = std::move(path.events);
    m = path.finish();
    return events;
}

} // namespace ocpd
