#include "ocpd/synth.hpp"

#include "ocpd/cp_als.hpp"
#include "ocpd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

namespace ocpd {

bool DriftSpec::global(std::size_t J) const {
    if (locations.empty()) return true;
    std::vector<bool> seen(J, false);
    for (std::size_t j : locations)
        if (j < J) seen[j] = true;
    for (bool s : seen)
        if (!s) return false;
    return true;
}

void SynthSpec::validate() const {
    if (I == 0 || J == 0 || K == 0 || rank == 0) {
        throw Error(ErrorCode::InvalidArgument, "dims and rank must be positive");
    }
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
    if (!(temporal_spread >= 0.0 && temporal_spread <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "temporal_spread must be in [0, 1]");
    }
    if (!(location_floor >= 0.0 && location_floor < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "location_floor must be in [0, 1)");
    }
    for (const auto& d : drifts) {
        if (d.start_k >= K) throw Error(ErrorCode::InvalidArgument, "drift start_k must be < K");
        if (d.end_k && *d.end_k <= d.start_k) throw Error(ErrorCode::InvalidArgument, "drift end_k must exceed start_k");
        for (std::size_t j : d.locations)
            if (j >= J) throw Error(ErrorCode::InvalidArgument, "drift location out of range");
        if (!std::isfinite(d.mu_shift) || !std::isfinite(d.sigma_scale)) {
            throw Error(ErrorCode::InvalidArgument, "drift parameters must be finite");
        }
    }
}

std::string_view to_string(Label l) noexcept {
    switch (l) {
    case Label::Healthy: return "healthy";
    case Label::DriftedHealthy: return "drifted-healthy";
    case Label::Anomalous: return "anomalous";
    }
    return "?";
}

Label parse_label(std::string_view s) {
    if (s == "healthy") return Label::Healthy;
    if (s == "drifted-healthy") return Label::DriftedHealthy;
    if (s == "anomalous") return Label::Anomalous;
    throw Error(ErrorCode::ParseError, "unknown label '" + std::string(s) + "'");
}

SynthData synthesize(const SynthSpec& spec) {
    spec.validate();
    SynthData out;
    out.truth = KruskalFactors(random_factor(spec.I, spec.rank, spec.seed), random_factor(spec.J, spec.rank, spec.seed + 1),
                               random_factor(spec.K, spec.rank, spec.seed + 2));
    out.truth.B = (out.truth.B.array() * (1.0 - spec.location_floor) + spec.location_floor).matrix();
    out.truth.C = (out.truth.C.array() * spec.temporal_spread + (1.0 - spec.temporal_spread)).matrix();
    out.tensor = kruskal_reconstruct(out.truth);
    out.labels.assign(spec.K, Label::Healthy);

    for (const auto& d : spec.drifts) {
        const std::size_t end = std::min(spec.K, d.end_k.value_or(spec.K));
        std::vector<std::size_t> locs = d.locations;
        if (locs.empty())
            for (std::size_t j = 0; j < spec.J; ++j) locs.push_back(j);
        const bool global = d.global(spec.J);
        for (std::size_t k = d.start_k; k < end; ++k) {
            for (std::size_t j : locs)
                for (std::size_t i = 0; i < spec.I; ++i) out.tensor(i, j, k) = (out.tensor(i, j, k) + d.mu_shift) * d.sigma_scale;
            if (!global) {
                out.labels[k] = Label::Anomalous;
            } else if (out.labels[k] == Label::Healthy) {
                out.labels[k] = Label::DriftedHealthy;
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.seed + 3);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (std::size_t i = 0; i < spec.I; ++i)
            for (std::size_t j = 0; j < spec.J; ++j)
                for (std::size_t k = 0; k < spec.K; ++k) out.tensor(i, j, k) += noise(rng);
    }
    return out;
}

void add_point_faults(SynthSpec& spec, std::size_t first, std::size_t last, std::size_t every, double mu_shift) {
    if (every == 0) throw Error(ErrorCode::InvalidArgument, "fault spacing must be positive");
    if (spec.J == 0) throw Error(ErrorCode::InvalidArgument, "J must be positive");
    std::size_t n = 0;
    for (std::size_t t = first; t < last; t += every, ++n) {
        DriftSpec d;
        d.start_k = t;
        d.end_k = t + 1;
        d.mu_shift = mu_shift;
        d.locations = {n % spec.J};
        spec.drifts.push_back(std::move(d));
    }
}

std::filesystem::path labels_path(const std::filesystem::path& tensor_csv) {
    auto p = tensor_csv;
    p.replace_filename(tensor_csv.stem().string() + "_labels.csv");
    return p;
}

void write_labels(const std::vector<Label>& labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << "t,label\n";
    for (std::size_t t = 0; t < labels.size(); ++t) out << t << ',' << to_string(labels[t]) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<Label> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "t,label") {
        throw Error(ErrorCode::ParseError, path.string() + ": expected header t,label");
    }
    std::vector<Label> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "bad label row '" + line + "'");
        std::size_t t = 0;
        try {
            t = std::stoul(line.substr(0, comma));
        } catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "bad label row '" + line + "'");
        }
        if (t != labels.size()) throw Error(ErrorCode::ParseError, "labels must be listed in time order");
        labels.push_back(parse_label(line.substr(comma + 1)));
    }
    return labels;
}

} // namespace ocpd
