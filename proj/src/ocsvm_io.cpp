#include "ocpd/ocsvm_io.hpp"

#include "ocpd/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace ocpd {

std::string hex_double(double v) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFinite, "cannot serialize a non-finite value");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
    }
    return v;
}

nlohmann::ordered_json model_to_json(const OcsvmModel& m) {
    nlohmann::ordered_json j;
    j["nu"] = hex_double(m.nu);
    j["kernel"] = std::string(to_string(m.kernel.kind));
    j["sigma"] = hex_double(m.kernel.sigma);
    auto alpha = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.alpha.size(); ++i) alpha.push_back(hex_double(m.alpha(i)));
    j["alpha"] = std::move(alpha);
    j["rho"] = hex_double(m.rho);
    auto xs = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.train_x.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.train_x.cols(); ++c) row.push_back(hex_double(m.train_x(i, c)));
        xs.push_back(std::move(row));
    }
    j["train_x"] = std::move(xs);
    return j;
}

OcsvmModel model_from_json(const nlohmann::json& j) {
    try {
        OcsvmModel m;
        m.nu = parse_hex_double(j.at("nu").get<std::string>());
        m.kernel.kind = parse_kernel(j.at("kernel").get<std::string>());
        m.kernel.sigma = parse_hex_double(j.at("sigma").get<std::string>());
        m.kernel.validate();
        const auto& alpha = j.at("alpha");
        const auto& xs = j.at("train_x");
        if (alpha.size() != xs.size() || xs.empty()) {
            throw Error(ErrorCode::ParseError, "alpha and train_x lengths differ");
        }
        const auto n = static_cast<Eigen::Index>(xs.size());
        const auto d = static_cast<Eigen::Index>(xs.at(0).size());
        m.alpha.resize(n);
        m.train_x.resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            m.alpha(i) = parse_hex_double(alpha.at(static_cast<std::size_t>(i)).get<std::string>());
            const auto& row = xs.at(static_cast<std::size_t>(i));
            if (static_cast<Eigen::Index>(row.size()) != d) {
                throw Error(ErrorCode::ParseError, "ragged train_x");
            }
            for (Eigen::Index c = 0; c < d; ++c) m.train_x(i, c) = parse_hex_double(row.at(static_cast<std::size_t>(c)).get<std::string>());
        }
        m.rho = parse_hex_double(j.at("rho").get<std::string>());
        m.c_bound = 1.0 / (m.nu * static_cast<double>(n));
        m.gram = kernel_matrix(m.kernel, m.train_x);
        rebuild_sets(m, false);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("model json: ") + e.what());
    }
}

void save_model(const OcsvmModel& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << model_to_json(m).dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

OcsvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace ocpd
