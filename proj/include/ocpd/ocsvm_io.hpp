#pragma once

#include "ocpd/ocsvm.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace ocpd {

/// C99 hexadecimal float ("0x1.8p+1"); exact for every finite double.
std::string hex_double(double v);
double parse_hex_double(const std::string& s);

/// {nu, kernel, sigma, alpha[], rho, train_x[][]} with every double as a hex string.
nlohmann::ordered_json model_to_json(const OcsvmModel& m);

/// Inverse of model_to_json; rebuilds the Gram cache, sets and q_inv without
/// touching alpha or rho.
OcsvmModel model_from_json(const nlohmann::json& j);

void save_model(const OcsvmModel& m, const std::filesystem::path& path);
OcsvmModel load_model(const std::filesystem::path& path);

} // namespace ocpd
