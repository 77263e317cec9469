#pragma once

#include "ocpd/ocsvm.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ocpd {

enum class SetName { S, E, R, Candidate };

std::string_view to_string(SetName s) noexcept;

/// One step of an insertion path.
///   case 1: margin -> error, 2: margin -> reserve, 3: error/reserve -> margin,
///   4: candidate -> margin (ends), 5: candidate -> error (ends).
/// Phase 1 shrinks the box to 1/(nu (n+1)); there delta_alpha_c is the
/// decrease of the bound. Phase 2 grows the candidate's alpha.
struct MigrationEvent {
    int case_id = 0;
    std::size_t index = 0;
    SetName from = SetName::S;
    SetName to = SetName::S;
    double delta_alpha_c = 0.0;
    int phase = 2;
};

nlohmann::ordered_json event_to_json(const MigrationEvent& e);
MigrationEvent event_from_json(const nlohmann::json& j);

/// JSON lines, one event per line.
void write_audit_log(const std::vector<MigrationEvent>& events, std::ostream& out);
std::vector<MigrationEvent> read_audit_log(std::istream& in);

/// beta = -q_inv [1; K(x_S, x_c)]. beta(0) is the sensitivity of b = -rho,
/// beta(1..) those of the margin alphas. Throws empty-margin-set for S empty.
Vector compute_beta(const OcsvmModel& m, const BorderedSystem& sys, const Vector& x_c);

/// gamma_i = K(x_i, x_c) + sum_{j in S} K(x_i, x_j) beta_j + beta_0 for every
/// training index i, followed by gamma_c for the candidate itself (length n + 1).
Vector compute_gamma(const OcsvmModel& m, const BorderedSystem& sys, const Vector& beta, const Vector& x_c);

/// Smallest admissible increment of alpha_c over the five cases, for a candidate
/// that is not part of `m` yet (its alpha enters only through alpha_c and g_c).
/// Requires g_c < 0 and alpha_c <= c_bound; throws immobile if nothing can move.
MigrationEvent min_delta_alpha(const OcsvmModel& m, const BorderedSystem& sys, const Vector& beta,
                               const Vector& gamma, double alpha_c, double g_c);

/// Called after every migration with the intermediate model; `pending` is the
/// candidate index while it is still moving.
using MigrationObserver =
    std::function<void(const OcsvmModel&, const MigrationEvent&, std::optional<std::size_t> pending)>;

/// Exact insertion of x_c. The model is changed only on success; on immobile it
/// is left as it was and the caller should retrain in batch.
std::vector<MigrationEvent> add_sample(OcsvmModel& m, const Vector& x_c, const MigrationObserver& observer = {});

} // namespace ocpd
