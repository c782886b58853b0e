#pragma once

#include <filesystem>

#include "json.hpp"
#include "stataction/model.hpp"

namespace stataction {

/// Builds a ProblemSpec from
///   {dim, potential:{kind, params}, inertia:{matrix|diag|scalar}, terminal:{kind, params}, t0, T}.
///
/// Potential kinds: zero, quadratic {stiffness: scalar|diag|matrix}, double_well {a, b},
/// pendulum {kappa}, polynomial {coefficients}. Any potential may carry params.K, a declared
/// global bound on 2‖∇²V‖.
/// Terminal kinds: zero, linear {c}, quadratic {Q, c}, velocity {v} (ψ(x) = −⟨Mv, x⟩).
/// Throws ConfigError on malformed input.
ProblemSpec problem_from_json(const nlohmann::json& doc);

ProblemSpec load_problem(const std::filesystem::path& path);

Vec vec_from_json(const nlohmann::json& j, int dim, const char* what);
nlohmann::json vec_to_json(const Vec& v);

}  // namespace stataction
