#include "stataction/report_io.hpp"

#include <cmath>

#include "stataction/problem_io.hpp"

namespace stataction {

using nlohmann::json;

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

json to_json(const StationaryResult& r) {
  json j;
  j["t"] = r.t;
  j["x"] = vec_to_json(r.x);
  j["p_star"] = vec_to_json(r.p_star);
  j["value"] = number(r.value);
  j["residual_gradp"] = number(r.residual_gradp);
  j["residual_fixedpoint"] = number(r.residual_fixedpoint);
  j["classification"] = to_string(r.classification);
  j["jacobian_sigma_min"] = number(r.jacobian_sigma_min);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["tolerance"] = r.tolerance;
  if (r.classification == Classification::Family) {
    j["family_dim"] = r.family_dim;
    json basis = json::array();
    for (Eigen::Index c = 0; c < r.family_basis.cols(); ++c) basis.push_back(vec_to_json(r.family_basis.col(c)));
    j["family_basis"] = basis;
    if (r.family_value_spread) j["family_value_spread"] = number(*r.family_value_spread);
  }
  if (r.tpbvp_solved) j["tpbvp_solved"] = true;
  if (r.u21_sigma_min) j["u21_sigma_min"] = number(*r.u21_sigma_min);
  if (r.u21_condition) j["u21_condition"] = number(*r.u21_condition);
  return j;
}

json to_json(const AssumptionReport& r) {
  json j;
  j["m_est"] = r.m_est;
  j["K_est"] = r.K_est;
  j["horizon_bound"] = r.unbounded() ? json("unbounded") : json(r.horizon_bound);
  j["holds_on_samples"] = r.holds_on_samples;
  return j;
}

json to_json(const VerificationReport& r) {
  json j;
  j["sample_times"] = r.sample_times;
  j["gradp"] = r.gradp;
  j["fixedpoint"] = r.fixedpoint;
  j["max_gradp"] = r.max_gradp;
  j["max_fixedpoint"] = r.max_fixedpoint;
  j["tol"] = r.tol;
  j["passed"] = r.passed;
  return j;
}

json to_json(const HjbReport& r) {
  return json{{"along_flow", r.along_flow}, {"pde", r.pde}, {"max", r.max()}};
}

json to_json(const SecondOrderReport& r) {
  return json{{"second_order", r.second_order},
              {"grad_p_rate", r.grad_p_rate},
              {"grad_x_rate", r.grad_x_rate},
              {"max", r.max()}};
}

Classification classification_from_string(const std::string& s) {
  if (s == "unique") return Classification::Unique;
  if (s == "family") return Classification::Family;
  if (s == "nonexistent") return Classification::Nonexistent;
  if (s == "inconclusive") return Classification::Inconclusive;
  throw ConfigError("unknown classification '" + s + "'");
}

SavedResult saved_result_from_json(const json& doc, int dim) {
  try {
    SavedResult r;
    r.t = doc.at("t").get<double>();
    r.x = vec_from_json(doc.at("x"), dim, "result.x");
    r.p_star = vec_from_json(doc.at("p_star"), dim, "result.p_star");
    r.classification = classification_from_string(doc.at("classification").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("result document: ") + e.what());
  }
}

}  // namespace stataction
