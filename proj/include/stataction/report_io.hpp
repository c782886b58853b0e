#pragma once

#include "json.hpp"
#include "stataction/model.hpp"
#include "stataction/stationary.hpp"

namespace stataction {

/// {p_star, value, residual_gradp, residual_fixedpoint, classification, jacobian_sigma_min,
///  iterations, t, x, ...}
nlohmann::json to_json(const StationaryResult& r);

/// horizon_bound is written as the string "unbounded" when infinite.
nlohmann::json to_json(const AssumptionReport& r);

nlohmann::json to_json(const VerificationReport& r);
nlohmann::json to_json(const HjbReport& r);
nlohmann::json to_json(const SecondOrderReport& r);

/// Reads back the (t, x, p_star) triple of a StationaryResult document.
struct SavedResult {
  double t = 0.0;
  Vec x;
  Vec p_star;
  Classification classification = Classification::Inconclusive;
};

SavedResult saved_result_from_json(const nlohmann::json& doc, int dim);

Classification classification_from_string(const std::string& s);

}  // namespace stataction
