#include "stataction/problem_io.hpp"

#include <fstream>
#include <string>

namespace stataction {

using nlohmann::json;

namespace {

Mat square_from_json(const json& j, int dim, const char* what) {
  // scalar → multiple of identity, flat array → diagonal, nested array → full matrix
  if (j.is_number()) return j.get<double>() * Mat::Identity(dim, dim);
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected number or array");
  if (!j.empty() && j.front().is_array()) {
    if (static_cast<int>(j.size()) != dim) throw ConfigError(std::string(what) + ": wrong row count");
    Mat m(dim, dim);
    for (int r = 0; r < dim; ++r) {
      const auto& row = j[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != dim) {
        throw ConfigError(std::string(what) + ": wrong column count");
      }
      for (int c = 0; c < dim; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
  }
  return Mat(vec_from_json(j, dim, what).asDiagonal());
}

InertiaOperator inertia_from_json(const json& j, int dim) {
  if (j.is_number() || j.is_array()) return InertiaOperator(square_from_json(j, dim, "inertia"));
  if (!j.is_object()) throw ConfigError("inertia: expected object");
  if (j.contains("matrix")) return InertiaOperator(square_from_json(j.at("matrix"), dim, "inertia.matrix"));
  if (j.contains("diag")) return InertiaOperator::diagonal(vec_from_json(j.at("diag"), dim, "inertia.diag"));
  if (j.contains("scalar")) return InertiaOperator::scalar(dim, j.at("scalar").get<double>());
  throw ConfigError("inertia: expected one of matrix, diag, scalar");
}

PotentialField potential_from_json(const json& j, int dim) {
  const auto kind = j.at("kind").get<std::string>();
  const json params = j.value("params", json::object());
  PotentialField field;
  if (kind == "zero") {
    field = potentials::zero(dim);
  } else if (kind == "quadratic") {
    field = potentials::quadratic(square_from_json(params.at("stiffness"), dim, "potential.stiffness"));
  } else if (kind == "double_well") {
    field = potentials::double_well(dim, params.at("a").get<double>(), params.at("b").get<double>());
  } else if (kind == "pendulum") {
    field = potentials::pendulum(dim, params.at("kappa").get<double>());
  } else if (kind == "polynomial") {
    field = potentials::polynomial(dim, params.at("coefficients").get<std::vector<double>>());
  } else {
    throw ConfigError("unknown potential kind '" + kind + "'");
  }
  if (params.contains("K")) field.hessian_bound_K = params.at("K").get<double>();
  return field;
}

TerminalCost terminal_from_json(const json& j, int dim, const InertiaOperator& inertia) {
  const auto kind = j.at("kind").get<std::string>();
  const json params = j.value("params", json::object());
  if (kind == "zero") return terminals::zero(dim);
  if (kind == "linear") return terminals::linear(vec_from_json(params.at("c"), dim, "terminal.c"));
  if (kind == "quadratic") {
    const Vec c = params.contains("c") ? vec_from_json(params.at("c"), dim, "terminal.c") : Vec(Vec::Zero(dim));
    return terminals::quadratic(square_from_json(params.at("Q"), dim, "terminal.Q"), c);
  }
  if (kind == "velocity") {
    TerminalCost t = terminals::linear(-(inertia.matrix() * vec_from_json(params.at("v"), dim, "terminal.v")));
    t.kind = "velocity";
    return t;
  }
  throw ConfigError("unknown terminal kind '" + kind + "'");
}

}  // namespace

Vec vec_from_json(const json& j, int dim, const char* what) {
  if (j.is_number() && dim == 1) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(std::string(what) + ": expected array of length " + std::to_string(dim));
  }
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ProblemSpec problem_from_json(const json& doc) {
  try {
    const int dim = doc.at("dim").get<int>();
    if (dim <= 0) throw ConfigError("dim must be positive");
    InertiaOperator inertia = inertia_from_json(doc.at("inertia"), dim);
    ProblemSpec spec{dim,
                     potential_from_json(doc.at("potential"), dim),
                     inertia,
                     terminal_from_json(doc.at("terminal"), dim, inertia),
                     doc.value("t0", 0.0),
                     doc.at("T").get<double>()};
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem definition: ") + e.what());
  }
}

ProblemSpec load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("problem file " + path.string() + ": " + e.what());
  }
  return problem_from_json(doc);
}

}  // namespace stataction
