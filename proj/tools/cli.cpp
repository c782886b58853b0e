#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stataction/flow.hpp"
#include "stataction/massspring.hpp"
#include "stataction/problem_io.hpp"
#include "stataction/report_io.hpp"
#include "stataction/stationary.hpp"
#include "stataction/variational.hpp"

namespace stataction::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  auto log = spdlog::get("stataction");
  if (!log) {
    log = spdlog::stderr_logger_st("stataction");
    log->set_pattern("[%l] %v");
  }
  const char* env = std::getenv("STATACTION_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  return log;
}

/// Thrown for anything wrong with the run configuration; mapped to exit 64.
struct UsageError : Error {
  using Error::Error;
};

struct Run {
  json cfg = json::object();
  fs::path base_dir = ".";
  fs::path out_dir = "out";
  std::string format = "csv";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  const json& section(const char* name) const {
    static const json empty = json::object();
    if (!cfg.contains(name)) return empty;
    const json& s = cfg.at(name);
    if (!s.is_object()) throw UsageError(std::string("config section '") + name + "' must be an object");
    return s;
  }
};

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

double positive(const json& j, const char* key, double fallback) {
  const double v = value_or(j, key, fallback);
  if (!(v > 0.0)) throw UsageError(std::string(key) + " must be positive");
  return v;
}

ProblemSpec load_spec(const Run& run) {
  if (run.cfg.contains("problem")) return problem_from_json(run.cfg.at("problem"));
  if (run.cfg.contains("problem_file")) {
    fs::path p = run.cfg.at("problem_file").get<std::string>();
    if (p.is_relative()) p = run.base_dir / p;
    return load_problem(p);
  }
  throw UsageError("config needs 'problem' or 'problem_file'");
}

IntegratorConfig integrator_from(const Run& run) {
  const json& j = run.section("integrator");
  IntegratorConfig cfg;
  const std::string scheme = value_or<std::string>(j, "scheme", "rk4");
  if (scheme == "rk4") {
    cfg.scheme = Scheme::Rk4Fixed;
  } else if (scheme == "dopri") {
    cfg.scheme = Scheme::DopriAdaptive;
  } else {
    throw UsageError("integrator.scheme must be rk4 or dopri");
  }
  cfg.step = value_or(j, "step", 0.0);
  if (cfg.step < 0.0) throw UsageError("integrator.step must be positive");
  cfg.intervals = value_or(j, "intervals", cfg.intervals);
  if (cfg.intervals <= 0) throw UsageError("integrator.intervals must be positive");
  cfg.rtol = positive(j, "rtol", cfg.rtol);
  cfg.atol = positive(j, "atol", cfg.atol);
  cfg.max_steps = value_or(j, "max_steps", cfg.max_steps);
  if (cfg.max_steps <= 0) throw UsageError("integrator.max_steps must be positive");
  return cfg;
}

NewtonConfig newton_from(const Run& run) {
  const json& j = run.section("solve");
  NewtonConfig cfg;
  if (j.contains("tol")) cfg.tol_residual = positive(j, "tol", 1.0);
  cfg.max_iters = value_or(j, "max_iters", cfg.max_iters);
  if (cfg.max_iters <= 0) throw UsageError("solve.max_iters must be positive");
  cfg.fd_step = positive(j, "fd_step", cfg.fd_step);
  cfg.singular_sigma_threshold = positive(j, "singular_threshold", cfg.singular_sigma_threshold);
  cfg.integrator = integrator_from(run);
  return cfg;
}

Vec require_vec(const json& j, const char* key, int dim) {
  if (!j.contains(key)) throw UsageError(std::string("config needs '") + key + "'");
  return vec_from_json(j.at(key), dim, key);
}

std::vector<Vec> random_points(std::mt19937_64& rng, int count, int dim, double radius) {
  std::uniform_real_distribution<double> dist(-radius, radius);
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = dist(rng);
    out.push_back(v);
  }
  return out;
}

std::ofstream open_output(const Run& run, const std::string& name) {
  fs::create_directories(run.out_dir);
  std::ofstream f(run.out_dir / name, std::ios::binary);
  if (!f) throw Error("cannot write " + (run.out_dir / name).string());
  return f;
}

void write_json(const Run& run, const std::string& name, const json& doc) {
  auto f = open_output(run, name);
  f << doc.dump(2) << '\n';
}

std::string format_cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  std::ostringstream s;
  s.precision(17);
  s << v.get<double>();
  return s.str();
}

/// Writes a table as CSV (17 significant digits) or as a JSON array of row objects.
void write_table(const Run& run, const std::string& stem, const std::vector<std::string>& header,
                 const std::vector<std::vector<json>>& rows) {
  if (run.format == "json") {
    json doc = json::array();
    for (const auto& row : rows) {
      json obj = json::object();
      for (std::size_t c = 0; c < header.size(); ++c) obj[header[c]] = row[c];
      doc.push_back(obj);
    }
    write_json(run, stem + ".json", doc);
    return;
  }
  auto f = open_output(run, stem + ".csv");
  for (std::size_t c = 0; c < header.size(); ++c) f << (c ? "," : "") << header[c];
  f << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) f << (c ? "," : "") << format_cell(row[c]);
    f << '\n';
  }
}

void write_trajectory(const Run& run, const ProblemSpec& spec, const PhaseTrajectory& traj) {
  if (run.format == "json") {
    json doc;
    doc["s"] = traj.times;
    json xs = json::array();
    json ps = json::array();
    json H = json::array();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      xs.push_back(vec_to_json(traj.x[k]));
      ps.push_back(vec_to_json(traj.p[k]));
      H.push_back(hamiltonian(spec, traj.x[k], traj.p[k]));
    }
    doc["x"] = xs;
    doc["p"] = ps;
    if (traj.z) doc["z"] = *traj.z;
    doc["H"] = H;
    write_json(run, "trajectory.json", doc);
    return;
  }
  auto f = open_output(run, "trajectory.csv");
  write_trajectory_csv(f, spec, traj);
}

void emit(const Run& run, const json& doc) { *run.out << doc.dump(2) << '\n'; }

// check -----------------------------------------------------------------------

int cmd_check(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const json& j = run.section("check");
  std::vector<Vec> samples;
  if (j.contains("samples")) {
    for (const json& s : j.at("samples")) samples.push_back(vec_from_json(s, spec.dim, "check.samples"));
  } else {
    std::mt19937_64 rng(run.seed);
    samples = random_points(rng, value_or(j, "random_samples", 100), spec.dim, positive(j, "radius", 5.0));
  }
  if (samples.empty()) throw UsageError("check needs at least one sample");
  const AssumptionReport rep = check_assumptions(spec, samples);
  json doc = to_json(rep);
  doc["samples"] = samples.size();
  write_json(run, "check.json", doc);
  emit(run, doc);
  return rep.holds_on_samples ? kOk : kCheckFailed;
}

// flow ------------------------------------------------------------------------

int cmd_flow(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const IntegratorConfig icfg = integrator_from(run);
  const double t = value_or(run.cfg, "t", spec.t0);
  const std::string direction = value_or<std::string>(run.section("flow"), "direction", "forward");

  PhaseTrajectory traj;
  json summary;
  summary["direction"] = direction;
  int code = kOk;
  try {
    if (direction == "forward") {
      const Vec x = require_vec(run.cfg, "x", spec.dim);
      const Vec p = require_vec(run.cfg, "p", spec.dim);
      traj = integrate_cauchy(spec, t, spec.T, x, p, icfg);
    } else if (direction == "backward") {
      const Vec y = require_vec(run.cfg, "y", spec.dim);
      traj = integrate_terminal(spec, t, spec.T, y, icfg);
    } else {
      throw UsageError("flow.direction must be forward or backward");
    }
  } catch (const IntegrationError& e) {
    logger()->error("flow: {}", e.what());
    traj = e.partial();
    summary["error"] = e.what();
    code = kIntegrationFailed;
  }

  write_trajectory(run, spec, traj);
  summary["nodes"] = traj.size();
  if (!traj.empty()) {
    const PhasePoint first = direction == "forward" ? traj.front() : traj.back();
    const double H0 = hamiltonian(spec, first.x, first.p);
    const double drift = energy_drift(spec, traj);
    summary["t_begin"] = traj.t_begin();
    summary["t_end"] = traj.t_end();
    summary["energy"] = H0;
    summary["energy_drift"] = drift;
    summary["relative_drift"] = drift / std::max(1.0, std::abs(H0));
    if (traj.size() >= 3) {
      summary["newton_residual"] = newton_residual(spec, traj);
      summary["action"] = action_along(spec, traj);
    }
    if (traj.z) summary["z_t"] = traj.z->front();
  }
  write_json(run, "flow_summary.json", summary);
  emit(run, summary);
  return code;
}

// solve / tpbvp ---------------------------------------------------------------

std::vector<Vec> seeds_from(const Run& run, int dim) {
  const json& j = run.section("solve");
  std::vector<Vec> seeds;
  if (j.contains("seeds")) {
    for (const json& s : j.at("seeds")) seeds.push_back(vec_from_json(s, dim, "solve.seeds"));
  }
  const int extra = value_or(j, "random_seeds", 0);
  if (extra > 0) {
    std::mt19937_64 rng(run.seed);
    auto more = random_points(rng, extra, dim, positive(j, "seed_radius", 10.0));
    seeds.insert(seeds.end(), more.begin(), more.end());
  }
  if (seeds.empty()) seeds.push_back(Vec::Zero(dim));
  return seeds;
}

int exit_for(Classification c) {
  switch (c) {
    case Classification::Unique: return kOk;
    case Classification::Family: return kFamily;
    default: return kNoSolution;
  }
}

int cmd_solve(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const NewtonConfig ncfg = newton_from(run);
  const double t = value_or(run.cfg, "t", spec.t0);
  const Vec x = require_vec(run.cfg, "x", spec.dim);
  const std::vector<Vec> seeds = seeds_from(run, spec.dim);

  const StationarySet set = stationary_value(spec, t, x, seeds, ncfg, run.jobs);
  json members = json::array();
  for (const auto& m : set.members) {
    members.push_back(json{{"p_star", vec_to_json(m.p_star)},
                           {"value", m.value},
                           {"classification", to_string(m.classification)}});
  }
  json stats{{"seeds", set.seeds},
             {"nonconverged", set.nonconverged},
             {"nonexistent", set.nonexistent},
             {"inconclusive", set.inconclusive},
             {"members", members}};

  const StationaryResult* primary = nullptr;
  for (const auto& m : set.members) {
    if (m.classification == Classification::Unique) {
      primary = &m;
      break;
    }
  }
  if (!primary && !set.members.empty()) primary = &set.members.front();

  json doc;
  int code = kNoSolution;
  if (primary) {
    doc = to_json(*primary);
    code = exit_for(primary->classification);
    write_trajectory(run, spec, primary->trajectory);
  } else {
    doc["t"] = t;
    doc["x"] = vec_to_json(x);
    doc["p_star"] = nullptr;
    doc["classification"] = set.nonexistent > 0 ? "nonexistent" : "empty";
  }
  doc["stationary_set"] = stats;
  logger()->info("solve: {} member(s) from {} seed(s)", set.members.size(), set.seeds);
  write_json(run, "result.json", doc);
  emit(run, doc);
  return code;
}

int cmd_tpbvp(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const NewtonConfig ncfg = newton_from(run);
  const double t = value_or(run.cfg, "t", spec.t0);
  const double T = value_or(run.cfg, "T", spec.T);
  const Vec x = require_vec(run.cfg, "x", spec.dim);
  const Vec p0 = run.cfg.contains("p") ? require_vec(run.cfg, "p", spec.dim) : seeds_from(run, spec.dim).front();

  json doc;
  int code = kOk;
  try {
    const StationaryResult r = solve_tpbvp_shooting(spec, t, T, x, p0, ncfg);
    doc = to_json(r);
    code = exit_for(r.classification);
    ProblemSpec local = spec;
    local.T = T;
    write_trajectory(run, local, r.trajectory);
  } catch (const NonConvergence& e) {
    logger()->warn("tpbvp: {}", e.what());
    doc = to_json(e.best());
    doc["classification"] = "nonconvergent";
    doc["error"] = e.what();
    code = kNoSolution;
  }
  write_json(run, "result.json", doc);
  emit(run, doc);
  return code;
}

// verify ----------------------------------------------------------------------

int cmd_verify(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const IntegratorConfig icfg = integrator_from(run);
  const json& j = run.section("verify");
  fs::path result_path = run.out_dir / "result.json";
  if (j.contains("result")) {
    result_path = j.at("result").get<std::string>();
    if (result_path.is_relative()) result_path = run.base_dir / result_path;
  }
  if (!fs::exists(result_path)) {
    *run.err << "verify: missing solve artifact " << result_path.string() << '\n';
    return kMissingInput;
  }
  json saved_doc;
  {
    std::ifstream in(result_path);
    try {
      in >> saved_doc;
    } catch (const json::exception& e) {
      throw UsageError(std::string("verify: unreadable result: ") + e.what());
    }
  }
  if (!saved_doc.contains("p_star") || saved_doc.at("p_star").is_null()) {
    json doc{{"passed", false}, {"reason", "result holds no stationary momentum"}};
    write_json(run, "verify.json", doc);
    emit(run, doc);
    return kCheckFailed;
  }
  const SavedResult saved = saved_result_from_json(saved_doc, spec.dim);
  const double perturb = value_or(j, "perturb", 0.0);
  const Vec p = saved.p_star + Vec::Constant(spec.dim, perturb);
  const StationaryResult res = evaluate_momentum(spec, saved.t, saved.x, p, icfg);
  if (res.trajectory.size() < 5) throw UsageError("verify: horizon too short for the checks");

  const double stat_tol = positive(j, "tol", 1e-6);
  const auto samples = interior_samples(saved.t, spec.T, value_or(j, "samples", 10));
  const VerificationReport vrep = verify_stationarity(spec, res, samples, stat_tol, icfg);

  const double hjb_tol = positive(j, "hjb_tol", 1e-4);
  const auto hjb_samples = interior_samples(saved.t, spec.T, value_or(j, "hjb_samples", 5));
  const HjbReport hrep = hjb_residual(spec, saved.t, saved.x, p, hjb_samples, positive(j, "hjb_step", 1e-4), icfg);

  const double H0 = hamiltonian(spec, saved.x, p);
  const double drift = energy_drift(spec, res.trajectory);
  const double drift_rel = drift / std::max(1.0, std::abs(H0));
  const double drift_tol = positive(j, "energy_tol", 1e-8);

  const AdjointTrajectory adj = integrate_fvp(spec, res.trajectory);
  const SecondOrderReport srep = second_order_check(spec, res.trajectory, adj);
  const double so_tol = positive(j, "second_order_tol", 1e-4);

  json doc;
  doc["p"] = vec_to_json(p);
  doc["stationarity"] = to_json(vrep);
  json h = to_json(hrep);
  h["tol"] = hjb_tol;
  h["passed"] = hrep.max() <= hjb_tol;
  doc["hjb"] = h;
  doc["energy"] = json{{"drift", drift}, {"relative", drift_rel}, {"tol", drift_tol}, {"passed", drift_rel <= drift_tol}};
  json so = to_json(srep);
  so["tol"] = so_tol;
  so["passed"] = srep.max() <= so_tol;
  doc["second_order"] = so;
  const bool passed = vrep.passed && h["passed"].get<bool>() && doc["energy"]["passed"].get<bool>() &&
                      so["passed"].get<bool>();
  doc["passed"] = passed;
  write_json(run, "verify.json", doc);
  emit(run, doc);
  return passed ? kOk : kCheckFailed;
}

// oracle ----------------------------------------------------------------------

Classification expected_for(massspring::CaseKind k) {
  switch (k) {
    case massspring::CaseKind::Generic:
    case massspring::CaseKind::Period: return Classification::Unique;
    case massspring::CaseKind::QuarterFamily: return Classification::Family;
    case massspring::CaseKind::QuarterNonexistent: return Classification::Nonexistent;
  }
  return Classification::Inconclusive;
}

int cmd_oracle(const Run& run) {
  const json& j = run.section("oracle");
  massspring::MassSpringParams params;
  params.mass = positive(j, "mass", 5.0);
  params.kappa = positive(j, "stiffness", 1.0);
  params.v = value_or(j, "v", -2.0);
  const double x = value_or(j, "x", 1.0);
  const int phases = value_or(j, "phases", 50);
  const double pi = std::numbers::pi;
  const double lo = value_or(j, "phase_min", 0.05);
  const double hi = value_or(j, "phase_max", 3.0 * pi);
  const double exclude = positive(j, "exclude", 1e-3);
  const double tol = positive(j, "tol", 1e-6);
  const bool degenerate = value_or(j, "degenerate", true);
  NewtonConfig ncfg = newton_from(run);
  const double w = params.omega();

  struct Case {
    double phase;
    double x;
  };
  std::vector<Case> cases;
  for (int k = 0; k < phases; ++k) {
    const double th = phases > 1 ? lo + (hi - lo) * k / (phases - 1) : lo;
    const double q = th / (0.5 * pi);
    if (std::abs(th - std::round(q) * 0.5 * pi) < exclude) continue;
    cases.push_back({th, x});
  }
  std::size_t sweep_rows = cases.size();
  if (degenerate) {
    for (double th : {0.5 * pi, pi, 1.5 * pi, 2.0 * pi, 3.5 * pi}) {
      const long n = std::lround(th / pi - 0.5);
      const double ray = ((n + 1) % 2 == 0 ? 1.0 : -1.0) * params.v / w;
      cases.push_back({th, x});
      cases.push_back({th, ray});
    }
  }

  std::vector<std::vector<json>> rows;
  double max_diff = 0.0;
  double max_value_diff = 0.0;
  bool all_agree = true;
  for (const Case& c : cases) {
    massspring::MassSpringParams local = params;
    local.T = c.phase / w;
    const ProblemSpec spec = massspring::make_problem(local);
    const massspring::CaseLabel label = massspring::classify_pbar(local, 0.0, c.x, 1e-6);
    Vec xv = Vec::Constant(1, c.x);
    std::optional<StationaryResult> r;
    std::string numeric_class = "nonconvergent";
    try {
      r = solve_argstat_p(spec, 0.0, xv, Vec::Zero(1), ncfg);
      numeric_class = to_string(r->classification);
    } catch (const NonConvergence& e) {
      logger()->warn("oracle: phase {}: {}", c.phase, e.what());
    }
    const Classification want = expected_for(label.kind);
    bool agree = r && r->classification == want;
    json numeric_p = nullptr;
    json oracle_p = label.p_bar ? json(*label.p_bar) : json(nullptr);
    json diff = nullptr;
    json value = nullptr;
    json w_tilde = nullptr;
    if (r && r->classification == Classification::Unique) {
      numeric_p = r->p_star(0);
      value = r->value;
      const double W = massspring::W_tilde(local, 0.0, c.x, r->p_star(0));
      w_tilde = W;
      max_value_diff = std::max(max_value_diff, std::abs(r->value - W) / std::max(1.0, std::abs(W)));
      if (label.p_bar) {
        const double d = std::abs(r->p_star(0) - *label.p_bar);
        diff = d;
        const double rel = d / std::max(1.0, std::abs(*label.p_bar));
        max_diff = std::max(max_diff, rel);
        agree = agree && rel <= tol;
      }
    } else if (r) {
      numeric_p = r->p_star(0);
    }
    all_agree = all_agree && agree;
    rows.push_back({c.phase, c.x, numeric_p, oracle_p, diff, numeric_class,
                    massspring::to_string(label.kind), agree, value, w_tilde});
  }
  write_table(run, "oracle",
              {"phase", "x", "numeric_p", "oracle_p", "abs_diff", "numeric_class", "oracle_class", "agree",
               "value", "w_tilde"},
              rows);
  json summary{{"rows", rows.size()},
               {"sweep_rows", sweep_rows},
               {"max_rel_diff", max_diff},
               {"max_value_rel_diff", max_value_diff},
               {"tol", tol},
               {"passed", all_agree && max_value_diff <= tol}};
  write_json(run, "oracle_summary.json", summary);
  emit(run, summary);
  return summary["passed"].get<bool>() ? kOk : kCheckFailed;
}

// gradcheck -------------------------------------------------------------------

int cmd_gradcheck(const Run& run) {
  const ProblemSpec spec = load_spec(run);
  const IntegratorConfig icfg = integrator_from(run);
  const json& j = run.section("gradcheck");
  const double path_tol = positive(j, "path_tol", 1e-8);
  const double fd_tol = positive(j, "fd_tol", 1e-6);

  struct Point {
    double t;
    Vec x;
    Vec p;
  };
  std::vector<Point> points;
  if (j.contains("points")) {
    for (const json& pt : j.at("points")) {
      points.push_back({value_or(pt, "t", spec.t0), require_vec(pt, "x", spec.dim), require_vec(pt, "p", spec.dim)});
    }
  } else {
    std::mt19937_64 rng(run.seed);
    const int count = value_or(j, "random_points", 10);
    const double radius = positive(j, "radius", 2.0);
    std::uniform_real_distribution<double> frac(0.0, 0.9);
    for (int k = 0; k < count; ++k) {
      const double t = spec.t0 + frac(rng) * (spec.T - spec.t0);
      auto xp = random_points(rng, 2, spec.dim, radius);
      points.push_back({t, xp[0], xp[1]});
    }
  }
  if (points.empty()) throw UsageError("gradcheck needs at least one point");

  std::vector<std::vector<json>> rows;
  bool passed = true;
  double worst_path = 0.0;
  double worst_fd = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Point& pt = points[k];
    const CostGradient ga = cost_gradient(spec, pt.t, pt.x, pt.p, icfg, GradientPath::Adjoint);
    const CostGradient gt = cost_gradient(spec, pt.t, pt.x, pt.p, icfg, GradientPath::Tangent);
    const double path = std::max((ga.grad_x - gt.grad_x).lpNorm<Eigen::Infinity>(),
                                 (ga.grad_p - gt.grad_p).lpNorm<Eigen::Infinity>());
    const double h = 1e-5 * (1.0 + pt.p.norm());
    double fd_rel = 0.0;
    for (int block = 0; block < 2; ++block) {
      for (int i = 0; i < spec.dim; ++i) {
        Vec xp = pt.x, xm = pt.x, pp = pt.p, pm = pt.p;
        if (block == 0) {
          xp(i) += h;
          xm(i) -= h;
        } else {
          pp(i) += h;
          pm(i) -= h;
        }
        const double fd = (cost_value(spec, pt.t, xp, pp, icfg) - cost_value(spec, pt.t, xm, pm, icfg)) / (2.0 * h);
        const double g = block == 0 ? ga.grad_x(i) : ga.grad_p(i);
        fd_rel = std::max(fd_rel, std::abs(g - fd) / std::max(1.0, std::abs(fd)));
      }
    }
    const bool ok = path <= path_tol && fd_rel <= fd_tol;
    passed = passed && ok;
    worst_path = std::max(worst_path, path);
    worst_fd = std::max(worst_fd, fd_rel);
    rows.push_back({static_cast<long long>(k), pt.t, path, fd_rel, ok});
  }
  write_table(run, "gradcheck", {"index", "t", "path_diff", "fd_rel_error", "passed"}, rows);
  json summary{{"points", points.size()},
               {"max_path_diff", worst_path},
               {"max_fd_rel_error", worst_fd},
               {"path_tol", path_tol},
               {"fd_tol", fd_tol},
               {"passed", passed}};
  write_json(run, "gradcheck_summary.json", summary);
  emit(run, summary);
  return passed ? kOk : kCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stationary-action trajectories of conservative mechanical systems"};
  app.require_subcommand(1);
  Run run;
  run.out = &out;
  run.err = &err;
  std::string config_path;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", run.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", run.seed, "seed for generated samples");
  app.add_option("--jobs", run.jobs, "parallel seed workers")->check(CLI::PositiveNumber);

  using Handler = int (*)(const Run&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"check", {"estimate the standing bounds and the convexity horizon", cmd_check}},
      {"flow", {"integrate the characteristic system", cmd_flow}},
      {"solve", {"multi-seed stationary momentum solve", cmd_solve}},
      {"tpbvp", {"shooting solve of the boundary value problem", cmd_tpbvp}},
      {"verify", {"check a solved result against the stationarity conditions", cmd_verify}},
      {"oracle", {"compare numeric solves with the mass-spring closed form", cmd_oracle}},
      {"gradcheck", {"compare adjoint, tangent and finite-difference gradients", cmd_gradcheck}},
  };
  for (const auto& [name, info] : commands) app.add_subcommand(name, info.first)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kConfigError;
  }

  Handler handler = nullptr;
  std::string name;
  for (const auto& [cmd, info] : commands) {
    if (app.got_subcommand(cmd)) {
      handler = info.second;
      name = cmd;
    }
  }
  run.out_dir = out_dir;
  auto log = logger();

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config " + config_path);
      try {
        in >> run.cfg;
      } catch (const json::exception& e) {
        throw UsageError(std::string("malformed config: ") + e.what());
      }
      if (!run.cfg.is_object()) throw UsageError("config must be a JSON object");
      run.base_dir = fs::path(config_path).parent_path();
      if (run.base_dir.empty()) run.base_dir = ".";
    } else if (name != "oracle") {
      throw UsageError(name + " requires --config");
    }
    log->debug("{}: out={} format={} seed={} jobs={}", name, run.out_dir.string(), run.format, run.seed, run.jobs);
    return handler(run);
  } catch (const UsageError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidInertia& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IntegrationError& e) {
    err << "integration error: " << e.what() << '\n';
    return kIntegrationFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace stataction::cli
