#include "stataction/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "stataction/quadrature.hpp"

namespace stataction {

namespace {

void require_control(const ProblemSpec& spec, double t, const ControlGrid& u) {
  if (u.times.size() != u.u.size()) throw GridMismatch("control grid: node and sample counts differ");
  if (u.times.size() < 3) throw GridTooCoarse("control grid needs at least 3 nodes");
  const double tol = 1e-9 * std::max({1.0, std::abs(t), std::abs(spec.T)});
  if (std::abs(u.times.front() - t) > tol || std::abs(u.times.back() - spec.T) > tol) {
    throw GridMismatch("control grid does not span [t, T]");
  }
  for (std::size_t i = 1; i < u.times.size(); ++i) {
    if (!(u.times[i] > u.times[i - 1])) throw GridMismatch("control grid is not strictly increasing");
  }
  for (const Vec& ui : u.u) require_dim(ui, spec.dim, "control sample");
}

struct SvdSummary {
  Vec singular;
  Mat V;
  Mat U;
  double threshold = 0.0;
  int rank = 0;
  double sigma_min = 0.0;
};

SvdSummary analyse(const Mat& J, double rel_threshold) {
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdSummary s;
  s.singular = svd.singularValues();
  s.U = svd.matrixU();
  s.V = svd.matrixV();
  const double top = s.singular.size() > 0 ? s.singular(0) : 0.0;
  s.threshold = rel_threshold * std::max(top, 1.0);
  for (Eigen::Index i = 0; i < s.singular.size(); ++i) {
    if (s.singular(i) > s.threshold) ++s.rank;
  }
  // A tall Jacobian has min(rows, cols) singular values; a wide one has implicit zeros.
  s.sigma_min = J.cols() > J.rows() ? 0.0 : (s.singular.size() > 0 ? s.singular.minCoeff() : 0.0);
  return s;
}

/// Truncated pseudo-inverse step −J⁺F.
Vec pseudo_step(const SvdSummary& s, const Vec& F) {
  Vec step = Vec::Zero(s.V.rows());
  for (int i = 0; i < s.rank; ++i) step -= s.V.col(i) * (s.U.col(i).dot(F) / s.singular(i));
  return step;
}

Mat null_basis(const SvdSummary& s) {
  const auto cols = s.V.rows();
  Mat basis(cols, cols - s.rank);
  for (Eigen::Index i = s.rank; i < cols; ++i) basis.col(i - s.rank) = s.V.col(i);
  return basis;
}

template <class F>
Mat fd_jacobian(F&& residual, const Vec& p, std::size_t rows, double rel_step) {
  Mat J(static_cast<Eigen::Index>(rows), p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(p(j)));
    Vec plus = p;
    Vec minus = p;
    plus(j) += h;
    minus(j) -= h;
    J.col(j) = (residual(plus) - residual(minus)) / (2.0 * h);
  }
  return J;
}

struct LineSearch {
  bool accepted = false;
  Vec p;
  Vec F;
};

template <class F>
LineSearch armijo(F&& residual, const Vec& p, const Vec& Fp, const Vec& step, const Mat& J,
                  const NewtonConfig& cfg) {
  const double phi = 0.5 * Fp.squaredNorm();
  const double slope = (J.transpose() * Fp).dot(step);
  LineSearch out;
  if (!(slope < 0.0)) return out;
  double alpha = 1.0;
  for (int k = 0; k <= cfg.max_backtracks; ++k) {
    Vec trial = p + alpha * step;
    Vec Ft = residual(trial);
    if (Ft.allFinite() && 0.5 * Ft.squaredNorm() <= phi + cfg.armijo_c * alpha * slope) {
      out.accepted = true;
      out.p = std::move(trial);
      out.F = std::move(Ft);
      return out;
    }
    alpha *= cfg.armijo_shrink;
  }
  return out;
}

/// Family validation: the residual stays below tol at p ± 0.1·b for every basis vector b.
template <class F>
bool validate_family(F&& residual, const Vec& p, const Mat& basis, double tol) {
  for (Eigen::Index i = 0; i < basis.cols(); ++i) {
    for (double sign : {1.0, -1.0}) {
      if (residual(Vec(p + sign * 0.1 * basis.col(i))).norm() > tol) return false;
    }
  }
  return true;
}

double family_spread(const ProblemSpec& spec, double t, const Vec& x, const Vec& p, const Mat& basis,
                     const IntegratorConfig& cfg) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const double scale = std::max(1.0, p.norm());
  for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    Vec q = p;
    for (Eigen::Index i = 0; i < basis.cols(); ++i) q += c * scale * basis.col(i);
    const double v = cost_value(spec, t, x, q, cfg);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

StationaryResult fill_result(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                             const IntegratorConfig& cfg) {
  StationaryResult r;
  r.t = t;
  r.x = x;
  r.p_star = p;
  r.trajectory = integrate_cauchy(spec, t, spec.T, x, p, cfg);
  if (r.trajectory.size() >= 3) {
    const AdjointTrajectory adj = integrate_fvp(spec, r.trajectory);
    r.residual_gradp = adj.xi.front().norm();
    r.residual_fixedpoint = adj.pi.front().norm();
    r.value = action_along(spec, r.trajectory);
  } else {
    r.residual_gradp = 0.0;
    r.residual_fixedpoint = (p - spec.terminal.gradient(x)).norm();
    r.value = spec.terminal.value(x);
  }
  return r;
}

}  // namespace

std::vector<Vec> state_from_control(double /*t*/, const Vec& x, const ControlGrid& u) {
  std::vector<Vec> xs = cumulative_integral(u.times, u.u);
  for (Vec& xi : xs) xi += x;
  return xs;
}

double cost_J(const ProblemSpec& spec, double t, const Vec& x, const ControlGrid& u) {
  require_control(spec, t, u);
  require_dim(x, spec.dim, "cost_J x");
  const std::vector<Vec> xs = state_from_control(t, x, u);
  std::vector<double> lagrangian(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lagrangian[i] = 0.5 * u.u[i].dot(spec.inertia.matrix() * u.u[i]) - spec.potential.value(xs[i]);
  }
  return simpson(u.times, lagrangian) + spec.terminal.value(xs.back());
}

ControlGrid grad_u_residual(const ProblemSpec& spec, double t, const Vec& x, const ControlGrid& u) {
  require_control(spec, t, u);
  require_dim(x, spec.dim, "grad_u_residual x");
  const std::vector<Vec> xs = state_from_control(t, x, u);
  std::vector<Vec> force(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) force[i] = spec.potential.gradient(xs[i]);
  const std::vector<Vec> F = cumulative_integral(u.times, force);
  const Vec pT = spec.terminal.gradient(xs.back());
  ControlGrid r;
  r.times = u.times;
  r.u.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Vec p_bar = pT - (F.back() - F[i]);
    r.u.push_back(spec.inertia.matrix() * u.u[i] + p_bar);
  }
  return r;
}

ControlGrid induced_control(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  ControlGrid u;
  u.times = traj.times;
  u.u.reserve(traj.size());
  for (const Vec& p : traj.p) u.u.push_back(-spec.inertia.apply_inverse(p));
  return u;
}

double control_norm_sq(const ControlGrid& u) {
  std::vector<double> sq(u.u.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = u.u[i].squaredNorm();
  return simpson(u.times, sq);
}

double NewtonConfig::tolerance_for(const Vec& p0) const {
  return tol_residual ? *tol_residual : 1e-9 * (1.0 + p0.norm());
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::Unique: return "unique";
    case Classification::Family: return "family";
    case Classification::Nonexistent: return "nonexistent";
    case Classification::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

Vec stationarity_residual(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                          const IntegratorConfig& cfg) {
  const int n = spec.dim;
  const PhaseTrajectory traj = integrate_cauchy(spec, t, spec.T, x, p, cfg);
  Vec R(2 * n);
  if (traj.size() < 3) {
    R.head(n).setZero();
    R.tail(n) = p - spec.terminal.gradient(x);
    return R;
  }
  const AdjointTrajectory adj = integrate_fvp(spec, traj);
  R.head(n) = adj.xi.front();
  R.tail(n) = adj.pi.front();
  return R;
}

StationaryResult evaluate_momentum(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                                   const IntegratorConfig& cfg) {
  require_dim(x, spec.dim, "x");
  require_dim(p, spec.dim, "p");
  return fill_result(spec, t, x, p, cfg);
}

StationaryResult solve_argstat_p(const ProblemSpec& spec, double t, const Vec& x, const Vec& p0,
                                 const NewtonConfig& cfg) {
  require_dim(x, spec.dim, "x");
  require_dim(p0, spec.dim, "p0");
  const double tol = cfg.tolerance_for(p0);
  const auto rows = static_cast<std::size_t>(2 * spec.dim);
  auto residual = [&](const Vec& p) { return stationarity_residual(spec, t, x, p, cfg.integrator); };

  Vec p = p0;
  Vec F = residual(p);
  Vec best_p = p;
  double best_norm = F.norm();
  int iter = 0;
  bool converged = F.norm() <= tol;
  bool stalled = false;
  SvdSummary last;
  double ls_residual = F.norm();

  while (!converged && !stalled) {
    if (iter >= cfg.max_iters) {
      StationaryResult best = fill_result(spec, t, x, best_p, cfg.integrator);
      best.iterations = iter;
      best.tolerance = tol;
      throw NonConvergence("argstat: no convergence after " + std::to_string(iter) + " iterations",
                           std::move(best));
    }
    ++iter;
    const Mat J = fd_jacobian(residual, p, rows, cfg.fd_step);
    last = analyse(J, cfg.singular_sigma_threshold);
    const Vec step = pseudo_step(last, F);
    ls_residual = (F + J * step).norm();
    if (step.norm() <= 1e-14 * (1.0 + p.norm())) {
      stalled = true;
      break;
    }
    const LineSearch ls = armijo(residual, p, F, step, J, cfg);
    if (!ls.accepted) {
      stalled = true;
      break;
    }
    p = ls.p;
    F = ls.F;
    if (F.norm() < best_norm) {
      best_norm = F.norm();
      best_p = p;
    }
    converged = F.norm() <= tol;
  }

  StationaryResult r = fill_result(spec, t, x, converged ? p : best_p, cfg.integrator);
  r.iterations = iter;
  r.tolerance = tol;
  r.converged = converged;
  const SvdSummary at_solution =
      analyse(fd_jacobian(residual, r.p_star, rows, cfg.fd_step), cfg.singular_sigma_threshold);
  r.jacobian_sigma_min = at_solution.sigma_min;
  const bool rank_deficient = at_solution.rank < spec.dim;

  if (converged) {
    if (!rank_deficient) {
      r.classification = Classification::Unique;
    } else {
      const Mat basis = null_basis(at_solution);
      if (validate_family(residual, r.p_star, basis, tol)) {
        r.classification = Classification::Family;
        r.family_dim = static_cast<int>(basis.cols());
        r.family_basis = basis;
        r.family_value_spread = family_spread(spec, t, x, r.p_star, basis, cfg.integrator);
      } else {
        r.classification = Classification::Inconclusive;
      }
    }
  } else {
    const bool inconsistent = ls_residual > tol;
    r.classification = (rank_deficient && inconsistent) ? Classification::Nonexistent
                                                        : Classification::Inconclusive;
  }
  return r;
}

StationaryResult solve_tpbvp_shooting(const ProblemSpec& spec, double t, double T, const Vec& x,
                                      const Vec& p0, const NewtonConfig& cfg) {
  require_dim(x, spec.dim, "x");
  require_dim(p0, spec.dim, "p0");
  ProblemSpec local = spec;
  local.T = T;
  local.validate();
  const int n = spec.dim;
  const double tol = cfg.tolerance_for(p0);

  auto shooting = [&](const Vec& p) -> Vec {
    const PhaseTrajectory traj = integrate_cauchy(local, t, T, x, p, cfg.integrator);
    return traj.p.back() - local.terminal.gradient(traj.x.back());
  };
  auto jacobian = [&](const Vec& p) -> Mat {
    const PhaseTrajectory traj = integrate_cauchy(local, t, T, x, p, cfg.integrator);
    if (traj.size() < 2) return Mat::Identity(n, n);
    const TangentFlow flow = propagate_tangent(local, traj);
    const Mat& U = flow.U.back();
    return U.bottomRightCorner(n, n) - local.terminal.hessian(traj.x.back()) * U.topRightCorner(n, n);
  };
  auto diagnostics = [&](StationaryResult& r) {
    if (r.trajectory.size() >= 2) {
      const FamilyBlocks fb = adjoint_family_blocks(local, r.trajectory);
      r.u21_sigma_min = fb.sigma_min;
      r.u21_condition = fb.condition;
    }
  };

  Vec p = p0;
  Vec G = shooting(p);
  int iter = 0;
  while (G.norm() > tol) {
    if (iter >= cfg.max_iters) {
      StationaryResult best = fill_result(local, t, x, p, cfg.integrator);
      best.iterations = iter;
      best.tolerance = tol;
      diagnostics(best);
      throw NonConvergence("tpbvp: no convergence after " + std::to_string(iter) + " iterations",
                           std::move(best));
    }
    ++iter;
    const Mat J = jacobian(p);
    const SvdSummary s = analyse(J, cfg.singular_sigma_threshold);
    if (s.rank < n) {
      StationaryResult best = fill_result(local, t, x, p, cfg.integrator);
      best.iterations = iter;
      best.tolerance = tol;
      best.jacobian_sigma_min = s.sigma_min;
      diagnostics(best);
      throw NonConvergence("tpbvp: singular shooting Jacobian (sigma_min " + std::to_string(s.sigma_min) +
                               ") with nonzero terminal residual",
                           std::move(best));
    }
    const Vec step = pseudo_step(s, G);
    const LineSearch ls = armijo(shooting, p, G, step, J, cfg);
    if (!ls.accepted) {
      StationaryResult best = fill_result(local, t, x, p, cfg.integrator);
      best.iterations = iter;
      best.tolerance = tol;
      best.jacobian_sigma_min = s.sigma_min;
      diagnostics(best);
      throw NonConvergence("tpbvp: line search failed", std::move(best));
    }
    p = ls.p;
    G = ls.F;
  }

  StationaryResult r = fill_result(local, t, x, p, cfg.integrator);
  r.iterations = iter;
  r.tolerance = tol;
  r.converged = true;
  r.tpbvp_solved = true;
  const SvdSummary s = analyse(jacobian(p), cfg.singular_sigma_threshold);
  r.jacobian_sigma_min = s.sigma_min;
  if (s.rank == n) {
    r.classification = Classification::Unique;
  } else {
    const Mat basis = null_basis(s);
    if (validate_family(shooting, p, basis, tol)) {
      r.classification = Classification::Family;
      r.family_dim = static_cast<int>(basis.cols());
      r.family_basis = basis;
    }
  }
  diagnostics(r);
  return r;
}

VerificationReport verify_stationarity(const ProblemSpec& spec, const StationaryResult& result,
                                       std::span<const double> sample_times, double tol,
                                       const IntegratorConfig& cfg) {
  VerificationReport rep;
  rep.tol = tol;
  const PhaseTrajectory& traj = result.trajectory;
  std::vector<double> times{result.t};
  times.insert(times.end(), sample_times.begin(), sample_times.end());
  for (double s : times) {
    const PhasePoint X = traj.at(s);
    double gp = 0.0;
    double fp = 0.0;
    if (spec.T - s > 0.0) {
      const CostGradient g = cost_gradient(spec, s, X.x, X.p, cfg);
      gp = g.grad_p.norm();
      fp = (X.p - g.grad_x).norm();
    } else {
      fp = (X.p - spec.terminal.gradient(X.x)).norm();
    }
    rep.sample_times.push_back(s);
    rep.gradp.push_back(gp);
    rep.fixedpoint.push_back(fp);
    rep.max_gradp = std::max(rep.max_gradp, gp);
    rep.max_fixedpoint = std::max(rep.max_fixedpoint, fp);
  }
  rep.passed = rep.max_gradp <= tol && rep.max_fixedpoint <= tol;
  return rep;
}

std::vector<double> interior_samples(double t, double T, int k) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(k, 0)));
  for (int i = 1; i <= k; ++i) out.push_back(t + (T - t) * i / (k + 1));
  return out;
}

HjbReport hjb_residual(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                       std::span<const double> sample_times, double fd_step, const IntegratorConfig& cfg) {
  if (!(t < spec.T)) throw Error("hjb_residual requires t < T");
  if (sample_times.empty()) throw GridTooCoarse("hjb_residual needs at least one sample time");
  const PhaseTrajectory traj = integrate_cauchy(spec, t, spec.T, x, p, cfg);
  HjbReport rep;
  for (double s : sample_times) {
    if (s - fd_step < t || s + fd_step > spec.T) {
      throw GridTooCoarse("hjb_residual: sample too close to the horizon ends for the stencil");
    }
    const PhasePoint Xs = traj.at(s);
    const PhasePoint Xm = traj.at(s - fd_step);
    const PhasePoint Xp = traj.at(s + fd_step);

    const double along = (cost_value(spec, s + fd_step, Xp.x, Xp.p, cfg) -
                          cost_value(spec, s - fd_step, Xm.x, Xm.p, cfg)) /
                         (2.0 * fd_step);
    rep.along_flow = std::max(rep.along_flow, std::abs(along + running_cost(spec, Xs.x, Xs.p)));

    const double dt = (cost_value(spec, s + fd_step, Xs.x, Xs.p, cfg) -
                       cost_value(spec, s - fd_step, Xs.x, Xs.p, cfg)) /
                      (2.0 * fd_step);
    const CostGradient g = cost_gradient(spec, s, Xs.x, Xs.p, cfg);
    const double hbar = extended_hamiltonian(spec, Xs.x, Xs.p, g.grad_x, g.grad_p);
    rep.pde = std::max(rep.pde, std::abs(-dt + hbar));
  }
  return rep;
}

ConvexityReport convexity_certificate(const ProblemSpec& spec, double t, const Vec& x,
                                      const ControlGrid& u, std::span<const ControlGrid> directions) {
  require_control(spec, t, u);
  ConvexityReport rep;
  rep.m = spec.inertia.coercivity();
  rep.horizon = spec.T - t;

  const std::vector<Vec> xs = state_from_control(t, x, u);
  double sampled = 0.0;
  for (const Vec& xi : xs) {
    sampled = std::max({sampled, spectral_norm(spec.potential.hessian(xi)),
                        spectral_norm(spec.terminal.hessian(xi))});
  }
  rep.K = std::max(2.0 * sampled, spec.potential.hessian_bound_K.value_or(0.0));
  rep.coefficient = rep.m - rep.K * std::max(rep.horizon, 1.0) * rep.horizon;
  rep.bound_applicable = rep.coefficient > 0.0;

  const double base = cost_J(spec, t, x, u);
  for (const ControlGrid& d : directions) {
    if (d.times.size() != u.times.size() || d.u.size() != u.u.size()) {
      throw GridMismatch("convexity direction is not on the control grid");
    }
    double sup = 0.0;
    for (const Vec& di : d.u) sup = std::max(sup, di.lpNorm<Eigen::Infinity>());
    DirectionCheck c;
    c.norm_sq = control_norm_sq(d);
    if (sup == 0.0) {
      c.passed = true;
      rep.directions.push_back(c);
      continue;
    }
    const double eps = 1e-3 / sup;
    ControlGrid plus = u;
    ControlGrid minus = u;
    for (std::size_t i = 0; i < u.u.size(); ++i) {
      plus.u[i] += eps * d.u[i];
      minus.u[i] -= eps * d.u[i];
    }
    c.quadratic_form = (cost_J(spec, t, x, plus) - 2.0 * base + cost_J(spec, t, x, minus)) / (eps * eps);
    c.lower_bound = rep.coefficient * c.norm_sq;
    const double roundoff = 1e-6 * std::max({1.0, std::abs(c.quadratic_form), c.norm_sq});
    c.passed = c.quadratic_form >= c.lower_bound - roundoff;
    rep.any_negative = rep.any_negative || c.quadratic_form < -roundoff;
    rep.all_passed = rep.all_passed && c.passed;
    rep.directions.push_back(c);
  }
  return rep;
}

bool StationarySet::has_family() const {
  return std::any_of(members.begin(), members.end(),
                     [](const StationaryResult& r) { return r.classification == Classification::Family; });
}

bool StationarySet::has_unique() const {
  return std::any_of(members.begin(), members.end(),
                     [](const StationaryResult& r) { return r.classification == Classification::Unique; });
}

StationarySet stationary_value(const ProblemSpec& spec, double t, const Vec& x,
                               std::span<const Vec> seeds, const NewtonConfig& cfg, int jobs) {
  struct Slot {
    std::optional<StationaryResult> result;
    bool nonconverged = false;
  };
  std::vector<Slot> slots(seeds.size());
  auto work = [&](std::size_t i) {
    try {
      slots[i].result = solve_argstat_p(spec, t, x, seeds[i], cfg);
    } catch (const NonConvergence&) {
      slots[i].nonconverged = true;
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  if (workers == 1 || seeds.size() < 2) {
    for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < seeds.size(); i += workers) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  StationarySet out;
  out.seeds = seeds.size();
  for (Slot& slot : slots) {
    if (slot.nonconverged) {
      ++out.nonconverged;
      continue;
    }
    StationaryResult& r = *slot.result;
    if (r.classification == Classification::Nonexistent) {
      ++out.nonexistent;
      continue;
    }
    if (r.classification == Classification::Inconclusive) {
      ++out.inconclusive;
      continue;
    }
    const bool duplicate = std::any_of(out.members.begin(), out.members.end(), [&](const StationaryResult& m) {
      const Vec diff = r.p_star - m.p_star;
      const double scale = 1e-6 * (1.0 + m.p_star.norm());
      if (m.classification == Classification::Family && r.classification == Classification::Family) {
        const Mat& B = m.family_basis;
        return (diff - B * (B.transpose() * diff)).norm() <= scale;
      }
      return diff.norm() <= scale;
    });
    if (!duplicate) out.members.push_back(std::move(r));
  }
  return out;
}

}  // namespace stataction
