#include "stataction/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <string>

#include "stataction/quadrature.hpp"

namespace stataction {

namespace {

/// Packed state (x, p[, z]) and its time derivative.
Vec packed_field(const ProblemSpec& spec, const Vec& y, bool with_z) {
  const int n = spec.dim;
  Vec f(y.size());
  const Vec x = y.head(n);
  const Vec p = y.segment(n, n);
  const Vec velocity = spec.inertia.apply_inverse(p);
  f.head(n) = -velocity;
  f.segment(n, n) = spec.potential.gradient(x);
  if (with_z) f(2 * n) = spec.potential.value(x) - 0.5 * p.dot(velocity);
  return f;
}

Vec pack(const Vec& x, const Vec& p, std::optional<double> z) {
  const auto n = x.size();
  Vec y(2 * n + (z ? 1 : 0));
  y.head(n) = x;
  y.segment(n, n) = p;
  if (z) y(2 * n) = *z;
  return y;
}

class Recorder {
 public:
  Recorder(const ProblemSpec& spec, bool with_z) : spec_(spec), with_z_(with_z) {
    if (with_z_) traj_.z.emplace();
  }

  void push(double s, const Vec& y, const Vec& f) {
    const int n = spec_.dim;
    traj_.times.push_back(s);
    traj_.x.push_back(y.head(n));
    traj_.p.push_back(y.segment(n, n));
    traj_.dx.push_back(f.head(n));
    traj_.dp.push_back(f.segment(n, n));
    if (with_z_) traj_.z->push_back(y(2 * n));
  }

  /// Returns the trajectory with increasing times.
  PhaseTrajectory finish(bool backward) {
    if (backward) {
      std::reverse(traj_.times.begin(), traj_.times.end());
      std::reverse(traj_.x.begin(), traj_.x.end());
      std::reverse(traj_.p.begin(), traj_.p.end());
      std::reverse(traj_.dx.begin(), traj_.dx.end());
      std::reverse(traj_.dp.begin(), traj_.dp.end());
      if (traj_.z) std::reverse(traj_.z->begin(), traj_.z->end());
    }
    return std::move(traj_);
  }

 private:
  const ProblemSpec& spec_;
  bool with_z_;
  PhaseTrajectory traj_;
};

PhaseTrajectory run_rk4(const ProblemSpec& spec, double from, double to, Vec y, bool with_z,
                        const IntegratorConfig& cfg) {
  Recorder rec(spec, with_z);
  const double span = to - from;
  const bool backward = span < 0.0;
  Vec f = packed_field(spec, y, with_z);
  rec.push(from, y, f);
  if (span == 0.0) return rec.finish(false);

  long intervals = cfg.intervals;
  if (cfg.step > 0.0) intervals = static_cast<long>(std::ceil(std::abs(span) / cfg.step - 1e-9));
  intervals = std::max<long>(intervals, 2);
  intervals += intervals % 2;
  const double h = span / static_cast<double>(intervals);

  for (long k = 0; k < intervals; ++k) {
    if (k >= cfg.max_steps) {
      throw IntegrationError("rk4: step budget of " + std::to_string(cfg.max_steps) + " exhausted",
                             rec.finish(backward));
    }
    const Vec k1 = f;
    const Vec k2 = packed_field(spec, y + 0.5 * h * k1, with_z);
    const Vec k3 = packed_field(spec, y + 0.5 * h * k2, with_z);
    const Vec k4 = packed_field(spec, y + h * k3, with_z);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double s = (k + 1 == intervals) ? to : from + static_cast<double>(k + 1) * h;
    if (!y.allFinite()) throw IntegrationError("rk4: state became non-finite", rec.finish(backward));
    f = packed_field(spec, y, with_z);
    rec.push(s, y, f);
  }
  return rec.finish(backward);
}

PhaseTrajectory run_dopri(const ProblemSpec& spec, double from, double to, Vec y, bool with_z,
                          const IntegratorConfig& cfg) {
  // Dormand–Prince 5(4) coefficients
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2;
  (void)c3;
  (void)c4;
  (void)c5;

  Recorder rec(spec, with_z);
  const double span = to - from;
  const bool backward = span < 0.0;
  const double dir = backward ? -1.0 : 1.0;
  Vec k1 = packed_field(spec, y, with_z);
  rec.push(from, y, k1);
  if (span == 0.0) return rec.finish(false);

  const double h_max = std::abs(span) / 16.0;
  double h = std::min(h_max, std::abs(span) * 1e-3);
  double s = from;
  long attempts = 0;
  while (dir * (to - s) > 0.0) {
    if (++attempts > cfg.max_steps) {
      throw IntegrationError("dopri: step budget of " + std::to_string(cfg.max_steps) + " exhausted",
                             rec.finish(backward));
    }
    bool last = false;
    if (h >= std::abs(to - s)) {
      h = std::abs(to - s);
      last = true;
    }
    const double hs = dir * h;
    const Vec k2 = packed_field(spec, y + hs * a21 * k1, with_z);
    const Vec k3 = packed_field(spec, y + hs * (a31 * k1 + a32 * k2), with_z);
    const Vec k4 = packed_field(spec, y + hs * (a41 * k1 + a42 * k2 + a43 * k3), with_z);
    const Vec k5 = packed_field(spec, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), with_z);
    const Vec k6 =
        packed_field(spec, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), with_z);
    const Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = packed_field(spec, y_new, with_z);
    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      norm += (err(i) / sc) * (err(i) / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(y.size()));
    if (!std::isfinite(norm)) throw IntegrationError("dopri: state became non-finite", rec.finish(backward));

    if (norm <= 1.0) {
      s = last ? to : s + hs;
      y = y_new;
      k1 = k7;
      rec.push(s, y, k1);
      const double grow = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      h = std::min(h_max, h * grow);
    } else {
      h *= std::clamp(0.9 * std::pow(norm, -0.2), 0.1, 1.0);
      if (h < 1e-14 * std::max(1.0, std::abs(s))) {
        throw IntegrationError("dopri: step size underflow", rec.finish(backward));
      }
    }
  }
  return rec.finish(backward);
}

PhaseTrajectory run(const ProblemSpec& spec, double from, double to, Vec y, bool with_z,
                    const IntegratorConfig& cfg) {
  if (!std::isfinite(from) || !std::isfinite(to)) throw Error("integration bounds must be finite");
  if (cfg.scheme == Scheme::DopriAdaptive) {
    if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw ConfigError("dopri tolerances must be positive");
    return run_dopri(spec, from, to, std::move(y), with_z, cfg);
  }
  if (cfg.step < 0.0 || cfg.intervals <= 0) throw ConfigError("rk4 step must be positive");
  return run_rk4(spec, from, to, std::move(y), with_z, cfg);
}

}  // namespace

PhasePoint PhaseTrajectory::at(double s) const {
  if (empty()) throw Error("dense output on an empty trajectory");
  const double tol = 1e-12 * std::max(1.0, std::abs(t_end()) + std::abs(t_begin()));
  if (s < t_begin() - tol || s > t_end() + tol) {
    throw Error("dense output requested at s=" + std::to_string(s) + " outside the trajectory span");
  }
  if (size() == 1) return front();
  auto it = std::upper_bound(times.begin(), times.end(), s);
  std::size_t i = (it == times.begin()) ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  i = std::min(i, size() - 2);
  const double h = times[i + 1] - times[i];
  const double u = std::clamp((s - times[i]) / h, 0.0, 1.0);
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1;
  const double h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2;
  const double h11 = u3 - u2;
  return {h00 * x[i] + h10 * h * dx[i] + h01 * x[i + 1] + h11 * h * dx[i + 1],
          h00 * p[i] + h10 * h * dp[i] + h01 * p[i + 1] + h11 * h * dp[i + 1]};
}

PhaseTrajectory PhaseTrajectory::slice(std::size_t first, std::size_t last) const {
  if (first > last || last >= size()) throw Error("trajectory slice out of range");
  PhaseTrajectory out;
  const auto b = static_cast<std::ptrdiff_t>(first);
  const auto e = static_cast<std::ptrdiff_t>(last) + 1;
  out.times.assign(times.begin() + b, times.begin() + e);
  out.x.assign(x.begin() + b, x.begin() + e);
  out.p.assign(p.begin() + b, p.begin() + e);
  out.dx.assign(dx.begin() + b, dx.begin() + e);
  out.dp.assign(dp.begin() + b, dp.begin() + e);
  if (z) out.z.emplace(z->begin() + b, z->begin() + e);
  return out;
}

std::size_t PhaseTrajectory::nearest_index(double s) const {
  auto it = std::lower_bound(times.begin(), times.end(), s);
  if (it == times.begin()) return 0;
  if (it == times.end()) return size() - 1;
  const auto i = static_cast<std::size_t>(it - times.begin());
  return (s - times[i - 1] <= times[i] - s) ? i - 1 : i;
}

PhasePoint hamiltonian_field(const ProblemSpec& spec, const PhasePoint& X) {
  return {-spec.inertia.apply_inverse(X.p), spec.potential.gradient(X.x)};
}

PhaseTrajectory integrate_phase(const ProblemSpec& spec, double from, double to, const Vec& x,
                                const Vec& p, const IntegratorConfig& cfg) {
  require_dim(x, spec.dim, "integrate x");
  require_dim(p, spec.dim, "integrate p");
  return run(spec, from, to, pack(x, p, std::nullopt), false, cfg);
}

PhaseTrajectory integrate_cauchy(const ProblemSpec& spec, double t, double T, const Vec& x0,
                                 const Vec& p0, const IntegratorConfig& cfg) {
  if (t > T) throw Error("integrate_cauchy requires t <= T");
  return integrate_phase(spec, t, T, x0, p0, cfg);
}

PhaseTrajectory integrate_terminal(const ProblemSpec& spec, double t, double T, const Vec& y,
                                   const IntegratorConfig& cfg) {
  if (t > T) throw Error("integrate_terminal requires t <= T");
  require_dim(y, spec.dim, "integrate_terminal y");
  return run(spec, T, t, pack(y, spec.terminal.gradient(y), spec.terminal.value(y)), true, cfg);
}

double action_along(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  if (traj.size() < 3) throw GridTooCoarse("action_along needs at least 3 nodes");
  std::vector<double> lagrangian(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) lagrangian[i] = running_cost(spec, traj.x[i], traj.p[i]);
  return simpson(traj.times, lagrangian) + spec.terminal.value(traj.x.back());
}

double energy_drift(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  if (traj.empty()) throw Error("energy_drift on an empty trajectory");
  const double h0 = hamiltonian(spec, traj.x.front(), traj.p.front());
  double drift = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    drift = std::max(drift, std::abs(hamiltonian(spec, traj.x[i], traj.p[i]) - h0));
  }
  return drift;
}

double newton_residual(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  if (traj.size() < 3) throw GridTooCoarse("newton_residual needs at least 3 nodes");
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
    const double h0 = traj.times[i] - traj.times[i - 1];
    const double h1 = traj.times[i + 1] - traj.times[i];
    const Vec accel =
        2.0 * ((traj.x[i + 1] - traj.x[i]) / h1 - (traj.x[i] - traj.x[i - 1]) / h0) / (h0 + h1);
    const Vec r = accel + spec.inertia.apply_inverse(spec.potential.gradient(traj.x[i]));
    worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec, const PhaseTrajectory& traj) {
  const int n = traj.dim();
  out << "s";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  for (int i = 0; i < n; ++i) out << ",p" << i;
  if (traj.z) out << ",z";
  out << ",H\n";
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.times[k];
    for (int i = 0; i < n; ++i) out << ',' << traj.x[k](i);
    for (int i = 0; i < n; ++i) out << ',' << traj.p[k](i);
    if (traj.z) out << ',' << (*traj.z)[k];
    out << ',' << hamiltonian(spec, traj.x[k], traj.p[k]) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stataction
