#include "stataction/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stataction/quadrature.hpp"

namespace stataction {

namespace {

void require_trajectory(const ProblemSpec& spec, const PhaseTrajectory& traj, const char* what) {
  if (traj.size() < 2) throw GridTooCoarse(std::string(what) + ": trajectory needs at least 2 nodes");
  if (traj.dim() != spec.dim) throw DimensionError(std::string(what) + ": trajectory dimension mismatch");
}

/// One classical RK4 step of Z' = A(s) Z with A sampled at both ends and the midpoint.
Mat rk4_linear(const Mat& A0, const Mat& Am, const Mat& A1, const Mat& Z, double h) {
  const Mat k1 = A0 * Z;
  const Mat k2 = Am * (Z + 0.5 * h * k1);
  const Mat k3 = Am * (Z + 0.5 * h * k2);
  const Mat k4 = A1 * (Z + h * k3);
  return Z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<Mat> generators(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  std::vector<Mat> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) out.push_back(generator_at(spec, traj.point(i)));
  return out;
}

Mat midpoint_generator(const ProblemSpec& spec, const PhaseTrajectory& traj, std::size_t i) {
  return generator_at(spec, traj.at(0.5 * (traj.times[i] + traj.times[i + 1])));
}

}  // namespace

Mat generator_at(const ProblemSpec& spec, const PhasePoint& X) {
  const int n = spec.dim;
  require_dim(X.x, n, "generator x");
  require_dim(X.p, n, "generator p");
  Mat A = Mat::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n) = -spec.inertia.inverse();
  A.bottomLeftCorner(n, n) = spec.potential.hessian(X.x);
  return A;
}

TangentFlow propagate_tangent(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  require_trajectory(spec, traj, "propagate_tangent");
  const auto A = generators(spec, traj);
  TangentFlow flow;
  flow.times = traj.times;
  flow.base = traj;
  flow.U.reserve(traj.size());
  flow.U.push_back(Mat::Identity(2 * spec.dim, 2 * spec.dim));
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    flow.U.push_back(rk4_linear(A[i], midpoint_generator(spec, traj, i), A[i + 1], flow.U.back(), h));
    if (!flow.U.back().allFinite()) {
      throw IntegrationError("tangent flow became non-finite", traj.slice(0, i + 1));
    }
  }
  return flow;
}

CostGradient grad_cost_full(const ProblemSpec& spec, const PhaseTrajectory& traj,
                            const TangentFlow& flow) {
  require_trajectory(spec, traj, "grad_cost_full");
  if (flow.times.size() != traj.size() || flow.U.size() != traj.size()) {
    throw GridMismatch("tangent flow and trajectory have different node counts");
  }
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (std::abs(flow.times[i] - traj.times[i]) > 1e-12 * std::max(1.0, std::abs(traj.times[i]))) {
      throw GridMismatch("tangent flow grid is not aligned with the trajectory");
    }
  }
  const int n = spec.dim;
  std::vector<double> weights = simpson_weights(traj.times);
  Vec g = Vec::Zero(2 * n);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    g += weights[i] * (flow.U[i].transpose() * running_cost_gradient(spec, traj.x[i], traj.p[i]));
  }
  Vec terminal = Vec::Zero(2 * n);
  terminal.head(n) = spec.terminal.gradient(traj.x.back());
  g += flow.U.back().transpose() * terminal;
  return {g.head(n), g.tail(n), traj.t_begin(), traj.front()};
}

AdjointTrajectory integrate_fvp(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  require_trajectory(spec, traj, "integrate_fvp");
  const int n = spec.dim;
  const std::size_t N = traj.size();
  const auto A = generators(spec, traj);

  AdjointTrajectory adj;
  adj.times = traj.times;
  adj.xi.resize(N);
  adj.pi.resize(N);
  adj.zeta.resize(N);

  Mat state(2 * n, 1);
  state.topRows(n) = Vec::Zero(n);
  state.bottomRows(n) = traj.p.back() - spec.terminal.gradient(traj.x.back());
  for (std::size_t k = N; k-- > 0;) {
    if (k + 1 < N) {
      const double h = traj.times[k] - traj.times[k + 1];
      state = rk4_linear(A[k + 1], midpoint_generator(spec, traj, k), A[k], state, h);
      if (!state.allFinite()) throw IntegrationError("adjoint flow became non-finite", traj.slice(k, N - 1));
    }
    adj.xi[k] = state.topRows(n);
    adj.pi[k] = state.bottomRows(n);
    Vec z(2 * n);
    z.head(n) = traj.p[k] - adj.pi[k];
    z.tail(n) = adj.xi[k];
    adj.zeta[k] = std::move(z);
  }
  return adj;
}

double SecondOrderReport::max() const { return std::max({second_order, grad_p_rate, grad_x_rate}); }

SecondOrderReport second_order_check(const ProblemSpec& spec, const PhaseTrajectory& traj,
                                     const AdjointTrajectory& adj) {
  if (traj.size() < 5) throw GridTooCoarse("second_order_check needs at least 5 nodes");
  if (adj.times.size() != traj.size()) throw GridMismatch("adjoint and trajectory grids differ");
  const int n = spec.dim;
  SecondOrderReport r;
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
    const double h0 = traj.times[i] - traj.times[i - 1];
    const double h1 = traj.times[i + 1] - traj.times[i];
    const Vec& xm = adj.xi[i - 1];
    const Vec& x0 = adj.xi[i];
    const Vec& xp = adj.xi[i + 1];
    const Mat hess = spec.potential.hessian(traj.x[i]);

    const Vec xi_dd = 2.0 * ((xp - x0) / h1 - (x0 - xm) / h0) / (h0 + h1);
    r.second_order = std::max(
        r.second_order, (xi_dd + spec.inertia.apply_inverse(hess * x0)).lpNorm<Eigen::Infinity>());

    // Three-point first derivative, exact for quadratics on uneven grids.
    auto d1 = [&](const Vec& fm, const Vec& f0, const Vec& fp) -> Vec {
      return (-h1 / (h0 * (h0 + h1))) * fm + ((h1 - h0) / (h0 * h1)) * f0 + (h0 / (h1 * (h0 + h1))) * fp;
    };
    const Vec xi_d = d1(xm, x0, xp);
    const Vec gx = adj.zeta[i].head(n);
    r.grad_p_rate = std::max(
        r.grad_p_rate, (xi_d + spec.inertia.apply_inverse(traj.p[i] - gx)).lpNorm<Eigen::Infinity>());

    const Vec gx_d = d1(adj.zeta[i - 1].head(n), gx, adj.zeta[i + 1].head(n));
    r.grad_x_rate = std::max(
        r.grad_x_rate,
        (gx_d - spec.potential.gradient(traj.x[i]) + hess * x0).lpNorm<Eigen::Infinity>());
  }
  return r;
}

FamilyBlocks adjoint_family_blocks(const ProblemSpec& spec, const PhaseTrajectory& traj) {
  require_trajectory(spec, traj, "adjoint_family_blocks");
  const int n = spec.dim;
  const auto A = generators(spec, traj);
  Mat U = Mat::Identity(2 * n, 2 * n);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    const Mat Am = midpoint_generator(spec, traj, i);
    U = rk4_linear(-A[i].transpose(), -Am.transpose(), -A[i + 1].transpose(), U, h);
    if (!U.allFinite()) throw IntegrationError("adjoint family became non-finite", traj.slice(0, i + 1));
  }
  FamilyBlocks out;
  out.U_hat = U;
  out.block21 = U.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<Mat> svd(out.block21);
  const Vec sv = svd.singularValues();
  out.sigma_min = sv.minCoeff();
  out.condition = out.sigma_min > 0.0 ? sv.maxCoeff() / out.sigma_min
                                      : std::numeric_limits<double>::infinity();
  out.norm = spectral_norm(U);
  return out;
}

void write_zeta_csv(std::ostream& out, const AdjointTrajectory& adj) {
  const auto n = adj.zeta.empty() ? 0 : adj.zeta.front().size() / 2;
  out << "s";
  for (Eigen::Index i = 0; i < n; ++i) out << ",gradx" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",gradp" << i;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < adj.times.size(); ++k) {
    out << adj.times[k];
    for (Eigen::Index i = 0; i < 2 * n; ++i) out << ',' << adj.zeta[k](i);
    out << '\n';
  }
  out.precision(old_precision);
}

CostGradient cost_gradient(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                           const IntegratorConfig& cfg, GradientPath path) {
  const PhaseTrajectory traj = integrate_cauchy(spec, t, spec.T, x, p, cfg);
  if (traj.size() < 3) {
    const int n = spec.dim;
    return {spec.terminal.gradient(x), Vec::Zero(n), t, {x, p}};
  }
  if (path == GradientPath::Tangent) return grad_cost_full(spec, traj, propagate_tangent(spec, traj));
  const AdjointTrajectory adj = integrate_fvp(spec, traj);
  const int n = spec.dim;
  return {adj.zeta.front().head(n), adj.zeta.front().tail(n), t, {x, p}};
}

double cost_value(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                  const IntegratorConfig& cfg) {
  const PhaseTrajectory traj = integrate_cauchy(spec, t, spec.T, x, p, cfg);
  if (traj.size() < 3) return spec.terminal.value(x);
  return action_along(spec, traj);
}

}  // namespace stataction
