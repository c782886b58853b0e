#include "stataction/massspring.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stataction/errors.hpp"

namespace stataction::massspring {

void MassSpringParams::validate() const {
  if (!(mass > 0.0) || !(kappa > 0.0)) throw ConfigError("mass-spring: mass and stiffness must be positive");
  if (!std::isfinite(v) || !std::isfinite(T)) throw ConfigError("mass-spring: v and T must be finite");
}

ProblemSpec make_problem(const MassSpringParams& params, double t0) {
  params.validate();
  ProblemSpec spec{1,
                   potentials::quadratic(Mat::Constant(1, 1, params.kappa)),
                   InertiaOperator::scalar(1, params.mass),
                   terminals::linear(Vec::Constant(1, -params.mass * params.v)),
                   t0,
                   params.T};
  spec.terminal.kind = "velocity";
  spec.validate();
  return spec;
}

Mat Sigma(const MassSpringParams& params) {
  Mat S = Mat::Zero(2, 2);
  S(0, 0) = params.kappa;
  S(1, 1) = -1.0 / params.mass;
  return S;
}

Mat Gamma(const MassSpringParams& params) {
  Mat G = Mat::Zero(2, 2);
  G(0, 1) = -1.0 / params.mass;
  G(1, 0) = params.kappa;
  return G;
}

Mat P_matrix(const MassSpringParams& params, double s) {
  const double w = params.omega();
  const double a = 2.0 * w * (params.T - s);
  Mat P(2, 2);
  P(0, 0) = -(params.kappa / w) * std::sin(a);
  P(0, 1) = P(1, 0) = 1.0 - std::cos(a);
  P(1, 1) = std::sin(a) / (params.mass * w);
  return 0.5 * P;
}

Vec Q_vector(const MassSpringParams& params, double s) {
  const double w = params.omega();
  const double th = w * (params.T - s);
  Vec Q(2);
  Q << std::cos(th), -(w / params.kappa) * std::sin(th);
  return -params.mass * params.v * Q;
}

double W_tilde(const MassSpringParams& params, double s, double x, double p) {
  Vec Y(2);
  Y << x, p;
  return 0.5 * Y.dot(P_matrix(params, s) * Y) + Q_vector(params, s).dot(Y);
}

GradW grad_W(const MassSpringParams& params, double t, double x, double p) {
  const double w = params.omega();
  const double th = w * (params.T - t);
  const double mv = params.mass * params.v;
  GradW g;
  g.grad_x = -(params.kappa / (2.0 * w)) * std::sin(2.0 * th) * x + 0.5 * (1.0 - std::cos(2.0 * th)) * p -
             mv * std::cos(th);
  g.grad_p = 0.5 * (1.0 - std::cos(2.0 * th)) * x + std::sin(2.0 * th) / (2.0 * params.mass * w) * p +
             mv * (w / params.kappa) * std::sin(th);
  return g;
}

std::string to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::Generic: return "generic";
    case CaseKind::Period: return "period";
    case CaseKind::QuarterFamily: return "quarter_family";
    case CaseKind::QuarterNonexistent: return "quarter_nonexistent";
  }
  return "unknown";
}

CaseLabel classify_pbar(const MassSpringParams& params, double t, double x, double tol_phase) {
  params.validate();
  const double w = params.omega();
  const double th = w * (params.T - t);
  const double mv = params.mass * params.v;
  const double root = std::sqrt(params.kappa * params.mass);
  constexpr double pi = std::numbers::pi;

  // The two equations for (x√(κm), p̄) are proportional.
  {
    Mat system(2, 3);
    const double sn = std::sin(th);
    const double cs = std::cos(th);
    system << sn * sn, sn * cs, -mv * sn, sn * cs, cs * cs, -mv * cs;
    Eigen::JacobiSVD<Mat> svd(system);
    const Vec sv = svd.singularValues();
    if (sv(1) > 1e-12 * std::max(1.0, sv(0))) throw Error("mass-spring: stationarity system is not rank one");
  }

  CaseLabel label;
  const long n_period = std::lround(th / pi);
  const long n_quarter = std::lround(th / pi - 0.5);
  if (std::abs(th - static_cast<double>(n_period) * pi) <= tol_phase) {
    label.kind = CaseKind::Period;
    label.n = n_period;
    label.p_bar = ((n_period + 1) % 2 == 0 ? 1.0 : -1.0) * mv;
  } else if (std::abs(th - (static_cast<double>(n_quarter) + 0.5) * pi) <= tol_phase) {
    label.n = n_quarter;
    const double ray = ((n_quarter + 1) % 2 == 0 ? 1.0 : -1.0) * params.v / w;
    if (std::abs(x - ray) <= tol_phase * (1.0 + std::abs(x))) {
      label.kind = CaseKind::QuarterFamily;
      label.family = true;
    } else {
      label.kind = CaseKind::QuarterNonexistent;
    }
  } else {
    label.kind = CaseKind::Generic;
    label.p_bar = -root * std::tan(th) * x - mv / std::cos(th);
  }
  return label;
}

double riccati_residual(const MassSpringParams& params, std::span<const double> grid) {
  if (grid.size() < 3) throw GridTooCoarse("riccati_residual needs at least 3 nodes");
  const Mat S = Sigma(params);
  const Mat G = Gamma(params);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i - 1];
    const Mat P = P_matrix(params, grid[i]);
    const Mat P_dot = (P_matrix(params, grid[i + 1]) - P_matrix(params, grid[i - 1])) / h;
    const Vec Q_dot = (Q_vector(params, grid[i + 1]) - Q_vector(params, grid[i - 1])) / h;
    const Mat rP = P_dot - (S - G.transpose() * P - P * G);
    const Vec rQ = Q_dot + G.transpose() * Q_vector(params, grid[i]);
    worst = std::max({worst, rP.cwiseAbs().maxCoeff(), rQ.cwiseAbs().maxCoeff()});
  }
  return worst;
}

}  // namespace stataction::massspring
