#include "stataction/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace stataction {

namespace {

double symmetric_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

InertiaOperator::InertiaOperator(Mat matrix) : matrix_(std::move(matrix)) {
  const auto n = matrix_.rows();
  if (n == 0 || matrix_.cols() != n) throw InvalidInertia("inertia matrix must be square and non-empty");
  if (!matrix_.allFinite()) throw InvalidInertia("inertia matrix has non-finite entries");
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidInertia("inertia matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(matrix_, Eigen::EigenvaluesOnly);
  coercivity_ = eig.eigenvalues().minCoeff();
  if (!(coercivity_ > 0.0)) throw InvalidInertia("inertia matrix is not positive definite");
  inverse_ = matrix_.llt().solve(Mat::Identity(n, n));
  inverse_ = 0.5 * (inverse_ + inverse_.transpose());
  const double defect = (matrix_ * inverse_ - Mat::Identity(n, n)).norm();
  if (defect > 1e-12 * static_cast<double>(n)) {
    throw InvalidInertia("inertia matrix is too ill-conditioned to invert accurately");
  }
}

InertiaOperator InertiaOperator::scalar(int dim, double mass) {
  return InertiaOperator(mass * Mat::Identity(dim, dim));
}

InertiaOperator InertiaOperator::diagonal(const Vec& masses) {
  return InertiaOperator(Mat(masses.asDiagonal()));
}

void ProblemSpec::validate() const {
  if (dim <= 0) throw DimensionError("problem dimension must be positive");
  if (inertia.dim() != dim) throw DimensionError("inertia dimension differs from problem dimension");
  if (!potential.value || !potential.gradient || !potential.hessian) {
    throw ConfigError("potential field is incomplete");
  }
  if (!terminal.value || !terminal.gradient || !terminal.hessian) {
    throw ConfigError("terminal cost is incomplete");
  }
  const Vec origin = Vec::Zero(dim);
  if (potential.gradient(origin).size() != dim || potential.hessian(origin).rows() != dim) {
    throw DimensionError("potential field dimension differs from problem dimension");
  }
  if (terminal.gradient(origin).size() != dim || terminal.hessian(origin).rows() != dim) {
    throw DimensionError("terminal cost dimension differs from problem dimension");
  }
  if (!(t0 >= 0.0) || !(T >= t0)) throw ConfigError("horizon must satisfy 0 <= t0 <= T");
}

double convexity_horizon(double ratio) {
  if (!(ratio >= 0.0)) throw Error("convexity_horizon: ratio m/K must be nonnegative");
  if (std::isinf(ratio)) return ratio;
  // max(h,1)·h is h² above 1 and h below it
  return ratio <= 1.0 ? ratio : std::sqrt(ratio);
}

AssumptionReport check_assumptions(const ProblemSpec& spec, std::span<const Vec> samples) {
  if (samples.empty()) throw Error("check_assumptions: sample set is empty");
  AssumptionReport report;
  report.m_est = spec.inertia.coercivity();
  double worst = 0.0;
  bool holds = true;
  const auto declared = spec.potential.hessian_bound_K;
  for (const auto& x : samples) {
    require_dim(x, spec.dim, "check_assumptions sample");
    const double hv = symmetric_norm(spec.potential.hessian(x));
    const double hpsi = symmetric_norm(spec.terminal.hessian(x));
    worst = std::max({worst, hv, hpsi});
    if (declared && (hv > 0.5 * *declared * (1.0 + 1e-12) || hpsi > 0.5 * *declared * (1.0 + 1e-12))) {
      holds = false;
    }
  }
  report.K_est = 2.0 * worst;
  report.holds_on_samples = holds;
  const double ratio = report.K_est > 0.0 ? report.m_est / report.K_est
                                          : std::numeric_limits<double>::infinity();
  report.horizon_bound = convexity_horizon(ratio);
  return report;
}

double hamiltonian(const ProblemSpec& spec, const Vec& x, const Vec& p) {
  require_dim(x, spec.dim, "hamiltonian x");
  require_dim(p, spec.dim, "hamiltonian p");
  return spec.potential.value(x) + 0.5 * p.dot(spec.inertia.apply_inverse(p));
}

double extended_hamiltonian(const ProblemSpec& spec, const Vec& x, const Vec& p, const Vec& pi,
                            const Vec& zeta) {
  require_dim(x, spec.dim, "extended_hamiltonian x");
  require_dim(p, spec.dim, "extended_hamiltonian p");
  require_dim(pi, spec.dim, "extended_hamiltonian pi");
  require_dim(zeta, spec.dim, "extended_hamiltonian zeta");
  const Vec velocity = spec.inertia.apply_inverse(p);
  return -0.5 * p.dot(velocity) + spec.potential.value(x) + pi.dot(velocity) -
         zeta.dot(spec.potential.gradient(x));
}

double running_cost(const ProblemSpec& spec, const Vec& x, const Vec& p) {
  require_dim(x, spec.dim, "running_cost x");
  require_dim(p, spec.dim, "running_cost p");
  return 0.5 * p.dot(spec.inertia.apply_inverse(p)) - spec.potential.value(x);
}

Vec running_cost_gradient(const ProblemSpec& spec, const Vec& x, const Vec& p) {
  require_dim(x, spec.dim, "running_cost_gradient x");
  require_dim(p, spec.dim, "running_cost_gradient p");
  Vec g(2 * spec.dim);
  g.head(spec.dim) = -spec.potential.gradient(x);
  g.tail(spec.dim) = spec.inertia.apply_inverse(p);
  return g;
}

DerivativeCheck check_derivatives(const ScalarField& field, std::span<const Vec> samples, double step) {
  DerivativeCheck out;
  for (const auto& x : samples) {
    const auto n = x.size();
    const Vec g = field.gradient(x);
    const Mat h = field.hessian(x);
    Vec g_fd(n);
    Mat h_fd(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = step * (1.0 + std::abs(x(i)));
      Vec xp = x, xm = x;
      xp(i) += d;
      xm(i) -= d;
      g_fd(i) = (field.value(xp) - field.value(xm)) / (2.0 * d);
      h_fd.col(i) = (field.gradient(xp) - field.gradient(xm)) / (2.0 * d);
    }
    const double gscale = std::max(1.0, g.norm());
    const double hscale = std::max(1.0, h.norm());
    out.gradient_rel_error = std::max(out.gradient_rel_error, (g - g_fd).norm() / gscale);
    out.hessian_rel_error = std::max(out.hessian_rel_error, (h - h_fd).norm() / hscale);
  }
  return out;
}

namespace potentials {

PotentialField zero(int dim) {
  PotentialField f;
  f.kind = "zero";
  f.value = [](const Vec&) { return 0.0; };
  f.gradient = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
  f.hessian = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  f.hessian_bound_K = 0.0;
  return f;
}

PotentialField quadratic(const Mat& stiffness) {
  if (stiffness.rows() != stiffness.cols()) throw DimensionError("stiffness matrix must be square");
  const Mat k = 0.5 * (stiffness + stiffness.transpose());
  PotentialField f;
  f.kind = "quadratic";
  f.value = [k](const Vec& x) { return 0.5 * x.dot(k * x); };
  f.gradient = [k](const Vec& x) { return Vec(k * x); };
  f.hessian = [k](const Vec&) { return k; };
  f.hessian_bound_K = 2.0 * symmetric_norm(k);
  return f;
}

PotentialField double_well(int dim, double a, double b) {
  PotentialField f;
  f.kind = "double_well";
  f.value = [a, b](const Vec& x) {
    const double r = x.squaredNorm() - b;
    return a * r * r;
  };
  f.gradient = [a, b](const Vec& x) { return Vec(4.0 * a * (x.squaredNorm() - b) * x); };
  f.hessian = [a, b, dim](const Vec& x) {
    return Mat(4.0 * a * (x.squaredNorm() - b) * Mat::Identity(dim, dim) + 8.0 * a * x * x.transpose());
  };
  return f;
}

PotentialField pendulum(int dim, double kappa) {
  PotentialField f;
  f.kind = "pendulum";
  f.value = [kappa](const Vec& x) { return kappa * (1.0 - x.array().cos()).sum(); };
  f.gradient = [kappa](const Vec& x) { return Vec(kappa * x.array().sin()); };
  f.hessian = [kappa](const Vec& x) { return Mat((kappa * x.array().cos()).matrix().asDiagonal()); };
  (void)dim;
  f.hessian_bound_K = 2.0 * std::abs(kappa);
  return f;
}

PotentialField polynomial(int dim, std::vector<double> coefficients) {
  (void)dim;
  // Horner evaluation of P, P', P'' per coordinate
  auto eval = [c = coefficients](double s, int order) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > static_cast<std::size_t>(order);) {
      double factor = 1.0;
      for (int j = 0; j < order; ++j) factor *= static_cast<double>(k - static_cast<std::size_t>(j));
      acc = acc * s + factor * c[k];
    }
    return acc;
  };
  PotentialField f;
  f.kind = "polynomial";
  f.value = [eval](const Vec& x) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) sum += eval(x(i), 0);
    return sum;
  };
  f.gradient = [eval](const Vec& x) {
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = eval(x(i), 1);
    return g;
  };
  f.hessian = [eval](const Vec& x) {
    Mat h = Mat::Zero(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) h(i, i) = eval(x(i), 2);
    return h;
  };
  return f;
}

}  // namespace potentials

namespace terminals {

TerminalCost zero(int dim) {
  TerminalCost f;
  f.kind = "zero";
  f.value = [](const Vec&) { return 0.0; };
  f.gradient = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
  f.hessian = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return f;
}

TerminalCost linear(const Vec& c) {
  const auto n = c.size();
  TerminalCost f;
  f.kind = "linear";
  f.value = [c](const Vec& x) { return c.dot(x); };
  f.gradient = [c](const Vec&) { return c; };
  f.hessian = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  return f;
}

TerminalCost quadratic(const Mat& Q, const Vec& c) {
  if (Q.rows() != Q.cols() || Q.rows() != c.size()) throw DimensionError("terminal quadratic: shape mismatch");
  const Mat q = 0.5 * (Q + Q.transpose());
  TerminalCost f;
  f.kind = "quadratic";
  f.value = [q, c](const Vec& x) { return 0.5 * x.dot(q * x) + c.dot(x); };
  f.gradient = [q, c](const Vec& x) { return Vec(q * x + c); };
  f.hessian = [q](const Vec&) { return q; };
  return f;
}

}  // namespace terminals

}  // namespace stataction
