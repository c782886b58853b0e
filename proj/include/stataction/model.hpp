#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stataction/linalg.hpp"

namespace stataction {

/// A twice-differentiable scalar field on R^n supplied as an analytic triple.
struct ScalarField {
  std::string kind;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
};

/// Potential energy V. `hessian_bound_K`, when declared, promises ‖∇²V(x)‖ ≤ K/2 everywhere.
struct PotentialField : ScalarField {
  std::optional<double> hessian_bound_K;
};

/// Terminal cost ψ appended to the action.
struct TerminalCost : ScalarField {};

/// Symmetric positive-definite mass operator M with cached inverse and lower spectral bound.
class InertiaOperator {
 public:
  /// Throws InvalidInertia unless `matrix` is square, symmetric and positive definite.
  explicit InertiaOperator(Mat matrix);

  static InertiaOperator scalar(int dim, double mass);
  static InertiaOperator diagonal(const Vec& masses);

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Mat& matrix() const { return matrix_; }
  const Mat& inverse() const { return inverse_; }
  /// Smallest eigenvalue m of M.
  double coercivity() const { return coercivity_; }

  Vec apply_inverse(const Vec& p) const { return inverse_ * p; }

 private:
  Mat matrix_;
  Mat inverse_;
  double coercivity_ = 0.0;
};

/// The mechanical problem: potential, inertia, terminal cost and horizon [t0, T].
struct ProblemSpec {
  int dim = 0;
  PotentialField potential;
  InertiaOperator inertia;
  TerminalCost terminal;
  double t0 = 0.0;
  double T = 1.0;

  /// Throws DimensionError on inconsistent dimensions, ConfigError on a bad horizon.
  void validate() const;
};

struct AssumptionReport {
  double m_est = 0.0;
  double K_est = 0.0;
  /// Largest h with max(h,1)·h = m/K; +inf when K = 0.
  double horizon_bound = std::numeric_limits<double>::infinity();
  bool holds_on_samples = true;

  bool unbounded() const { return !std::isfinite(horizon_bound); }
};

/// Positive root of max(h,1)·h = ratio (ratio = m/K); +inf for ratio = +inf.
double convexity_horizon(double ratio);

/// Sample-based estimate of the standing bounds: m from the spectrum of M and
/// K = 2·max over samples of max(‖∇²V‖, ‖∇²ψ‖).
AssumptionReport check_assumptions(const ProblemSpec& spec, std::span<const Vec> samples);

/// Total energy H(x,p) = V(x) + ½⟨p, M⁻¹p⟩.
double hamiltonian(const ProblemSpec& spec, const Vec& x, const Vec& p);

/// H̄(x,p,π,ζ) = −½⟨p,M⁻¹p⟩ + V(x) + ⟨π,M⁻¹p⟩ − ⟨ζ,∇V(x)⟩.
double extended_hamiltonian(const ProblemSpec& spec, const Vec& x, const Vec& p, const Vec& pi,
                            const Vec& zeta);

/// Running cost l(x,p) = ½⟨p,M⁻¹p⟩ − V(x) of the characteristics-based action.
double running_cost(const ProblemSpec& spec, const Vec& x, const Vec& p);

/// ∇l(x,p) = (−∇V(x), M⁻¹p), stacked into a 2n vector.
Vec running_cost_gradient(const ProblemSpec& spec, const Vec& x, const Vec& p);

struct DerivativeCheck {
  double gradient_rel_error = 0.0;
  double hessian_rel_error = 0.0;
};

/// Compares analytic derivatives against central differences at the given points.
DerivativeCheck check_derivatives(const ScalarField& field, std::span<const Vec> samples,
                                  double step = 1e-5);

namespace potentials {

PotentialField zero(int dim);
/// ½⟨x, Kx⟩ with symmetric stiffness K.
PotentialField quadratic(const Mat& stiffness);
/// a(‖x‖² − b)².
PotentialField double_well(int dim, double a, double b);
/// Σ κ(1 − cos x_i).
PotentialField pendulum(int dim, double kappa);
/// Σ_i Σ_k c_k x_i^k, with coefficients in increasing degree.
PotentialField polynomial(int dim, std::vector<double> coefficients);

}  // namespace potentials

namespace terminals {

TerminalCost zero(int dim);
/// ⟨c, x⟩.
TerminalCost linear(const Vec& c);
/// ½⟨x, Qx⟩ + ⟨c, x⟩.
TerminalCost quadratic(const Mat& Q, const Vec& c);

}  // namespace terminals

}  // namespace stataction
