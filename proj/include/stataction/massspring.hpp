#pragma once

#include <optional>
#include <span>
#include <string>

#include "stataction/model.hpp"

namespace stataction::massspring {

/// One-dimensional oscillator V(x) = ½κx², M = m, ψ(x) = −mvx.
struct MassSpringParams {
  double mass = 5.0;
  double kappa = 1.0;
  double v = -2.0;
  double T = 1.0;

  double omega() const { return std::sqrt(kappa / mass); }
  /// Throws ConfigError unless mass and kappa are positive.
  void validate() const;
};

ProblemSpec make_problem(const MassSpringParams& params, double t0 = 0.0);

/// Σ = diag(κ, −1/m).
Mat Sigma(const MassSpringParams& params);
/// Γ = [[0, −1/m], [κ, 0]].
Mat Gamma(const MassSpringParams& params);

Mat P_matrix(const MassSpringParams& params, double s);
Vec Q_vector(const MassSpringParams& params, double s);

/// W̃(s, x, p) = ½⟨Y, P_s Y⟩ + ⟨Q_s, Y⟩ with Y = (x, p).
double W_tilde(const MassSpringParams& params, double s, double x, double p);

struct GradW {
  double grad_x = 0.0;
  double grad_p = 0.0;
};

GradW grad_W(const MassSpringParams& params, double t, double x, double p);

enum class CaseKind { Generic, Period, QuarterFamily, QuarterNonexistent };

struct CaseLabel {
  CaseKind kind = CaseKind::Generic;
  /// Index of the period or quarter phase; 0 for generic.
  long n = 0;
  std::optional<double> p_bar;
  bool family = false;
};

std::string to_string(CaseKind kind);

/// Case split on θ = ω(T − t) for the stationary momentum p̄.
CaseLabel classify_pbar(const MassSpringParams& params, double t, double x, double tol_phase = 1e-9);

/// Max finite-difference residual of Ṗ = Σ − Γ′P − PΓ and Q̇ = −Γ′Q over the interior of `grid`.
double riccati_residual(const MassSpringParams& params, std::span<const double> grid);

}  // namespace stataction::massspring
