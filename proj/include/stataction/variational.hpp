#pragma once

#include <ostream>
#include <vector>

#include "stataction/flow.hpp"

namespace stataction {

/// Generator A(X) = [[0, −M⁻¹], [∇²V(x), 0]] of the linearized characteristic flow.
Mat generator_at(const ProblemSpec& spec, const PhasePoint& X);

/// Evolution operators U_{s,t} on the grid of `base`, U_{t,t} = I.
struct TangentFlow {
  std::vector<double> times;
  std::vector<Mat> U;
  PhaseTrajectory base;
};

TangentFlow propagate_tangent(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// Gradient of J̄(time, x, p) at the point `at`.
struct CostGradient {
  Vec grad_x;
  Vec grad_p;
  double time = 0.0;
  PhasePoint at;
};

/// ∇J̃ = U_{T,t}′∇Ψ + ∫ U_{s,t}′∇l ds, with ∇Ψ = (∇ψ, 0) and ∇l = (−∇V, M⁻¹p).
CostGradient grad_cost_full(const ProblemSpec& spec, const PhaseTrajectory& traj,
                            const TangentFlow& flow);

/// Backward solution (ξ, π) of the adjoint system with ξ_T = 0, π_T = p̄_T − ∇ψ(x̄_T), and the
/// assembled ζ_s = (p̄_s − π_s, ξ_s).
struct AdjointTrajectory {
  std::vector<double> times;
  std::vector<Vec> xi;
  std::vector<Vec> pi;
  std::vector<Vec> zeta;
};

AdjointTrajectory integrate_fvp(const ProblemSpec& spec, const PhaseTrajectory& traj);

struct SecondOrderReport {
  /// max |ξ'' + M⁻¹∇²V ξ|
  double second_order = 0.0;
  /// max |ξ' + M⁻¹(p̄ − ∇_x J̄)|
  double grad_p_rate = 0.0;
  /// max |(∇_x J̄)' − ∇V + ∇²V ξ|
  double grad_x_rate = 0.0;

  double max() const;
};

SecondOrderReport second_order_check(const ProblemSpec& spec, const PhaseTrajectory& traj,
                                     const AdjointTrajectory& adj);

/// Family generated by −A′ from t, evaluated at T.
struct FamilyBlocks {
  Mat U_hat;
  Mat block21;
  double sigma_min = 0.0;
  double condition = 0.0;
  double norm = 0.0;
};

FamilyBlocks adjoint_family_blocks(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// Columns s, gradx0.., gradp0.. at 17 significant digits.
void write_zeta_csv(std::ostream& out, const AdjointTrajectory& adj);

enum class GradientPath { Adjoint, Tangent };

/// Integrates from (x, p) at t to spec.T and returns ∇J̄(t, x, p).
CostGradient cost_gradient(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                           const IntegratorConfig& cfg = {},
                           GradientPath path = GradientPath::Adjoint);

/// J̄(t, x, p).
double cost_value(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                  const IntegratorConfig& cfg = {});

}  // namespace stataction
