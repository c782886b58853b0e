#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stataction/flow.hpp"
#include "stataction/variational.hpp"

namespace stataction {

/// Nodal velocity samples u_s on a grid spanning [t, T].
struct ControlGrid {
  std::vector<double> times;
  std::vector<Vec> u;
};

/// x̄_s = x + ∫_t^s u, nodewise.
std::vector<Vec> state_from_control(double t, const Vec& x, const ControlGrid& u);

/// J(t, x, u) = ∫ ½⟨u, Mu⟩ − V(x̄) ds + ψ(x̄_T).
double cost_J(const ProblemSpec& spec, double t, const Vec& x, const ControlGrid& u);

/// Nodal r_s = M u_s + p̄_s, where p̄ solves ṗ = ∇V(x̄), p̄_T = ∇ψ(x̄_T) along the state driven by u.
ControlGrid grad_u_residual(const ProblemSpec& spec, double t, const Vec& x, const ControlGrid& u);

/// ū_s = −M⁻¹p̄_s on the trajectory grid.
ControlGrid induced_control(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// Simpson approximation of ∫‖u_s‖² ds.
double control_norm_sq(const ControlGrid& u);

struct NewtonConfig {
  /// Absolute tolerance on the residual norm; unset means 1e-9·(1 + ‖p0‖).
  std::optional<double> tol_residual;
  int max_iters = 50;
  /// Central-difference step, relative to max(1, |p_j|).
  double fd_step = 1e-4;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  int max_backtracks = 40;
  /// Singular values below this multiple of max(‖J‖, 1) count as zero.
  double singular_sigma_threshold = 1e-8;
  IntegratorConfig integrator;

  double tolerance_for(const Vec& p0) const;
};

enum class Classification { Unique, Family, Nonexistent, Inconclusive };

std::string to_string(Classification c);

struct StationaryResult {
  double t = 0.0;
  Vec x;
  Vec p_star;
  PhaseTrajectory trajectory;
  /// ‖∇_p J̄(t, x, p*)‖
  double residual_gradp = 0.0;
  /// ‖p* − ∇_x J̄(t, x, p*)‖
  double residual_fixedpoint = 0.0;
  double value = 0.0;
  Classification classification = Classification::Inconclusive;
  int family_dim = 0;
  Mat family_basis;
  /// max − min of J̄ over sampled family members.
  std::optional<double> family_value_spread;
  double jacobian_sigma_min = 0.0;
  int iterations = 0;
  double tolerance = 0.0;
  bool converged = false;
  bool tpbvp_solved = false;
  std::optional<double> u21_sigma_min;
  std::optional<double> u21_condition;
};

/// Raised when a solver runs out of iterations or hits a singular step it cannot take.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, StationaryResult best)
      : Error(what), best_(std::move(best)) {}
  const StationaryResult& best() const { return best_; }

 private:
  StationaryResult best_;
};

/// Stacked stationarity residual R(p) = (∇_p J̄, p − ∇_x J̄) = (ξ_t, π_t).
Vec stationarity_residual(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                          const IntegratorConfig& cfg = {});

/// Fills trajectory, residuals and value at a given momentum without solving.
StationaryResult evaluate_momentum(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                                   const IntegratorConfig& cfg = {});

/// Damped Gauss–Newton on R(p) with a central-difference Jacobian and SVD rank analysis.
StationaryResult solve_argstat_p(const ProblemSpec& spec, double t, const Vec& x, const Vec& p0,
                                 const NewtonConfig& cfg = {});

/// Newton on G(p) = p̄_T − ∇ψ(x̄_T), Jacobian U²² − ∇²ψ U¹² from the tangent flow.
StationaryResult solve_tpbvp_shooting(const ProblemSpec& spec, double t, double T, const Vec& x,
                                      const Vec& p0, const NewtonConfig& cfg = {});

struct VerificationReport {
  std::vector<double> sample_times;
  std::vector<double> gradp;
  std::vector<double> fixedpoint;
  double max_gradp = 0.0;
  double max_fixedpoint = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Restarts the gradient at (s, x̄_s, p̄_s) for s = result.t and every sample.
VerificationReport verify_stationarity(const ProblemSpec& spec, const StationaryResult& result,
                                       std::span<const double> sample_times, double tol = 1e-6,
                                       const IntegratorConfig& cfg = {});

/// k equally spaced interior points of (t, T).
std::vector<double> interior_samples(double t, double T, int k);

struct HjbReport {
  /// max |d/ds J̄(s, x̄_s, p̄_s) + l(x̄_s, p̄_s)|
  double along_flow = 0.0;
  /// max |−∂_s J̄ + H̄(x̄_s, p̄_s, ∇_x J̄, ∇_p J̄)|
  double pde = 0.0;
  double max() const { return std::max(along_flow, pde); }
};

/// Samples must leave room for the central stencil s ± fd_step inside [t, T].
HjbReport hjb_residual(const ProblemSpec& spec, double t, const Vec& x, const Vec& p,
                       std::span<const double> sample_times, double fd_step = 1e-4,
                       const IntegratorConfig& cfg = {});

struct DirectionCheck {
  double quadratic_form = 0.0;
  double norm_sq = 0.0;
  double lower_bound = 0.0;
  bool passed = false;
};

struct ConvexityReport {
  double m = 0.0;
  double K = 0.0;
  double horizon = 0.0;
  /// m − K·max(τ,1)·τ; the bound is informative only when positive.
  double coefficient = 0.0;
  bool bound_applicable = false;
  bool any_negative = false;
  bool all_passed = true;
  std::vector<DirectionCheck> directions;
};

/// Second differences of cost_J at u along each direction against (m − K·max(τ,1)·τ)‖δ‖².
ConvexityReport convexity_certificate(const ProblemSpec& spec, double t, const Vec& x,
                                      const ControlGrid& u, std::span<const ControlGrid> directions);

struct StationarySet {
  std::vector<StationaryResult> members;
  std::size_t seeds = 0;
  std::size_t nonconverged = 0;
  std::size_t nonexistent = 0;
  std::size_t inconclusive = 0;

  bool has_family() const;
  bool has_unique() const;
};

/// Multi-start argstat; results are merged in seed order and deduplicated within 1e-6.
StationarySet stationary_value(const ProblemSpec& spec, double t, const Vec& x,
                               std::span<const Vec> seeds, const NewtonConfig& cfg = {},
                               int jobs = 1);

}  // namespace stataction
