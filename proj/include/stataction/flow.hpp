#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "stataction/model.hpp"

namespace stataction {

/// A point X = (x, p) of phase space.
struct PhasePoint {
  Vec x;
  Vec p;
};

enum class Scheme { Rk4Fixed, DopriAdaptive };

struct IntegratorConfig {
  Scheme scheme = Scheme::Rk4Fixed;
  /// Fixed step for rk4; 0 selects (span)/intervals. Rounded so the interval count is even.
  double step = 0.0;
  int intervals = 2000;
  /// Dormand–Prince tolerances.
  double rtol = 1e-10;
  double atol = 1e-12;
  long max_steps = 2'000'000;
};

/// Characteristic curve s ↦ (x̄_s, p̄_s) sampled on a strictly increasing grid, with the
/// vector field stored at every node for cubic Hermite dense output.
class PhaseTrajectory {
 public:
  std::vector<double> times;
  std::vector<Vec> x;
  std::vector<Vec> p;
  std::vector<Vec> dx;
  std::vector<Vec> dp;
  /// Action accumulator z̄_s, present for trajectories built from terminal data.
  std::optional<std::vector<double>> z;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  int dim() const { return empty() ? 0 : static_cast<int>(x.front().size()); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }

  PhasePoint point(std::size_t i) const { return {x[i], p[i]}; }
  PhasePoint front() const { return point(0); }
  PhasePoint back() const { return point(size() - 1); }

  /// Cubic Hermite interpolation at any s in [t_begin, t_end].
  PhasePoint at(double s) const;

  /// Nodes first..last inclusive.
  PhaseTrajectory slice(std::size_t first, std::size_t last) const;

  /// Index of the node nearest to s.
  std::size_t nearest_index(double s) const;
};

/// Raised when the integrator cannot finish; carries the trajectory computed so far.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, PhaseTrajectory partial)
      : Error(what), partial_(std::move(partial)) {}
  const PhaseTrajectory& partial() const { return partial_; }

 private:
  PhaseTrajectory partial_;
};

/// Hamiltonian vector field f(X) = (−M⁻¹p, ∇V(x)).
PhasePoint hamiltonian_field(const ProblemSpec& spec, const PhasePoint& X);

/// Integrates ẋ = −M⁻¹p, ṗ = ∇V(x) from (x, p) at time `from` to time `to`; either
/// direction is allowed. The returned grid is always increasing in time.
PhaseTrajectory integrate_phase(const ProblemSpec& spec, double from, double to, const Vec& x,
                                const Vec& p, const IntegratorConfig& cfg = {});

/// Cauchy problem with x̄_t = x0, p̄_t = p0 on [t, T].
PhaseTrajectory integrate_cauchy(const ProblemSpec& spec, double t, double T, const Vec& x0,
                                 const Vec& p0, const IntegratorConfig& cfg = {});

/// Backward characteristic from terminal data x̄_T = y, p̄_T = ∇ψ(y), z̄_T = ψ(y), with
/// ż = V(x̄) − ½⟨p̄, M⁻¹p̄⟩ carried along.
PhaseTrajectory integrate_terminal(const ProblemSpec& spec, double t, double T, const Vec& y,
                                   const IntegratorConfig& cfg = {});

/// ∫ ½⟨p̄,M⁻¹p̄⟩ − V(x̄) ds + ψ(x̄_end) over the trajectory, by Simpson on its grid.
double action_along(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// max_s |H(x̄_s, p̄_s) − H(x̄_begin, p̄_begin)|.
double energy_drift(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// max over interior nodes of |ẍ_s + M⁻¹∇V(x̄_s)| with ẍ from central second differences.
double newton_residual(const ProblemSpec& spec, const PhaseTrajectory& traj);

/// CSV with header `s,x0..,p0..,[z,]H`, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec, const PhaseTrajectory& traj);

}  // namespace stataction
