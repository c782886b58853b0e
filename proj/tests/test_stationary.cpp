#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stataction/quadrature.hpp"
#include "stataction/stationary.hpp"
#include "support.hpp"

using namespace stataction;
using namespace testing_support;

namespace {

ProblemSpec free_particle(int dim, const Vec& c, double T) {
  return ProblemSpec{dim, potentials::zero(dim), InertiaOperator::scalar(dim, 2.0), terminals::linear(c), 0.0, T};
}

ProblemSpec double_well(double T = 1.0) {
  return ProblemSpec{1, potentials::double_well(1, 0.25, 1.0), InertiaOperator::scalar(1, 2.0),
                     terminals::quadratic(Mat::Constant(1, 1, 0.5), vec1(-0.2)), 0.0, T};
}

std::vector<double> uniform_grid(double a, double b, int intervals) {
  std::vector<double> g;
  for (int i = 0; i <= intervals; ++i) g.push_back(a + (b - a) * i / intervals);
  return g;
}

ControlGrid constant_control(const std::vector<double>& times, const Vec& u) {
  return ControlGrid{times, std::vector<Vec>(times.size(), u)};
}

}  // namespace

TEST(ControlGrid, StateFromConstantControl) {
  const auto times = uniform_grid(0.5, 2.5, 20);
  const auto xs = state_from_control(0.5, vec({1.0, 0.0}), constant_control(times, vec({2.0, -1.0})));
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_LE((xs[i] - (vec({1.0, 0.0}) + vec({2.0, -1.0}) * (times[i] - 0.5))).norm(), 1e-13);
  }
}

TEST(ControlGrid, CostOfConstantControl) {
  const Vec c = vec({1.0, 3.0});
  const auto spec = free_particle(2, c, 2.0);
  const Vec u = vec({0.5, -1.0});
  const double J = cost_J(spec, 0.0, vec({0.0, 1.0}), constant_control(uniform_grid(0.0, 2.0, 10), u));
  EXPECT_NEAR(J, 0.5 * 2.0 * u.squaredNorm() * 2.0 + c.dot(vec({0.0, 1.0}) + 2.0 * u), 1e-13);
  EXPECT_NEAR(control_norm_sq(constant_control(uniform_grid(0.0, 3.0, 7), vec1(2.0))), 12.0, 1e-13);
}

TEST(ControlGrid, Validation) {
  const auto spec = double_well();
  ControlGrid two{{0.0, 1.0}, {vec1(0.0), vec1(0.0)}};
  EXPECT_THROW(cost_J(spec, 0.0, vec1(0.0), two), GridTooCoarse);
  ControlGrid short_span = constant_control(uniform_grid(0.0, 0.5, 4), vec1(0.0));
  EXPECT_THROW(cost_J(spec, 0.0, vec1(0.0), short_span), GridMismatch);
  ControlGrid ragged = constant_control(uniform_grid(0.0, 1.0, 4), vec1(0.0));
  ragged.u.pop_back();
  EXPECT_THROW(grad_u_residual(spec, 0.0, vec1(0.0), ragged), GridMismatch);
}

TEST(ControlGrid, ResidualIsTheFirstVariation) {
  std::mt19937_64 rng(40);
  const auto spec = double_well(1.0);
  const auto times = uniform_grid(0.0, 1.0, 400);
  const ControlGrid u = fourier_direction(rng, times, 1);
  const auto r = grad_u_residual(spec, 0.0, vec1(0.3), u);
  for (int trial = 0; trial < 5; ++trial) {
    const ControlGrid d = fourier_direction(rng, times, 1);
    std::vector<double> pairing(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) pairing[i] = r.u[i].dot(d.u[i]);
    const double predicted = simpson(times, pairing);
    const double eps = 1e-5;
    ControlGrid up = u, dn = u;
    for (std::size_t i = 0; i < times.size(); ++i) {
      up.u[i] += eps * d.u[i];
      dn.u[i] -= eps * d.u[i];
    }
    const double fd = (cost_J(spec, 0.0, vec1(0.3), up) - cost_J(spec, 0.0, vec1(0.3), dn)) / (2 * eps);
    EXPECT_NEAR(predicted, fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Residual, StackedFormMatchesGradient) {
  std::mt19937_64 rng(41);
  const auto spec = double_well();
  for (const Vec& xp : random_vectors(rng, 4, 2, 1.0)) {
    const Vec R = stationarity_residual(spec, 0.1, xp.head(1), xp.tail(1));
    const auto g = cost_gradient(spec, 0.1, xp.head(1), xp.tail(1));
    EXPECT_NEAR(R(0), g.grad_p(0), 1e-12);
    EXPECT_NEAR(R(1), xp(1) - g.grad_x(0), 1e-12);
  }
}

TEST(Argstat, MassSpringGenericMatchesClosedForm) {
  const auto params = mass_spring(3.0);
  const auto spec = ms::make_problem(params);
  const auto r = solve_argstat_p(spec, 0.4, vec1(0.7), vec1(0.0));
  const double oracle = *ms::classify_pbar(params, 0.4, 0.7).p_bar;
  EXPECT_EQ(r.classification, Classification::Unique);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.p_star(0), oracle, 1e-8 * std::abs(oracle));
  EXPECT_NEAR(r.p_star(0), 21.5801472221, 1e-8);
  EXPECT_LE(r.residual_gradp, 1e-8);
  EXPECT_LE(r.residual_fixedpoint, 1e-8);
  EXPECT_NEAR(r.value, ms::W_tilde(params, 0.4, 0.7, r.p_star(0)), 1e-9 * std::abs(r.value));
  EXPECT_GT(r.jacobian_sigma_min, 1e-3);
}

TEST(Argstat, TerminalVelocityEqualsPrescribed) {
  const auto params = mass_spring(3.0);
  const auto spec = ms::make_problem(params);
  for (double x : {-1.0, 0.2, 2.0}) {
    const auto r = solve_argstat_p(spec, 1.0, vec1(x), vec1(1.0));
    const double velocity_T = -r.trajectory.p.back()(0) / params.mass;
    EXPECT_NEAR(velocity_T, params.v, 1e-8) << x;
  }
}

TEST(Argstat, ValueConsistency) {
  const auto spec = double_well(1.0);
  const auto r = solve_argstat_p(spec, 0.0, vec1(0.8), vec1(0.0));
  ASSERT_EQ(r.classification, Classification::Unique);
  EXPECT_NEAR(r.value, cost_value(spec, 0.0, vec1(0.8), r.p_star), 1e-12);
  EXPECT_NEAR(r.value, action_along(spec, r.trajectory), 1e-12);
  EXPECT_NEAR(r.value, cost_J(spec, 0.0, vec1(0.8), induced_control(spec, r.trajectory)), 1e-8);
  const auto ru = grad_u_residual(spec, 0.0, vec1(0.8), induced_control(spec, r.trajectory));
  double worst = 0.0;
  for (const Vec& ri : ru.u) worst = std::max(worst, ri.norm());
  EXPECT_LE(worst, 1e-8);
}

TEST(Argstat, AgreesWithShooting) {
  for (const auto& spec : {double_well(1.0), ms::make_problem(mass_spring(3.0))}) {
    const auto a = solve_argstat_p(spec, 0.2, vec1(0.5), vec1(0.0));
    const auto b = solve_tpbvp_shooting(spec, 0.2, spec.T, vec1(0.5), vec1(0.0));
    EXPECT_TRUE(b.tpbvp_solved);
    EXPECT_NEAR(a.p_star(0), b.p_star(0), 1e-8 * std::max(1.0, std::abs(a.p_star(0))));
    ASSERT_TRUE(b.u21_sigma_min.has_value());
    EXPECT_GT(*b.u21_sigma_min, 0.0);
  }
}

TEST(Argstat, GridRefinementConverges) {
  const auto params = mass_spring(3.0);
  const auto spec = ms::make_problem(params);
  const double oracle = *ms::classify_pbar(params, 0.0, 1.0).p_bar;
  double previous = std::numeric_limits<double>::infinity();
  for (int n : {10, 40, 160}) {
    NewtonConfig cfg;
    cfg.integrator.intervals = n;
    cfg.tol_residual = 1e-10;
    const double err = std::abs(solve_argstat_p(spec, 0.0, vec1(1.0), vec1(0.0), cfg).p_star(0) - oracle);
    EXPECT_LT(err, previous) << n;
    previous = err;
  }
  EXPECT_LE(previous, 1e-6);
}

TEST(Argstat, MultidimensionalQuadratic) {
  Mat K(2, 2);
  K << 1.0, 0.3, 0.3, 0.5;
  const ProblemSpec spec{2, potentials::quadratic(K), InertiaOperator::diagonal(vec({2.0, 3.0})),
                         terminals::quadratic(Mat::Identity(2, 2) * 0.1, vec({0.5, -0.5})), 0.0, 1.2};
  const auto r = solve_argstat_p(spec, 0.0, vec({0.3, -0.4}), Vec::Zero(2));
  EXPECT_EQ(r.classification, Classification::Unique);
  const auto g = cost_gradient(spec, 0.0, vec({0.3, -0.4}), r.p_star);
  EXPECT_LE(g.grad_p.norm(), 1e-8);
  EXPECT_LE((r.p_star - g.grad_x).norm(), 1e-8);
}

TEST(Argstat, HalfPeriodIsUnique) {
  const auto params = mass_spring_at_phase(kPi);
  const auto r = solve_argstat_p(ms::make_problem(params), 0.0, vec1(1.0), vec1(0.0));
  EXPECT_EQ(r.classification, Classification::Unique);
  EXPECT_NEAR(r.p_star(0), -10.0, 1e-7);
}

TEST(Argstat, QuarterPhaseOnRayIsFamily) {
  const auto params = mass_spring_at_phase(3.5 * kPi);
  const double ray = params.v / params.omega();
  const auto r = solve_argstat_p(ms::make_problem(params), 0.0, vec1(ray), vec1(0.0));
  EXPECT_EQ(r.classification, Classification::Family);
  EXPECT_EQ(r.family_dim, 1);
  ASSERT_TRUE(r.family_value_spread.has_value());
  EXPECT_LE(*r.family_value_spread, 1e-6);
  EXPECT_EQ(ms::classify_pbar(params, 0.0, ray).kind, ms::CaseKind::QuarterFamily);
}

TEST(Argstat, QuarterPhaseOffRayIsNonexistent) {
  const auto params = mass_spring_at_phase(kPi / 2);
  const auto spec = ms::make_problem(params);
  const auto r = solve_argstat_p(spec, 0.0, vec1(1.0), vec1(0.0));
  EXPECT_EQ(r.classification, Classification::Nonexistent);
  EXPECT_FALSE(r.converged);
  EXPECT_THROW(solve_tpbvp_shooting(spec, 0.0, spec.T, vec1(1.0), vec1(0.0)), NonConvergence);
}

TEST(Argstat, IterationBudget) {
  const auto spec = double_well(1.0);
  NewtonConfig cfg;
  cfg.max_iters = 1;
  cfg.tol_residual = 1e-14;
  try {
    solve_argstat_p(spec, 0.0, vec1(0.8), vec1(40.0), cfg);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.best().iterations, 1);
    EXPECT_FALSE(e.best().converged);
  }
  EXPECT_EQ(to_string(Classification::Family), "family");
}

TEST(Verification, RestartedGradientVanishesAlongSolution) {
  const auto spec = double_well(1.0);
  const auto r = solve_argstat_p(spec, 0.0, vec1(0.8), vec1(0.0));
  const auto samples = interior_samples(0.0, 1.0, 10);
  const auto rep = verify_stationarity(spec, r, samples);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.sample_times.size(), 11u);
  EXPECT_DOUBLE_EQ(rep.sample_times.front(), 0.0);

  const auto off = evaluate_momentum(spec, 0.0, vec1(0.8), r.p_star + vec1(0.1));
  EXPECT_FALSE(verify_stationarity(spec, off, samples).passed);
}

TEST(Verification, InteriorSamples) {
  const auto s = interior_samples(0.0, 1.0, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0], 0.25);
  EXPECT_DOUBLE_EQ(s[2], 0.75);
  EXPECT_TRUE(interior_samples(0.0, 1.0, 0).empty());
}

TEST(Hjb, ResidualsAreSmall) {
  const auto spec = double_well(1.0);
  const auto samples = interior_samples(0.0, 1.0, 5);
  const auto rep = hjb_residual(spec, 0.0, vec1(0.7), vec1(-0.4), samples);
  EXPECT_LE(rep.max(), 1e-4);
  const auto ms_spec = ms::make_problem(mass_spring(3.0));
  EXPECT_LE(hjb_residual(ms_spec, 0.0, vec1(0.7), vec1(2.0), interior_samples(0.0, 3.0, 5)).max(), 1e-4);
}

TEST(Hjb, StencilMustFit) {
  const auto spec = double_well(1.0);
  std::vector<double> none;
  EXPECT_THROW(hjb_residual(spec, 0.0, vec1(0.7), vec1(0.0), none), GridTooCoarse);
  std::vector<double> edge{1e-5};
  EXPECT_THROW(hjb_residual(spec, 0.0, vec1(0.7), vec1(0.0), edge), GridTooCoarse);
}

TEST(Convexity, ShortHorizonCertificate) {
  std::mt19937_64 rng(42);
  const auto spec = ms::make_problem(mass_spring(1.0));
  const auto times = uniform_grid(0.0, 1.0, 200);
  std::vector<ControlGrid> dirs;
  for (int k = 0; k < 10; ++k) dirs.push_back(fourier_direction(rng, times, 1));
  const auto rep = convexity_certificate(spec, 0.0, vec1(0.5), constant_control(times, vec1(0.1)), dirs);
  EXPECT_DOUBLE_EQ(rep.m, 5.0);
  EXPECT_DOUBLE_EQ(rep.K, 2.0);
  EXPECT_DOUBLE_EQ(rep.coefficient, 3.0);
  EXPECT_TRUE(rep.bound_applicable);
  EXPECT_TRUE(rep.all_passed);
  EXPECT_FALSE(rep.any_negative);
  EXPECT_EQ(rep.directions.size(), 10u);
}

TEST(Convexity, LongHorizonSecondVariation) {
  const auto params = mass_spring(10.0);
  const auto spec = ms::make_problem(params);
  const double tau = 10.0;
  const auto times = uniform_grid(0.0, tau, 2000);
  ControlGrid d{times, {}};
  for (double s : times) d.u.push_back(vec1(std::cos(kPi * s / tau)));
  std::vector<ControlGrid> dirs{d};
  const auto rep = convexity_certificate(spec, 0.0, vec1(0.0), constant_control(times, vec1(0.0)), dirs);
  const double expected = 0.5 * tau * (params.mass - params.kappa * tau * tau / (kPi * kPi));
  EXPECT_NEAR(rep.directions[0].quadratic_form, expected, 1e-5 * std::abs(expected));
  EXPECT_TRUE(rep.any_negative);
  EXPECT_FALSE(rep.bound_applicable);
}

TEST(Convexity, DirectionMustShareGrid) {
  const auto spec = ms::make_problem(mass_spring(1.0));
  std::vector<ControlGrid> dirs{constant_control(uniform_grid(0.0, 1.0, 10), vec1(1.0))};
  EXPECT_THROW(
      convexity_certificate(spec, 0.0, vec1(0.0), constant_control(uniform_grid(0.0, 1.0, 20), vec1(0.0)), dirs),
      GridMismatch);
}

TEST(StationarySet, DeduplicatesUniqueSolutions) {
  const auto spec = ms::make_problem(mass_spring(3.0));
  const std::vector<Vec> seeds{vec1(-50.0), vec1(0.0), vec1(50.0)};
  const auto set = stationary_value(spec, 0.4, vec1(0.7), seeds);
  EXPECT_EQ(set.seeds, 3u);
  ASSERT_EQ(set.members.size(), 1u);
  EXPECT_TRUE(set.has_unique());
  EXPECT_FALSE(set.has_family());
}

TEST(StationarySet, DegenerateCases) {
  const std::vector<Vec> seeds{vec1(-5.0), vec1(0.0), vec1(5.0)};
  const auto fam = mass_spring_at_phase(3.5 * kPi);
  const auto family_set = stationary_value(ms::make_problem(fam), 0.0, vec1(fam.v / fam.omega()), seeds);
  EXPECT_TRUE(family_set.has_family());
  EXPECT_EQ(family_set.members.size(), 1u);
  const auto none = stationary_value(ms::make_problem(mass_spring_at_phase(kPi / 2)), 0.0, vec1(1.0), seeds);
  EXPECT_TRUE(none.members.empty());
  EXPECT_EQ(none.nonexistent, 3u);
}

TEST(StationarySet, ParallelRunIsDeterministic) {
  const auto spec = double_well(1.0);
  std::mt19937_64 rng(43);
  const auto seeds = random_vectors(rng, 6, 1, 3.0);
  const auto serial = stationary_value(spec, 0.0, vec1(0.8), seeds, {}, 1);
  const auto parallel = stationary_value(spec, 0.0, vec1(0.8), seeds, {}, 4);
  ASSERT_EQ(serial.members.size(), parallel.members.size());
  for (std::size_t i = 0; i < serial.members.size(); ++i) {
    EXPECT_EQ(serial.members[i].p_star(0), parallel.members[i].p_star(0));
    EXPECT_EQ(serial.members[i].value, parallel.members[i].value);
  }
  EXPECT_EQ(serial.nonconverged, parallel.nonconverged);
}
