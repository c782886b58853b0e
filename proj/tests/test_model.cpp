#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stataction/errors.hpp"
#include "stataction/model.hpp"
#include "stataction/problem_io.hpp"
#include "support.hpp"

using namespace stataction;
using namespace testing_support;

namespace {

ProblemSpec free_particle(int dim, const Vec& c) {
  return ProblemSpec{dim, potentials::zero(dim), InertiaOperator::scalar(dim, 1.0), terminals::linear(c), 0.0, 1.0};
}

}  // namespace

TEST(Hamiltonian, MassSpringAtRestPosition) {
  const auto spec = ms::make_problem(mass_spring());
  EXPECT_NEAR(hamiltonian(spec, vec1(0.0), vec1(std::sqrt(10.0))), 1.0, 1e-14);
}

TEST(Hamiltonian, ZeroMomentumIsPotential) {
  const auto spec = ProblemSpec{2, potentials::double_well(2, 0.5, 1.5), InertiaOperator::diagonal(vec({1.0, 3.0})),
                                terminals::zero(2), 0.0, 1.0};
  const Vec x = vec({0.3, -1.1});
  EXPECT_DOUBLE_EQ(hamiltonian(spec, x, Vec::Zero(2)), spec.potential.value(x));
}

TEST(Hamiltonian, FreeParticleKineticEnergy) {
  const auto spec = free_particle(2, Vec::Zero(2));
  EXPECT_DOUBLE_EQ(hamiltonian(spec, vec({7.0, -2.0}), vec({3.0, 4.0})), 12.5);
}

TEST(Hamiltonian, RejectsWrongDimension) {
  const auto spec = free_particle(2, Vec::Zero(2));
  EXPECT_THROW(hamiltonian(spec, Vec::Zero(3), Vec::Zero(2)), DimensionError);
}

TEST(ExtendedHamiltonian, ReducesToEnergyWithMatchingMultipliers) {
  const auto spec = ProblemSpec{1, potentials::pendulum(1, 2.0), InertiaOperator::scalar(1, 3.0),
                                terminals::zero(1), 0.0, 1.0};
  const Vec x = vec1(0.4), p = vec1(-1.7);
  EXPECT_NEAR(extended_hamiltonian(spec, x, p, p, Vec::Zero(1)), hamiltonian(spec, x, p), 1e-14);
}

TEST(ExtendedHamiltonian, ZeroMultipliers) {
  const auto spec = ms::make_problem(mass_spring());
  const Vec x = vec1(1.2), p = vec1(2.0);
  EXPECT_NEAR(extended_hamiltonian(spec, x, p, Vec::Zero(1), Vec::Zero(1)), -0.5 * 4.0 / 5.0 + 0.5 * 1.44, 1e-14);
}

TEST(ExtendedHamiltonian, VanishesAtRestOrigin) {
  const auto spec = ms::make_problem(mass_spring());
  EXPECT_EQ(extended_hamiltonian(spec, vec1(0.0), vec1(0.0), vec1(3.0), vec1(-8.0)), 0.0);
  EXPECT_THROW(extended_hamiltonian(spec, vec1(0.0), vec1(0.0), Vec::Zero(2), vec1(0.0)), DimensionError);
}

TEST(RunningCost, Examples) {
  const auto ms_spec = ms::make_problem(mass_spring());
  EXPECT_NEAR(running_cost(ms_spec, vec1(1.0), vec1(5.0)), 2.0, 1e-14);
  EXPECT_NEAR(running_cost(ms_spec, vec1(1.5), vec1(0.0)), -ms_spec.potential.value(vec1(1.5)), 1e-14);
  const auto fp = free_particle(2, Vec::Zero(2));
  EXPECT_DOUBLE_EQ(running_cost(fp, vec({4.0, 4.0}), vec({1.0, 0.0})), 0.5);
  const Vec g = running_cost_gradient(ms_spec, vec1(2.0), vec1(5.0));
  EXPECT_NEAR(g(0), -2.0, 1e-14);
  EXPECT_NEAR(g(1), 1.0, 1e-14);
}

TEST(RunningCost, EnergyPlusLagrangianIsTwiceKinetic) {
  std::mt19937_64 rng(11);
  const Mat stiffness = vec({1.0, 2.0, 0.5}).asDiagonal();
  Mat M(3, 3);
  M << 2.0, 0.3, 0.0, 0.3, 1.5, 0.2, 0.0, 0.2, 1.0;
  const ProblemSpec spec{3, potentials::quadratic(stiffness), InertiaOperator(M), terminals::zero(3), 0.0, 1.0};
  for (int k = 0; k < 50; ++k) {
    const auto xp = random_vectors(rng, 2, 3, 4.0);
    const double lhs = hamiltonian(spec, xp[0], xp[1]) + running_cost(spec, xp[0], xp[1]);
    EXPECT_NEAR(lhs, xp[1].dot(spec.inertia.apply_inverse(xp[1])), 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST(InertiaOperator, RejectsNonSymmetric) {
  Mat M(2, 2);
  M << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(InertiaOperator{M}, InvalidInertia);
}

TEST(InertiaOperator, RejectsIndefinite) {
  EXPECT_THROW(InertiaOperator::diagonal(vec({1.0, -2.0})), InvalidInertia);
  EXPECT_THROW(InertiaOperator::scalar(2, 0.0), InvalidInertia);
}

TEST(InertiaOperator, InverseAccuracyOnRandomSpd) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int dim : {1, 2, 5, 8}) {
    Mat A(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) A(i, j) = n(rng);
    const Mat M = A * A.transpose() + Mat::Identity(dim, dim);
    const InertiaOperator op(M);
    EXPECT_LE((op.matrix() * op.inverse() - Mat::Identity(dim, dim)).norm(), 1e-12 * dim);
    Eigen::SelfAdjointEigenSolver<Mat> eig(M);
    EXPECT_NEAR(op.coercivity(), eig.eigenvalues().minCoeff(), 1e-12);
  }
}

TEST(ConvexityHorizon, ClosedFormAgreesWithBisection) {
  for (double r : {1e-3, 0.1, 0.5, 0.999, 1.0, 1.001, 2.5, 17.0, 1e4}) {
    const double h = convexity_horizon(r);
    EXPECT_NEAR(std::max(h, 1.0) * h, r, 1e-12 * std::max(1.0, r));
    EXPECT_NEAR(h, horizon_bisection(r), 1e-12 * std::max(1.0, h));
  }
  EXPECT_TRUE(std::isinf(convexity_horizon(std::numeric_limits<double>::infinity())));
}

TEST(CheckAssumptions, MassSpring) {
  const auto spec = ms::make_problem(mass_spring());
  std::vector<Vec> samples{vec1(-3.0), vec1(0.0), vec1(2.0)};
  const auto rep = check_assumptions(spec, samples);
  EXPECT_DOUBLE_EQ(rep.m_est, 5.0);
  EXPECT_DOUBLE_EQ(rep.K_est, 2.0);
  EXPECT_NEAR(rep.horizon_bound, horizon_bisection(2.5), 1e-12);
  EXPECT_NEAR(rep.horizon_bound, 1.5811, 1e-4);
  EXPECT_TRUE(rep.holds_on_samples);
}

TEST(CheckAssumptions, FreeParticleIsUnbounded) {
  const auto spec = ProblemSpec{2, potentials::zero(2), InertiaOperator::scalar(2, 1.0), terminals::zero(2), 0.0, 1.0};
  std::vector<Vec> samples{Vec::Zero(2), vec({1.0, 1.0})};
  const auto rep = check_assumptions(spec, samples);
  EXPECT_EQ(rep.K_est, 0.0);
  EXPECT_TRUE(rep.unbounded());
}

TEST(CheckAssumptions, AnisotropicMassWithQuadraticTerminal) {
  const ProblemSpec spec{2, potentials::quadratic(Mat::Identity(2, 2)), InertiaOperator::diagonal(vec({1.0, 4.0})),
                         terminals::quadratic(Mat::Identity(2, 2), Vec::Zero(2)), 0.0, 1.0};
  std::vector<Vec> samples{vec({0.5, -0.5})};
  const auto rep = check_assumptions(spec, samples);
  EXPECT_DOUBLE_EQ(rep.m_est, 1.0);
  EXPECT_DOUBLE_EQ(rep.K_est, 2.0);
  EXPECT_NEAR(rep.horizon_bound, horizon_bisection(0.5), 1e-12);
  EXPECT_NEAR(rep.horizon_bound, 0.5, 1e-12);
}

TEST(CheckAssumptions, MonotoneInSampleSet) {
  const ProblemSpec spec{1, potentials::double_well(1, 0.3, 1.0), InertiaOperator::scalar(1, 2.0), terminals::zero(1),
                         0.0, 1.0};
  std::mt19937_64 rng(5);
  std::vector<Vec> samples;
  double previous = 0.0;
  for (const Vec& s : random_vectors(rng, 40, 1, 3.0)) {
    samples.push_back(s);
    const double K = check_assumptions(spec, samples).K_est;
    EXPECT_GE(K, previous);
    previous = K;
  }
}

TEST(CheckAssumptions, DeclaredBoundViolationIsReported) {
  ProblemSpec spec{1, potentials::double_well(1, 1.0, 1.0), InertiaOperator::scalar(1, 1.0), terminals::zero(1), 0.0,
                   1.0};
  spec.potential.hessian_bound_K = 1.0;
  std::vector<Vec> samples{vec1(2.0)};
  EXPECT_FALSE(check_assumptions(spec, samples).holds_on_samples);
}

TEST(CheckAssumptions, Errors) {
  const auto spec = ms::make_problem(mass_spring());
  std::vector<Vec> none;
  EXPECT_THROW(check_assumptions(spec, none), Error);
  std::vector<Vec> wrong{Vec::Zero(2)};
  EXPECT_THROW(check_assumptions(spec, wrong), DimensionError);
}

TEST(BuiltinFields, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  Mat K(3, 3);
  K << 2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 3.0;
  const std::vector<PotentialField> fields{potentials::zero(3), potentials::quadratic(K),
                                           potentials::double_well(3, 0.25, 1.2), potentials::pendulum(3, 1.5),
                                           potentials::polynomial(3, {0.5, -1.0, 0.3, 0.2, 0.05})};
  const auto samples = random_vectors(rng, 20, 3, 2.0);
  for (const auto& f : fields) {
    const auto check = check_derivatives(f, samples);
    EXPECT_LE(check.gradient_rel_error, 1e-6) << f.kind;
    EXPECT_LE(check.hessian_rel_error, 1e-5) << f.kind;
    for (const Vec& x : samples) {
      const Mat H = f.hessian(x);
      EXPECT_LE((H - H.transpose()).norm(), 1e-12) << f.kind;
    }
  }
  const std::vector<TerminalCost> terminals_{terminals::zero(3), terminals::linear(vec({1.0, -2.0, 0.5})),
                                             terminals::quadratic(K, vec({0.1, 0.2, 0.3}))};
  for (const auto& f : terminals_) {
    const auto check = check_derivatives(f, samples);
    EXPECT_LE(check.gradient_rel_error, 1e-6) << f.kind;
    EXPECT_LE(check.hessian_rel_error, 1e-5) << f.kind;
  }
}

TEST(BuiltinFields, DeclaredHessianBoundsHoldOnSamples) {
  std::mt19937_64 rng(23);
  Mat K(2, 2);
  K << 3.0, 1.0, 1.0, -2.0;
  for (const auto& f : {potentials::quadratic(K), potentials::pendulum(2, 0.7), potentials::zero(2)}) {
    ASSERT_TRUE(f.hessian_bound_K.has_value());
    for (const Vec& x : random_vectors(rng, 50, 2, 10.0)) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(f.hessian(x));
      EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.5 * *f.hessian_bound_K + 1e-12) << f.kind;
    }
  }
}

TEST(BuiltinFields, DoubleWellCurvatureAtMinimum) {
  const double a = 0.7, b = 2.0;
  const auto f = potentials::double_well(1, a, b);
  EXPECT_NEAR(f.hessian(vec1(std::sqrt(b)))(0, 0), 8.0 * a * b, 1e-12);
  EXPECT_NEAR(f.hessian(vec1(-std::sqrt(b)))(0, 0), 8.0 * a * b, 1e-12);
  EXPECT_NEAR(f.value(vec1(std::sqrt(b))), 0.0, 1e-14);
}

TEST(ProblemIo, ParsesAllInertiaForms) {
  const auto base = R"({"dim":2,"potential":{"kind":"zero"},"terminal":{"kind":"zero"},"T":2.0})"_json;
  for (const auto& inertia : {R"(3.0)"_json, R"([1.0, 2.0])"_json, R"({"matrix":[[2,0.5],[0.5,1]]})"_json,
                              R"({"diag":[1,4]})"_json, R"({"scalar":2})"_json}) {
    auto doc = base;
    doc["inertia"] = inertia;
    const ProblemSpec spec = problem_from_json(doc);
    EXPECT_EQ(spec.dim, 2);
    EXPECT_DOUBLE_EQ(spec.T, 2.0);
    EXPECT_DOUBLE_EQ(spec.t0, 0.0);
  }
}

TEST(ProblemIo, ParsesPotentialsAndTerminals) {
  const auto doc = R"({"dim":1,"inertia":5,"potential":{"kind":"quadratic","params":{"stiffness":1,"K":2}},
                      "terminal":{"kind":"velocity","params":{"v":-2}},"t0":0.5,"T":3})"_json;
  const ProblemSpec spec = problem_from_json(doc);
  EXPECT_DOUBLE_EQ(*spec.potential.hessian_bound_K, 2.0);
  EXPECT_DOUBLE_EQ(spec.terminal.value(vec1(1.0)), 10.0);
  EXPECT_DOUBLE_EQ(spec.t0, 0.5);
  for (const char* pot : {R"({"kind":"double_well","params":{"a":1,"b":2}})", R"({"kind":"pendulum","params":{"kappa":1}})",
                          R"({"kind":"polynomial","params":{"coefficients":[0,0,1]}})"}) {
    auto d = doc;
    d["potential"] = nlohmann::json::parse(pot);
    EXPECT_NO_THROW(problem_from_json(d)) << pot;
  }
  auto q = doc;
  q["terminal"] = R"({"kind":"quadratic","params":{"Q":2,"c":1}})"_json;
  EXPECT_DOUBLE_EQ(problem_from_json(q).terminal.value(vec1(1.0)), 2.0);
}

TEST(ProblemIo, Errors) {
  const auto good = R"({"dim":1,"inertia":1,"potential":{"kind":"zero"},"terminal":{"kind":"zero"},"T":1})"_json;
  auto bad_kind = good;
  bad_kind["potential"]["kind"] = "mystery";
  EXPECT_THROW(problem_from_json(bad_kind), ConfigError);
  auto missing = good;
  missing.erase("T");
  EXPECT_THROW(problem_from_json(missing), ConfigError);
  auto horizon = good;
  horizon["t0"] = 2.0;
  EXPECT_THROW(problem_from_json(horizon), ConfigError);
  auto inertia = good;
  inertia["inertia"] = -1.0;
  EXPECT_THROW(problem_from_json(inertia), InvalidInertia);
  auto dims = good;
  dims["dim"] = 2;
  dims["terminal"] = R"({"kind":"linear","params":{"c":[1,2,3]}})"_json;
  EXPECT_THROW(problem_from_json(dims), ConfigError);
  EXPECT_THROW(load_problem("/nonexistent/problem.json"), ConfigError);
}

TEST(ProblemSpec, ValidateCatchesInconsistentMembers) {
  ProblemSpec spec{2, potentials::zero(3), InertiaOperator::scalar(2, 1.0), terminals::zero(2), 0.0, 1.0};
  EXPECT_THROW(spec.validate(), DimensionError);
  ProblemSpec horizon{1, potentials::zero(1), InertiaOperator::scalar(1, 1.0), terminals::zero(1), 1.0, 0.5};
  EXPECT_THROW(horizon.validate(), ConfigError);
}
