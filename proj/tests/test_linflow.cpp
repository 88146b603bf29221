#include <doctest.h>

#include <random>

#include "qopf/exactflow.hpp"
#include "qopf/linflow.hpp"
#include "support.hpp"

using namespace qopf;

TEST_CASE("constant-impedance loads only: B vanishes, C absorbs the loads") {
  FeederModel f = testing::chain(4, {0.01, 0.02});
  f.loads.push_back(testing::load(1, 0.0, 0.0, {0.1, 0.05}));
  f.loads.push_back(testing::load(3, 0.0, 0.0, {0.2, 0.0}));
  const AdmittanceSystem adm = build_admittance(f);
  const LinearFlowModel m = linearize(f, adm);
  CHECK(m.B.cwiseAbs().maxCoeff() == 0.0);
  Eigen::MatrixXcd expected = adm.YNN;
  expected(0, 0) += Complex(0.1, -0.05);
  expected(2, 2) += Complex(0.2, 0.0);
  CHECK((m.C - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("B is diagonal in single-phase mode") {
  const FeederModel f = testing::random_feeder(5);
  const LinearFlowModel m = linearize(f, build_admittance(f));
  Eigen::MatrixXcd off = m.B;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus: linear voltage against the closed-form solution") {
  const FeederModel f = testing::two_bus(false);
  const LinearFlowModel m = linearize(f, build_admittance(f));
  const Complex exact = testing::two_bus_exact({0.01, 0.01}, {0.1, 0.05}, 1.0);
  const double delta = std::abs(1.0 - exact);
  CHECK(std::abs(m.U(0) - exact) <= laurent_error_bound(delta));
  // Cross-check the closed form against the fixed-point oracle.
  const ExactFlowReport rep = fixed_point_flow(f, build_admittance(f), Eigen::VectorXcd());
  REQUIRE(rep.converged);
  CHECK(std::abs(rep.v(1) - exact) < 1e-12);
}

TEST_CASE("no generators: W has no columns and V = U") {
  const FeederModel f = testing::two_bus(false);
  const LinearFlowModel m = linearize(f, build_admittance(f));
  CHECK(m.W.cols() == 0);
  const VoltageSolution sol = solve_linear_flow(m, Eigen::VectorXcd());
  CHECK((sol.v - m.U).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero dispatch reproduces U exactly") {
  const FeederModel f = testing::random_feeder(9);
  const LinearFlowModel m = linearize(f, build_admittance(f));
  const VoltageSolution sol = solve_linear_flow(m, Eigen::VectorXcd::Zero(m.variable_count()));
  CHECK((sol.v - m.U).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.max_drop == doctest::Approx(max_drop(m.U, m.nominal)));
}

TEST_CASE("sensitivity form equals a direct solve") {
  std::mt19937_64 rng(42);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FeederModel f = testing::random_feeder(seed);
    const LinearFlowModel m = linearize(f, build_admittance(f));
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXcd s = testing::random_dispatch(f, rng);
      const VoltageSolution a = solve_linear_flow(m, s);
      const VoltageSolution b = solve_linear_flow_direct(m, s);
      CHECK((a.v - b.v).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("linear flow is affine in the dispatch") {
  std::mt19937_64 rng(1);
  const FeederModel f = testing::random_feeder(21);
  const LinearFlowModel m = linearize(f, build_admittance(f));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXcd s1 = testing::random_dispatch(f, rng), s2 = testing::random_dispatch(f, rng);
    const double a = u(rng);
    const Eigen::VectorXcd mixed = solve_linear_flow(m, a * s1 + (1 - a) * s2).v;
    const Eigen::VectorXcd combo = a * solve_linear_flow(m, s1).v + (1 - a) * solve_linear_flow(m, s2).v;
    CHECK((mixed - combo).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("generation at the load bus raises the voltage") {
  const FeederModel f = testing::two_bus();
  const AdmittanceSystem adm = build_admittance(f);
  const LinearFlowModel m = linearize(f, adm);
  const Eigen::VectorXcd s = testing::cvec({{0.1, 0.05}});
  const VoltageSolution sol = solve_linear_flow(m, s);
  CHECK(std::abs(1.0 - sol.v(0)) < std::abs(1.0 - m.U(0)));
  const ExactFlowReport rep = sweep_radial(f, s);
  REQUIRE(rep.converged);
  const ExactFlowReport base = sweep_radial(f, Eigen::VectorXcd::Zero(1));
  CHECK(std::abs(1.0 - rep.v(1)) < std::abs(1.0 - base.v(1)));
  // A positive real injection raises the real voltage component.
  const Eigen::VectorXcd p = testing::cvec({{0.05, 0.0}});
  CHECK(solve_linear_flow(m, p).v(0).real() > m.U(0).real());
}

TEST_CASE("without constant-power loads the linear flow is exact") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const FeederModel f = testing::without_constant_power(testing::random_feeder(seed));
    const AdmittanceSystem adm = build_admittance(f);
    const LinearFlowModel m = linearize(f, adm);
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(m.variable_count());
    const ExactFlowReport rep = sweep_radial(f, zero);
    REQUIRE(rep.converged);
    CHECK((solve_linear_flow(m, zero).v - rep.v_n(1)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("Laurent bound") {
  CHECK(laurent_error_bound(0.0) == 0.0);
  CHECK(laurent_error_bound(0.3) == doctest::Approx(0.09 / 0.7));
  CHECK(laurent_error_bound(0.3) == doctest::Approx(0.1286).epsilon(1e-3));
  CHECK_THROWS_AS(laurent_error_bound(1.0), ValidationError);
  CHECK_THROWS_AS(laurent_error_bound(-0.1), ValidationError);

  // v = 0.9: 1/v = 1.1111, 2 - v = 1.1.
  CHECK(std::abs(1.0 / 0.9 - 1.1) <= laurent_error_bound(0.1) + 1e-15);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double delta = 0.3, bound = laurent_error_bound(delta);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double r = delta * std::sqrt(u(rng)), th = 2 * M_PI * u(rng);
    const Complex v = 1.0 - std::polar(r, th);
    const double err = std::abs(1.0 / std::conj(v) - (2.0 - std::conj(v)));
    worst = std::max(worst, err);
    CHECK(err <= bound * (1 + 1e-12));
  }
  CHECK(worst > 0.5 * bound);
}

TEST_CASE("linearization errors") {
  FeederModel f = testing::two_bus();
  f.slack_voltage(0) = std::polar(1.0, 0.1);
  CHECK_THROWS_AS(linearize(f, build_admittance(f)), ValidationError);

  const FeederModel g = testing::two_bus();
  const LinearFlowModel m = linearize(g, build_admittance(g));
  CHECK_THROWS_AS(solve_linear_flow(m, Eigen::VectorXcd::Zero(2)), ValidationError);
  CHECK_THROWS_AS(solve_linear_flow_direct(m, Eigen::VectorXcd::Zero(0)), ValidationError);
}

TEST_CASE("singular M is reported with a condition estimate") {
  // A load whose linearized admittance cancels the branch: C = 1/z + conj(s_z).
  FeederModel f = testing::chain(2, {0.0, 0.1});
  f.loads.push_back(testing::load(1, 0.0, 0.0, {0.0, -10.0}));
  try {
    linearize(f, build_admittance(f));
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find("condition") != std::string::npos);
  }
}
