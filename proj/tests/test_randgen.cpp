#include <doctest.h>

#include <cmath>
#include <functional>
#include <queue>

#include "qopf/exactflow.hpp"
#include "qopf/randgen.hpp"
#include "support.hpp"

using namespace qopf;

namespace {

bool connected_tree(const FeederModel& f) {
  const int n = f.bus_count();
  if (static_cast<int>(f.branches.size()) != n - 1) return false;
  std::vector<std::vector<int>> adj(n);
  for (const Branch& b : f.branches) {
    adj[b.from].push_back(b.to);
    adj[b.to].push_back(b.from);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) seen[v] = 1, ++count, q.push(v);
    }
  }
  return count == n;
}

// Pearson statistic of `values` against a uniform distribution on [lo, hi].
double chi_square(const std::vector<double>& values, double lo, double hi, int bins) {
  std::vector<int> counts(bins, 0);
  for (double v : values) ++counts[std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins))];
  const double expected = static_cast<double>(values.size()) / bins;
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

}  // namespace

TEST_CASE("same seed, same feeder") {
  GenParams p;
  p.seed = 12345;
  CHECK(feeder_to_json(generate(p)) == feeder_to_json(generate(p)));
  GenParams q = p;
  q.seed = 12346;
  CHECK(feeder_to_json(generate(p)) != feeder_to_json(generate(q)));
}

TEST_CASE("generated feeders are radial and within their parameter ranges") {
  const GenParams d;
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const FeederModel f = testing::random_feeder(seed);
    const int n = f.bus_count();
    CHECK(n >= 30);
    CHECK(n <= 60);
    CHECK(connected_tree(f));
    CHECK_NOTHROW(validate(f));
    for (const Branch& b : f.branches) {
      CHECK(b.from < b.to);
      CHECK(b.z(0, 0).real() >= d.r.lo);
      CHECK(b.z(0, 0).real() <= d.r.hi);
      CHECK(b.z(0, 0).imag() >= d.x.lo);
      CHECK(b.z(0, 0).imag() <= d.x.hi);
      CHECK(b.y_shunt(0, 0).imag() >= d.b.lo);
      CHECK(b.y_shunt(0, 0).imag() <= d.b.hi);
    }
    REQUIRE(static_cast<int>(f.loads.size()) == n - 1);
    int n_p = 0, n_i = 0, n_z = 0;
    for (const ZipLoad& l : f.loads) {
      const Complex s = l.s_p(0) + l.s_i(0) + l.s_z(0);
      CHECK(std::abs(s) <= d.load.hi + 1e-15);
      if (std::abs(s) > 0.0) {
        const double pf = s.real() / std::abs(s);
        CHECK(pf >= d.pf.lo - 1e-12);
        CHECK(pf <= d.pf.hi + 1e-12);
      }
      n_p += l.s_p(0) != Complex(0.0);
      n_i += l.s_i(0) != Complex(0.0);
      n_z += l.s_z(0) != Complex(0.0);
    }
    CHECK(n_p == std::lround(0.5 * n));
    CHECK(std::abs(n_i - n_z) <= 1);
    CHECK(static_cast<long>(f.generators.size()) == std::max(1L, std::lround(0.05 * n)));
    double total = 0.0;
    for (const ZipLoad& l : f.loads) total += std::abs(l.s_p(0) + l.s_i(0) + l.s_z(0));
    for (const Generator& g : f.generators) {
      CHECK(g.s_min(0) == Complex(0.0));
      CHECK(g.s_max(0).real() == g.s_max(0).imag());
      CHECK(g.s_max(0).real() >= 0.5 * total / f.generators.size() - 1e-12);
      CHECK(g.s_max(0).real() <= 1.5 * total / f.generators.size() + 1e-12);
    }
  }
}

TEST_CASE("sampled parameters are uniform") {
  std::vector<double> n_values, r_values, x_values, pf_values;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const FeederModel f = testing::random_feeder(seed);
    n_values.push_back(f.bus_count());
    r_values.push_back(f.branches[0].z(0, 0).real());
    x_values.push_back(f.branches[0].z(0, 0).imag());
    const Complex s = f.loads[0].s_p(0) + f.loads[0].s_i(0) + f.loads[0].s_z(0);
    pf_values.push_back(s.real() / std::abs(s));
  }
  // 99% quantiles of chi-square with 30 and 9 degrees of freedom.
  CHECK(chi_square(n_values, 30.0, 61.0, 31) < 50.89);
  CHECK(chi_square(r_values, 0.001, 0.017, 10) < 21.67);
  CHECK(chi_square(x_values, 0.001, 0.017, 10) < 21.67);
  CHECK(chi_square(pf_values, 0.7, 1.0, 10) < 21.67);
}

TEST_CASE("default fleet stays in the approximation regime") {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const FeederModel f = testing::random_feeder(seed);
    const ExactFlowReport rep = sweep_radial(f, Eigen::VectorXcd::Zero(f.generator_variable_count()));
    if (rep.converged && rep.v.cwiseAbs().minCoeff() >= 0.7) ++good;
  }
  CHECK(good >= 900);
}

TEST_CASE("uniform integers cover their range") {
  Rng rng(7);
  std::vector<int> counts(5, 0);
  for (int k = 0; k < 5000; ++k) {
    const int v = rng.uniform_int(3, 7);
    REQUIRE(v >= 3);
    REQUIRE(v <= 7);
    ++counts[v - 3];
  }
  for (int c : counts) CHECK(c > 850);
  Rng a(1), b(1);
  for (int k = 0; k < 100; ++k) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("parameter validation and parsing") {
  GenParams p;
  p.n_min = 10;
  p.n_max = 5;
  CHECK_THROWS_AS(validate(p), ValidationError);
  p = GenParams{};
  p.pf = {0.9, 0.8};
  CHECK_THROWS_AS(generate(p), ValidationError);
  p = GenParams{};
  p.dg_fraction = 1.5;
  CHECK_THROWS_AS(validate(p), ValidationError);

  const GenParams q = parse_gen_params(R"({"n_min": 10, "n_max": 12, "load": [0, 0.1], "seed": 4})");
  CHECK(q.n_min == 10);
  CHECK(q.n_max == 12);
  CHECK(q.load.hi == 0.1);
  CHECK(q.seed == 4u);
  CHECK(q.r.hi == 0.017);
  CHECK_THROWS_AS(parse_gen_params(R"({"r": [1]})"), ValidationError);
  CHECK_THROWS_AS(parse_gen_params("[1, 2]"), ValidationError);
  CHECK_THROWS_AS(parse_gen_params("{"), ValidationError);
}
