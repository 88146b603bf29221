#include "qopf/randgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace qopf {

namespace {

void check_range(const Range& r, const char* name) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi) {
    throw ValidationError(std::string("parameter range '") + name + "' is empty");
  }
}

void check_fraction(double f, const char* name) {
  if (!(f >= 0.0 && f <= 1.0)) throw ValidationError(std::string("parameter '") + name + "' must lie in [0, 1]");
}

}  // namespace

void validate(const GenParams& p) {
  if (p.n_min < 2 || p.n_min > p.n_max) throw ValidationError("node count range must satisfy 2 <= n_min <= n_max");
  check_range(p.r, "r");
  check_range(p.x, "x");
  check_range(p.b, "b");
  check_range(p.load, "load");
  check_range(p.pf, "pf");
  check_range(p.capacity, "capacity");
  if (p.pf.lo < 0.0 || p.pf.hi > 1.0) throw ValidationError("power factor range must lie in [0, 1]");
  if (p.r.lo < 0.0 || p.b.lo < 0.0 || p.load.lo < 0.0 || p.capacity.lo < 0.0) {
    throw ValidationError("r, b, load and capacity ranges must be non-negative");
  }
  if (p.r.hi == 0.0 && p.x.hi == 0.0 && p.x.lo == 0.0) {
    throw ValidationError("branch impedance range admits only zero");
  }
  check_fraction(p.const_power_fraction, "const_power_fraction");
  check_fraction(p.dg_fraction, "dg_fraction");
}

GenParams parse_gen_params(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("parameter file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("parameter file must hold a JSON object");
  GenParams p;
  try {
    auto range = [&](const char* key, Range& r) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (!v.is_array() || v.size() != 2) throw ValidationError(std::string("'") + key + "' must be a [lo, hi] pair");
      r = {v[0].get<double>(), v[1].get<double>()};
    };
    if (j.contains("n_min")) p.n_min = j.at("n_min").get<int>();
    if (j.contains("n_max")) p.n_max = j.at("n_max").get<int>();
    range("r", p.r);
    range("x", p.x);
    range("b", p.b);
    range("load", p.load);
    range("pf", p.pf);
    range("capacity", p.capacity);
    if (j.contains("const_power_fraction")) p.const_power_fraction = j.at("const_power_fraction").get<double>();
    if (j.contains("dg_fraction")) p.dg_fraction = j.at("dg_fraction").get<double>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad parameter value: ") + e.what());
  }
  validate(p);
  return p;
}

int Rng::uniform_int(int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return lo + static_cast<int>(v % span);
}

FeederModel generate(const GenParams& params) {
  validate(params);
  Rng rng(params.seed);
  FeederModel f;
  f.name = "random-" + std::to_string(params.seed);
  f.phases = 1;
  f.slack_voltage = Eigen::VectorXcd::Constant(1, Complex(1.0, 0.0));

  const int n = rng.uniform_int(params.n_min, params.n_max);
  for (int k = 0; k < n; ++k) {
    Bus b;
    b.id = k;
    b.kind = k == 0 ? BusKind::slack : BusKind::load;
    f.buses.push_back(b);
  }
  for (int k = 1; k < n; ++k) {
    Branch br;
    br.from = rng.uniform_int(0, k - 1);
    br.to = k;
    const double r = rng.uniform(params.r);
    const double x = rng.uniform(params.x);
    const double b = rng.uniform(params.b);
    br.z = Eigen::MatrixXcd::Constant(1, 1, Complex(r, x));
    br.y_shunt = Eigen::MatrixXcd::Constant(1, 1, Complex(0.0, b));
    f.branches.push_back(br);
  }

  // ZIP class per load bus: the first n_p of a shuffled list are constant
  // power, the rest alternate constant current / constant impedance.
  const int loads = n - 1;
  const int n_p = std::min(static_cast<int>(std::lround(params.const_power_fraction * n)), loads);
  std::vector<int> order(loads);
  std::iota(order.begin(), order.end(), 1);
  for (int i = loads - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  std::vector<int> kind(n, 0);
  for (int i = 0; i < loads; ++i) kind[order[i]] = i < n_p ? 0 : 1 + (i - n_p) % 2;

  double total = 0.0;
  for (int k = 1; k < n; ++k) {
    const double s = rng.uniform(params.load);
    const double pf = rng.uniform(params.pf);
    const Complex power(s * pf, s * std::sqrt(std::max(0.0, 1.0 - pf * pf)));
    total += s;
    ZipLoad ld;
    ld.bus = k;
    ld.s_p = ld.s_i = ld.s_z = Eigen::VectorXcd::Zero(1);
    (kind[k] == 0 ? ld.s_p : kind[k] == 1 ? ld.s_i : ld.s_z)(0) = power;
    f.loads.push_back(ld);
  }

  const int n_g = std::clamp(static_cast<int>(std::lround(params.dg_fraction * n)), 1, loads);
  std::vector<int> hosts(loads);
  std::iota(hosts.begin(), hosts.end(), 1);
  for (int i = 0; i < n_g; ++i) std::swap(hosts[i], hosts[rng.uniform_int(i, loads - 1)]);
  hosts.resize(n_g);
  std::sort(hosts.begin(), hosts.end());
  for (int bus : hosts) {
    const double cap = rng.uniform(params.capacity) * total / n_g;
    Generator g;
    g.bus = bus;
    g.s_max = Eigen::VectorXcd::Constant(1, Complex(cap, cap));
    g.s_min = Eigen::VectorXcd::Zero(1);
    f.generators.push_back(g);
  }
  return f;
}

}  // namespace qopf
