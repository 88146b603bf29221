#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "qopf/netmodel.hpp"

namespace qopf {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Random radial feeder parameters. Defaults follow the standard benchmark
/// protocol: 30-60 nodes, r and x in [0.001, 0.017] pu, shunt susceptance in
/// [0, 0.0002] pu, apparent load in [0, 0.2] pu at power factor [0.7, 1],
/// half the loads constant-power, 5% of the buses with generation.
struct GenParams {
  int n_min = 30;
  int n_max = 60;
  Range r{0.001, 0.017};
  Range x{0.001, 0.017};
  Range b{0.0, 0.0002};
  Range load{0.0, 0.2};
  Range pf{0.7, 1.0};
  double const_power_fraction = 0.5;
  double dg_fraction = 0.05;
  /// Generator capacity is u * (total load) / (generator count), u drawn
  /// from this range; applied to both the active and reactive upper bounds.
  Range capacity{0.5, 1.5};
  std::uint64_t seed = 1;
};

/// Throws ValidationError on empty ranges or fractions outside [0, 1].
void validate(const GenParams& params);

/// Reads a JSON object with any subset of the GenParams fields
/// (n_min, n_max, r, x, b, load, pf, capacity as [lo, hi] pairs,
/// const_power_fraction, dg_fraction, seed).
GenParams parse_gen_params(const std::string& json_text);

/// 64-bit Mersenne Twister with a platform-independent uniform mapping (the
/// standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(const Range& r) { return r.lo + (r.hi - r.lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

 private:
  std::mt19937_64 engine_;
};

/// Random radial single-phase feeder: bus k attaches to a uniformly chosen
/// earlier bus. Deterministic in `params.seed`.
FeederModel generate(const GenParams& params);

}  // namespace qopf
