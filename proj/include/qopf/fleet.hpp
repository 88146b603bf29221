#pragma once

#include <string>
#include <vector>

#include "qopf/randgen.hpp"

namespace qopf {

/// One random feeder taken through generate -> base flow -> QP -> exact
/// re-evaluation. Loss figures come from the exact flow on both sides.
struct CaseResult {
  std::uint64_t seed = 0;
  int n = 0;
  double base_losses = 0.0;
  double opt_losses = 0.0;
  double improvement = 0.0;
  double eps_p = 0.0;
  double eps_v = 0.0;
  /// Smallest |V| of the base (no generation) exact flow.
  double min_v = 0.0;
  bool delta_ok = false;
  /// "ok", or a short failure tag followed by the message.
  std::string status = "ok";
  bool ok() const { return status == "ok"; }
};

struct Histogram {
  std::string name;
  /// bins + 1 edges.
  std::vector<double> edges;
  std::vector<int> counts;
};

struct FleetOptions {
  int count = 1000;
  std::uint64_t seed = 1;
  GenParams params;
  double delta_max = 0.3;
  /// 0 picks the hardware concurrency.
  int threads = 0;
};

struct FleetSummary {
  std::vector<CaseResult> cases;
  int failures = 0;
  std::vector<Histogram> histograms;
};

/// Runs a single case; never throws for numerical trouble, which is reported
/// through `status` instead.
CaseResult run_case(const GenParams& params, double delta_max = 0.3);

/// Case i uses seed `opts.seed + i`. Results are ordered by case index.
FleetSummary run_fleet(const FleetOptions& opts);

/// Equal-width histogram over the observed range of `values`.
Histogram make_histogram(const std::string& name, const std::vector<double>& values, int bins = 10);

std::string fleet_csv(const FleetSummary& summary);
std::string histograms_csv(const FleetSummary& summary);

}  // namespace qopf
