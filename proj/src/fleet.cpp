#include "qopf/fleet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "qopf/exactflow.hpp"
#include "qopf/linflow.hpp"
#include "qopf/quadopf.hpp"

namespace qopf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Round-trip precision, so every row recomputes exactly from its fields.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool out_of_box(const QuadProgram& qp, const OpfResult& r) {
  const Eigen::VectorXd x = stack(r.dispatch);
  return (x - qp.lower).minCoeff() < 0.0 || (qp.upper - x).minCoeff() < 0.0;
}

}  // namespace

CaseResult run_case(const GenParams& params, double delta_max) {
  CaseResult c;
  c.seed = params.seed;
  c.base_losses = c.opt_losses = c.improvement = c.eps_p = c.eps_v = c.min_v = kNaN;
  try {
    const FeederModel feeder = generate(params);
    c.n = feeder.bus_count();
    const AdmittanceSystem adm = build_admittance(feeder);
    const int vars = feeder.generator_variable_count();

    const ExactFlowReport base = sweep_radial(feeder, Eigen::VectorXcd::Zero(vars));
    if (!base.converged) {
      c.status = "base_diverged";
      return c;
    }
    c.base_losses = base.losses;
    c.min_v = base.v.cwiseAbs().minCoeff();

    const LinearFlowModel lin = linearize(feeder, adm);
    const QuadProgram qp = assemble_qp(lin, adm, feeder, delta_max);
    OpfResult opt = solve_relaxed(qp);
    if (out_of_box(qp, opt)) opt = solve_qp(qp);
    c.delta_ok = opt.delta_ok;

    const ExactFlowReport exact = evaluate_exact(opt, feeder, adm);
    if (!exact.converged) {
      c.status = "opt_diverged";
      return c;
    }
    c.opt_losses = exact.losses;
    c.improvement = 100.0 * (c.base_losses - c.opt_losses) / c.base_losses;
    const ErrorMetrics m = compare(adm, opt.voltages, exact);
    c.eps_p = m.eps_p;
    c.eps_v = m.eps_v;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    c.status = "error: " + msg;
  }
  return c;
}

Histogram make_histogram(const std::string& name, const std::vector<double>& values, int bins) {
  Histogram h;
  h.name = name;
  h.counts.assign(bins, 0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  } else if (hi == lo) {
    hi = lo + 1.0;
  }
  const double width = (hi - lo) / bins;
  for (int k = 0; k <= bins; ++k) h.edges.push_back(k == bins ? hi : lo + k * width);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    const int k = std::min(bins - 1, static_cast<int>((v - lo) / width));
    ++h.counts[std::max(0, k)];
  }
  return h;
}

FleetSummary run_fleet(const FleetOptions& opts) {
  validate(opts.params);
  if (opts.count < 0) throw ValidationError("fleet count must be non-negative");
  FleetSummary s;
  s.cases.resize(opts.count);

  int workers = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, opts.count));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < opts.count; i = next++) {
      GenParams p = opts.params;
      p.seed = opts.seed + static_cast<std::uint64_t>(i);
      s.cases[i] = run_case(p, opts.delta_max);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  std::vector<double> improvement, eps_p, eps_v, min_v;
  for (const CaseResult& c : s.cases) {
    if (!c.ok()) {
      ++s.failures;
      continue;
    }
    improvement.push_back(c.improvement);
    eps_p.push_back(c.eps_p);
    eps_v.push_back(c.eps_v);
    min_v.push_back(c.min_v);
  }
  s.histograms = {make_histogram("improvement", improvement), make_histogram("eps_p", eps_p),
                  make_histogram("eps_v", eps_v), make_histogram("min_v", min_v)};
  return s;
}

std::string fleet_csv(const FleetSummary& summary) {
  std::ostringstream out;
  out << "seed,n,base_losses,opt_losses,improvement,eps_p,eps_v,min_v,delta_ok,status\n";
  for (const CaseResult& c : summary.cases) {
    out << c.seed << ',' << c.n << ',' << num(c.base_losses) << ',' << num(c.opt_losses) << ','
        << num(c.improvement) << ',' << num(c.eps_p) << ',' << num(c.eps_v) << ',' << num(c.min_v) << ','
        << (c.delta_ok ? 1 : 0) << ',' << c.status << '\n';
  }
  return out.str();
}

std::string histograms_csv(const FleetSummary& summary) {
  std::ostringstream out;
  out << "metric,bin,lo,hi,count\n";
  for (const Histogram& h : summary.histograms) {
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      out << h.name << ',' << k << ',' << num(h.edges[k]) << ',' << num(h.edges[k + 1]) << ',' << h.counts[k] << '\n';
    }
  }
  return out.str();
}

}  // namespace qopf
