#include "qopf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qopf/exactflow.hpp"
#include "qopf/fleet.hpp"
#include "qopf/linflow.hpp"
#include "qopf/quadopf.hpp"
#include "qopf/randgen.hpp"
#include "qopf/threephase.hpp"

namespace qopf {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Writes through a temporary file so a failure never leaves partial output.
void write_file(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out.flush()) throw IoError("cannot write '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot write '" + path.string() + "'");
  }
}

void emit(const std::string& out_path, const json& report, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
}

json complex_json(Complex z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json voltages_json(const AdmittanceSystem& adm, const Eigen::VectorXcd& v_n) {
  json arr = json::array();
  for (int k = 0; k < static_cast<int>(v_n.size()); ++k) {
    json e{{"bus", adm.bus_of_node(k)}, {"re", v_n(k).real()}, {"im", v_n(k).imag()}, {"mag", std::abs(v_n(k))}};
    if (adm.phases == 3) e["phase"] = std::string(1, static_cast<char>('a' + adm.phase_of_node(k)));
    arr.push_back(e);
  }
  return arr;
}

// Dispatch file: {"dispatch": [{"re": .., "im": ..}, ...]} in feeder units.
Eigen::VectorXcd read_dispatch(const std::string& path, int vars) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("dispatch file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("dispatch") || !j["dispatch"].is_array()) {
    throw ValidationError("dispatch file needs a 'dispatch' array");
  }
  const json& d = j["dispatch"];
  if (static_cast<int>(d.size()) != vars) {
    throw ValidationError("dispatch has " + std::to_string(d.size()) + " entries, feeder has " + std::to_string(vars) +
                          " generator variables");
  }
  Eigen::VectorXcd s(vars);
  try {
    for (int k = 0; k < vars; ++k) s(k) = Complex(d[k].at("re").get<double>(), d[k].value("im", 0.0));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad dispatch entry: ") + e.what());
  }
  return s;
}

// Losses are reported in per-unit: directly for single-phase feeders, on
// s_base for three-phase feeders.
double loss_pu(const FeederModel& f, double normalized) {
  return f.phases == 1 ? normalized : normalized / f.power_scale() / f.s_base;
}

struct PfArgs {
  std::string feeder, mode = "linear", dispatch, out;
};

int cmd_pf(const PfArgs& a, std::ostream& out) {
  const FeederModel feeder = load_feeder(a.feeder);
  const AdmittanceSystem adm = build_admittance(feeder);
  const int vars = feeder.generator_variable_count();
  const Eigen::VectorXcd s_phys = a.dispatch.empty() ? Eigen::VectorXcd::Zero(vars) : read_dispatch(a.dispatch, vars);
  const Eigen::VectorXcd s = s_phys * feeder.power_scale();

  json r{{"feeder", feeder.name}, {"mode", a.mode}, {"phases", feeder.phases}};
  if (a.mode == "linear") {
    const LinearFlowModel lin = linearize(feeder, adm);
    const VoltageSolution sol = solve_linear_flow(lin, s);
    r["voltages"] = voltages_json(adm, sol.v);
    r["losses"] = loss_pu(feeder, exact_losses(adm, adm.full_voltage(sol.v)));
    r["max_drop"] = sol.max_drop;
  } else {
    const ExactFlowReport rep = feeder.phases == 1 && is_radial(feeder) ? sweep_radial(feeder, s)
                                                                        : fixed_point_flow(feeder, adm, s);
    if (!rep.converged) {
      std::ostringstream msg;
      msg << "exact power flow did not converge after " << rep.iterations << " iterations (residual " << rep.residual
          << ")";
      throw ConvergenceError(msg.str());
    }
    const Eigen::VectorXcd v_n = rep.v_n(adm.slack_count());
    const InjectionModel inj = build_injections(feeder, adm);
    r["voltages"] = voltages_json(adm, v_n);
    r["losses"] = loss_pu(feeder, rep.losses);
    r["max_drop"] = max_drop(v_n, inj.nominal);
    r["iterations"] = rep.iterations;
    r["residual"] = rep.residual;
  }
  emit(a.out, r, out);
  return exit_ok;
}

struct OpfArgs {
  std::string feeder, method = "qp", out;
  double delta_max = 0.3;
  bool enforce = false;
};

int cmd_opf(const OpfArgs& a, std::ostream& out, bool three_phase_only) {
  const FeederModel feeder = load_feeder(a.feeder);
  if (three_phase_only && feeder.phases != 3) throw ValidationError("threephase-opf needs a three-phase feeder");
  if (feeder.generators.empty()) throw ValidationError("feeder has no generators; nothing to dispatch");

  const AdmittanceSystem adm = build_admittance(feeder);
  const InjectionModel inj = build_injections(feeder, adm);
  const LinearFlowModel lin = linearize(feeder, adm);
  const QuadProgram qp = assemble_qp(lin, adm, feeder, a.delta_max);

  OpfResult res = a.method == "relaxed" ? solve_relaxed(qp) : solve_qp(qp);
  bool enforced = false;
  if (a.enforce && !res.delta_ok) {
    res = enforce_delta(qp, adm, a.delta_max);
    enforced = true;
  }
  OpfResult base_case = solve_qp([&] {
    QuadProgram zero = qp;
    zero.lower.setZero();
    zero.upper.setZero();
    return zero;
  }());
  const ExactFlowReport exact = evaluate_exact(res, feeder, adm);
  const ExactFlowReport base = evaluate_exact(base_case, feeder, adm);

  const double ps = feeder.power_scale();
  // Position of each variable within its generator (the phase of an
  // unbalanced three-phase generator).
  std::vector<int> slot(qp.variable_count(), 0);
  for (int k = 1; k < qp.variable_count(); ++k) {
    if (inj.variable_owner[k] == inj.variable_owner[k - 1]) slot[k] = slot[k - 1] + 1;
  }
  json gens = json::array();
  for (int k = 0; k < qp.variable_count(); ++k) {
    const Generator& g = feeder.generators[inj.variable_owner[k]];
    const int vars = qp.variable_count();
    auto state = [&](int idx) {
      const BoundState st = res.active_set[idx];
      return st == BoundState::lower ? "lower" : st == BoundState::upper ? "upper" : "free";
    };
    json e{{"bus", g.bus},
           {"dispatch", complex_json(res.dispatch(k) / ps)},
           {"s_max", complex_json(inj.s_max(k) / ps)},
           {"s_min", complex_json(inj.s_min(k) / ps)},
           {"bound_re", state(k)},
           {"bound_im", state(vars + k)}};
    if (feeder.phases == 3) {
      e["balanced"] = g.balanced;
      if (!g.balanced) e["phase"] = std::string(1, static_cast<char>('a' + slot[k]));
    }
    gens.push_back(e);
  }
  const DeltaCheck dc = check_delta(res, a.delta_max);
  json r{{"feeder", feeder.name},
         {"method", a.method},
         {"phases", feeder.phases},
         {"generators", gens},
         {"predicted_losses", loss_pu(feeder, res.predicted_losses)},
         {"exact_losses", exact.converged ? json(loss_pu(feeder, exact.losses)) : json(nullptr)},
         {"base_losses", base.converged ? json(loss_pu(feeder, base.losses)) : json(nullptr)},
         {"any_bound_active", res.any_bound_active()},
         {"delta_max", a.delta_max},
         {"delta_ok", dc.ok},
         {"min_delta_margin", dc.margins.size() ? dc.margins.minCoeff() : a.delta_max},
         {"delta_enforced", enforced},
         {"converged", res.converged},
         {"iterations", res.iterations},
         {"kkt_residual", res.kkt_residual},
         {"regularized", qp.regularized},
         {"voltages", voltages_json(adm, res.voltages.v)}};
  if (feeder.phases == 3) {
    r["s_base"] = feeder.s_base;
    r["losses_unit"] = "pu of s_base";
  }
  if (exact.converged) {
    r["eps_p"] = compare(adm, res.voltages, exact).eps_p;
    r["eps_v"] = compare(adm, res.voltages, exact).eps_v;
  }
  emit(a.out, r, out);
  return exit_ok;
}

struct FleetArgs {
  int count = 1000;
  std::uint64_t seed = 1;
  std::string params, out;
  int threads = 0;
};

int cmd_fleet(const FleetArgs& a, std::ostream& out, std::ostream& err) {
  FleetOptions opts;
  opts.count = a.count;
  opts.seed = a.seed;
  opts.threads = a.threads;
  if (!a.params.empty()) opts.params = parse_gen_params(read_file(a.params));
  const FleetSummary s = run_fleet(opts);
  const std::string rows = fleet_csv(s);
  const std::string hist = histograms_csv(s);
  if (a.out.empty()) {
    out << rows;
  } else {
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw IoError("cannot create directory '" + a.out + "'");
    write_file(fs::path(a.out) / "fleet.csv", rows);
    write_file(fs::path(a.out) / "histograms.csv", hist);
  }
  int good = 0, improved = 0;
  for (const CaseResult& c : s.cases) {
    if (!c.ok()) continue;
    if (c.eps_p < 5.0 && c.eps_v < 2.0) ++good;
    if (c.improvement > 50.0) ++improved;
  }
  err << "fleet: " << s.cases.size() << " cases, " << s.failures << " failed, " << good
            << " with eps_p < 5% and eps_v < 2%, " << improved << " with improvement > 50%\n";
  return exit_ok;
}

struct GenArgs {
  std::uint64_t seed = 1;
  std::string params, out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  GenParams p;
  if (!a.params.empty()) p = parse_gen_params(read_file(a.params));
  p.seed = a.seed;
  const std::string text = feeder_to_json(generate(p));
  if (a.out.empty()) {
    out << text << '\n';
  } else {
    write_file(a.out, text + "\n");
  }
  return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quadratic convex OPF for distribution feeders", "qopf"};
  app.require_subcommand(1);

  PfArgs pf;
  CLI::App* pf_cmd = app.add_subcommand("pf", "Power flow: linearized or exact");
  pf_cmd->add_option("feeder", pf.feeder, "Feeder JSON file")->required();
  pf_cmd->add_option("--mode", pf.mode, "linear or exact")->check(CLI::IsMember({"linear", "exact"}));
  pf_cmd->add_option("--dispatch", pf.dispatch, "Generator dispatch JSON file");
  pf_cmd->add_option("--out", pf.out, "Report file (default: stdout)");

  OpfArgs opf;
  CLI::App* opf_cmd = app.add_subcommand("opf", "Loss-minimizing generator dispatch");
  OpfArgs tp;
  CLI::App* tp_cmd = app.add_subcommand("threephase-opf", "Loss-minimizing dispatch on a three-phase feeder");
  for (auto [cmd, args] : {std::pair{opf_cmd, &opf}, std::pair{tp_cmd, &tp}}) {
    cmd->add_option("feeder", args->feeder, "Feeder JSON file")->required();
    cmd->add_option("--method", args->method, "qp or relaxed")->check(CLI::IsMember({"qp", "relaxed"}));
    cmd->add_option("--delta-max", args->delta_max, "Voltage deviation limit; enforced when given")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", args->out, "Report file (default: stdout)");
  }

  FleetArgs fleet;
  CLI::App* fleet_cmd = app.add_subcommand("fleet", "Monte-Carlo experiment over random feeders");
  fleet_cmd->add_option("--count", fleet.count, "Number of feeders")->check(CLI::NonNegativeNumber);
  fleet_cmd->add_option("--seed", fleet.seed, "Seed of the first feeder");
  fleet_cmd->add_option("--params", fleet.params, "Generator parameter JSON file");
  fleet_cmd->add_option("--threads", fleet.threads, "Worker threads (0: all cores)");
  fleet_cmd->add_option("--out", fleet.out, "Output directory for fleet.csv and histograms.csv");

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Emit a random feeder");
  gen_cmd->add_option("--seed", gen.seed, "Seed");
  gen_cmd->add_option("--params", gen.params, "Generator parameter JSON file");
  gen_cmd->add_option("--out", gen.out, "Feeder file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (*pf_cmd) return cmd_pf(pf, out);
    if (*opf_cmd) {
      opf.enforce = opf_cmd->count("--delta-max") > 0;
      return cmd_opf(opf, out, false);
    }
    if (*tp_cmd) {
      tp.enforce = tp_cmd->count("--delta-max") > 0;
      return cmd_opf(tp, out, true);
    }
    if (*fleet_cmd) return cmd_fleet(fleet, out, err);
    if (*gen_cmd) return cmd_gen(gen, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return exit_convergence;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << '\n';
    return exit_convergence;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_validation;
  }
  return exit_validation;
}

}  // namespace qopf
