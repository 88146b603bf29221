#include "qopf/exactflow.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace qopf {

namespace {

void check_dispatch(const InjectionModel& inj, const Eigen::VectorXcd& s_g) {
  if (s_g.size() != inj.D.cols()) {
    throw ValidationError("dispatch has " + std::to_string(s_g.size()) + " entries, feeder has " +
                          std::to_string(inj.D.cols()) + " generator variables");
  }
}

bool has_voltage_dependent_injection(const InjectionModel& inj, const Eigen::VectorXcd& s_g) {
  for (const LoadElement& el : inj.elements) {
    if (el.s_p != Complex(0.0, 0.0)) return true;
  }
  return s_g.size() > 0 && s_g.cwiseAbs().maxCoeff() > 0.0;
}

}  // namespace

Eigen::VectorXcd injected_current(const InjectionModel& inj, const Eigen::VectorXcd& v_n, const Eigen::VectorXcd& s_g) {
  Eigen::VectorXcd current = Eigen::VectorXcd::Zero(v_n.size());
  for (const LoadElement& el : inj.elements) {
    const Complex v = el.voltage(v_n);
    Complex drawn = std::conj(el.s_i) / std::conj(el.nominal) + std::conj(el.s_z) * v / std::norm(el.nominal);
    if (el.s_p != Complex(0.0, 0.0)) drawn += std::conj(el.s_p) / std::conj(v);
    current(el.pos) -= drawn;
    if (el.neg >= 0) current(el.neg) += drawn;
  }
  if (s_g.size() > 0) {
    const Eigen::VectorXcd gen = inj.D.cast<Complex>() * s_g.conjugate();
    current += gen.cwiseQuotient(v_n.conjugate());
  }
  return current;
}

double current_mismatch(const AdmittanceSystem& adm, const InjectionModel& inj, const Eigen::VectorXcd& v_n,
                        const Eigen::VectorXcd& s_g) {
  const Eigen::VectorXcd r = adm.YN0 * adm.V0 + adm.YNN * v_n - injected_current(inj, v_n, s_g);
  return r.cwiseAbs().maxCoeff();
}

double exact_losses(const AdmittanceSystem& adm, const Eigen::VectorXcd& v_all) {
  if (v_all.size() != adm.Y.rows()) {
    throw ValidationError("voltage vector has " + std::to_string(v_all.size()) + " entries, network has " +
                          std::to_string(adm.Y.rows()) + " nodes");
  }
  const Eigen::VectorXcd i = adm.Y * v_all;
  return (v_all.array() * i.conjugate().array()).sum().real();
}

ExactFlowReport sweep_radial(const FeederModel& feeder, const Eigen::VectorXcd& s_g, const FlowOptions& opts) {
  if (feeder.phases != 1) throw ValidationError("backward-forward sweep supports single-phase feeders only");
  const AdmittanceSystem adm = build_admittance(feeder);
  const InjectionModel inj = build_injections(feeder, adm);
  check_dispatch(inj, s_g);

  const int n = feeder.bus_count();
  if (static_cast<int>(feeder.branches.size()) != n - 1) {
    throw ValidationError("backward-forward sweep needs a radial feeder (branches = buses - 1)");
  }
  std::vector<std::vector<int>> incident(n);
  for (int e = 0; e < n - 1; ++e) {
    incident[feeder.branches[e].from].push_back(e);
    incident[feeder.branches[e].to].push_back(e);
  }
  // Breadth-first order from the slack; parent_branch[k] feeds bus k.
  std::vector<int> order{0}, parent(n, -1), parent_branch(n, -1);
  std::vector<char> seen(n, 0);
  seen[0] = 1;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    for (int e : incident[u]) {
      const int v = feeder.branches[e].from == u ? feeder.branches[e].to : feeder.branches[e].from;
      if (seen[v]) continue;
      seen[v] = 1;
      parent[v] = u;
      parent_branch[v] = e;
      order.push_back(v);
    }
  }
  if (static_cast<int>(order.size()) != n) throw ValidationError("backward-forward sweep needs a connected radial feeder");

  std::vector<Complex> shunt(n, Complex(0.0, 0.0));
  for (const Branch& br : feeder.branches) {
    shunt[br.from] += 0.5 * br.y_shunt(0, 0);
    shunt[br.to] += 0.5 * br.y_shunt(0, 0);
  }

  const Complex v0 = adm.V0(0);
  Eigen::VectorXcd v_n = Eigen::VectorXcd::Constant(n - 1, v0);
  ExactFlowReport rep;
  std::vector<Complex> flow(n);
  for (rep.iterations = 1; rep.iterations <= opts.max_iterations; ++rep.iterations) {
    const Eigen::VectorXcd inj_current = injected_current(inj, v_n, s_g);
    for (int k = 1; k < n; ++k) flow[k] = shunt[k] * v_n(k - 1) - inj_current(k - 1);
    for (int idx = n - 1; idx >= 1; --idx) {
      const int k = order[idx];
      if (parent[k] != 0) flow[parent[k]] += flow[k];
    }
    Eigen::VectorXcd next(n - 1);
    for (int idx = 1; idx < n; ++idx) {
      const int k = order[idx];
      const Complex up = parent[k] == 0 ? v0 : next(parent[k] - 1);
      next(k - 1) = up - feeder.branches[parent_branch[k]].z(0, 0) * flow[k];
    }
    const double dv = (next - v_n).cwiseAbs().maxCoeff();
    v_n = next;
    if (!std::isfinite(dv)) break;
    if (dv <= opts.tolerance) {
      rep.residual = current_mismatch(adm, inj, v_n, s_g);
      if (rep.residual <= opts.tolerance) {
        rep.converged = true;
        break;
      }
    }
  }
  if (!rep.converged) {
    rep.iterations = std::min(rep.iterations, opts.max_iterations);
    rep.residual = current_mismatch(adm, inj, v_n, s_g);
  }
  rep.v = adm.full_voltage(v_n);
  rep.losses = exact_losses(adm, rep.v);
  return rep;
}

ExactFlowReport fixed_point_flow(const FeederModel& feeder, const AdmittanceSystem& adm, const Eigen::VectorXcd& s_g,
                                 const FlowOptions& opts) {
  const InjectionModel inj = build_injections(feeder, adm);
  check_dispatch(inj, s_g);
  const int nn = adm.node_count();

  Eigen::MatrixXcd ymod = adm.YNN;
  for (const LoadElement& el : inj.elements) {
    const Complex c = std::conj(el.s_z) / std::norm(el.nominal);
    ymod(el.pos, el.pos) += c;
    if (el.neg >= 0) {
      ymod(el.neg, el.neg) += c;
      ymod(el.pos, el.neg) -= c;
      ymod(el.neg, el.pos) -= c;
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(ymod);
  if (!(lu.rcond() > 1e-14)) throw ConvergenceError("network matrix Y_NN is singular");

  // Injections excluding constant-impedance loads, which live in ymod.
  InjectionModel rest = inj;
  for (LoadElement& el : rest.elements) el.s_z = Complex(0.0, 0.0);

  const Eigen::VectorXcd source = adm.YN0 * adm.V0;
  Eigen::VectorXcd v_n(nn);
  for (int k = 0; k < nn; ++k) v_n(k) = adm.V0(adm.phase_of_node(k));

  const bool nonlinear = has_voltage_dependent_injection(inj, s_g);
  ExactFlowReport rep;
  for (rep.iterations = 1; rep.iterations <= opts.max_iterations; ++rep.iterations) {
    const Eigen::VectorXcd next = lu.solve(injected_current(rest, v_n, s_g) - source);
    const double dv = (next - v_n).cwiseAbs().maxCoeff();
    v_n = next;
    if (!std::isfinite(dv)) break;
    if (!nonlinear || dv <= opts.tolerance) {
      rep.residual = current_mismatch(adm, inj, v_n, s_g);
      if (rep.residual <= opts.tolerance) {
        rep.converged = true;
        break;
      }
    }
  }
  if (!rep.converged) {
    rep.iterations = std::min(rep.iterations, opts.max_iterations);
    rep.residual = current_mismatch(adm, inj, v_n, s_g);
  }
  rep.v = adm.full_voltage(v_n);
  rep.losses = exact_losses(adm, rep.v);
  return rep;
}

ErrorMetrics compare(const AdmittanceSystem& adm, const VoltageSolution& approx, const ExactFlowReport& exact) {
  if (!exact.converged) throw ConvergenceError("exact power flow did not converge; cannot compute error metrics");
  const Eigen::VectorXcd exact_n = exact.v_n(adm.slack_count());
  if (exact_n.size() != approx.v.size()) throw ValidationError("approximate and exact solutions differ in size");
  ErrorMetrics m;
  m.eps_v = 100.0 * (approx.v - exact_n).cwiseAbs().maxCoeff();
  const double p_approx = exact_losses(adm, adm.full_voltage(approx.v));
  const double diff = std::abs(p_approx - exact.losses);
  if (exact.losses != 0.0) {
    m.eps_p = 100.0 * diff / std::abs(exact.losses);
  } else {
    m.eps_p = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return m;
}

}  // namespace qopf
