#include "qopf/quadopf.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qopf/qp_solvers.hpp"

namespace qopf {

namespace {

constexpr double kRidge = 1e-10;

std::vector<BoundState> bound_states(const QuadProgram& qp, const Eigen::VectorXd& x) {
  std::vector<BoundState> states(x.size(), BoundState::free);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) <= qp.lower(i)) {
      states[i] = BoundState::lower;
    } else if (x(i) >= qp.upper(i)) {
      states[i] = BoundState::upper;
    }
  }
  return states;
}

OpfResult make_result(const QuadProgram& qp, const Eigen::VectorXd& x) {
  OpfResult r;
  r.dispatch = unstack(x);
  r.voltages = qp.voltages(r.dispatch);
  r.predicted_losses = qp.objective(x);
  r.active_set = bound_states(qp, x);
  r.delta_ok = check_delta(r.voltages, qp.delta_max).ok;
  return r;
}

// Per-node polygonal deviation |1 - Re(w)| + |Im(w)| with w = v / nominal.
Eigen::VectorXd polygon_deviation(const VoltageSolution& sol, const Eigen::VectorXcd& nominal) {
  Eigen::VectorXd dev(sol.v.size());
  for (Eigen::Index k = 0; k < sol.v.size(); ++k) {
    const Complex w = sol.v(k) / nominal(k);
    dev(k) = std::abs(1.0 - w.real()) + std::abs(w.imag());
  }
  return dev;
}

}  // namespace

bool OpfResult::any_bound_active() const {
  for (BoundState s : active_set) {
    if (s != BoundState::free) return true;
  }
  return false;
}

VoltageSolution QuadProgram::voltages(const Eigen::VectorXcd& dispatch) const {
  VoltageSolution sol;
  sol.v = U + unstack(W * stack(dispatch));
  sol.v0 = V0;
  sol.nominal = nominal;
  sol.max_drop = max_drop(sol.v, nominal);
  return sol;
}

QuadProgram assemble_qp(const LinearFlowModel& model, const AdmittanceSystem& adm, const FeederModel& feeder,
                        double delta_max) {
  const int n = model.node_count();
  QuadProgram qp;
  qp.delta_max = delta_max;
  qp.U = model.U;
  qp.W = model.W;
  qp.nominal = model.nominal;
  qp.V0 = model.V0;

  const Eigen::MatrixXd wr = model.W.topRows(n);
  const Eigen::MatrixXd wi = model.W.bottomRows(n);
  const Eigen::MatrixXd& gn = adm.G_N;
  qp.H = 2.0 * (wr.transpose() * gn * wr + wi.transpose() * gn * wi);
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  const Eigen::VectorXd couple_r = gn * model.U.real() + adm.G_0 * adm.V0.real();
  const Eigen::VectorXd couple_i = gn * model.U.imag() + adm.G_0 * adm.V0.imag();
  qp.F = 2.0 * (wr.transpose() * couple_r + wi.transpose() * couple_i);
  qp.base_objective = exact_losses(adm, adm.full_voltage(model.U));

  const InjectionModel inj = build_injections(feeder, adm);
  if (inj.s_max.size() != model.variable_count()) {
    throw ValidationError("feeder generators do not match the linear model");
  }
  qp.lower = stack(inj.s_min);
  qp.upper = stack(inj.s_max);

  if (qp.F.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qp.H, Eigen::EigenvaluesOnly);
    const double top = std::max(1.0, std::abs(eig.eigenvalues().maxCoeff()));
    if (eig.eigenvalues().minCoeff() <= 1e-13 * top) {
      qp.H.diagonal().array() += kRidge;
      qp.regularized = true;
    }
  }
  return qp;
}

OpfResult solve_relaxed(const QuadProgram& qp) {
  if (qp.F.size() == 0) return make_result(qp, Eigen::VectorXd());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(qp.H);
  const Eigen::VectorXd s = ldlt.solve(-qp.F);
  const double residual = s.allFinite() ? (qp.H * s + qp.F).cwiseAbs().maxCoeff() : INFINITY;
  if (!(residual <= 1e-8)) {
    std::ostringstream msg;
    msg << "relaxed solution failed: H is singular (residual " << residual << ")";
    throw ConvergenceError(msg.str());
  }
  OpfResult r = make_result(qp, s);
  r.kkt_residual = residual;
  return r;
}

OpfResult solve_qp(const QuadProgram& qp, const QpOptions& opts) {
  for (Eigen::Index i = 0; i < qp.lower.size(); ++i) {
    if (qp.lower(i) > qp.upper(i)) throw ValidationError("empty bound box for a generator variable");
  }
  BoxQpOptions box;
  box.max_iterations = opts.max_iterations;
  box.kkt_tolerance = opts.kkt_tolerance;
  const BoxQpResult sol = solve_box_qp(qp.H, qp.F, qp.lower, qp.upper, box);
  OpfResult r = make_result(qp, sol.x);
  r.converged = sol.converged;
  r.iterations = sol.iterations;
  r.kkt_residual = sol.kkt_residual;
  return r;
}

DeltaCheck check_delta(const VoltageSolution& voltages, double delta_max) {
  DeltaCheck out;
  out.margins.resize(voltages.v.size());
  for (Eigen::Index k = 0; k < voltages.v.size(); ++k) {
    const Complex ref = voltages.nominal.size() == voltages.v.size() ? voltages.nominal(k) : Complex(1.0, 0.0);
    out.margins(k) = delta_max - std::abs(1.0 - voltages.v(k) / ref);
  }
  out.ok = out.margins.size() == 0 || out.margins.minCoeff() >= 0.0;
  return out;
}

DeltaCheck check_delta(const OpfResult& result, double delta_max) { return check_delta(result.voltages, delta_max); }

OpfResult enforce_delta(const QuadProgram& qp, const AdmittanceSystem& adm, double delta_max) {
  OpfResult box = solve_qp(qp);
  if (polygon_deviation(box.voltages, qp.nominal).maxCoeff() <= delta_max) return box;

  const int n = static_cast<int>(qp.U.size());
  const int vars = static_cast<int>(qp.F.size());
  const int rows = 2 * vars + 4 * n;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, vars);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < vars; ++i) {
    A(i, i) = 1.0;
    b(i) = qp.upper(i);
    A(vars + i, i) = -1.0;
    b(vars + i) = -qp.lower(i);
  }
  const Eigen::MatrixXd wr = qp.W.topRows(n);
  const Eigen::MatrixXd wi = qp.W.bottomRows(n);
  for (int k = 0; k < n; ++k) {
    const Complex c = std::conj(qp.nominal(k)) / std::norm(qp.nominal(k));
    // d = 1 - Re(c v), e = Im(c v), both affine in the dispatch.
    const double d0 = 1.0 - (c.real() * qp.U(k).real() - c.imag() * qp.U(k).imag());
    const double e0 = c.real() * qp.U(k).imag() + c.imag() * qp.U(k).real();
    const Eigen::RowVectorXd gd = -(c.real() * wr.row(k) - c.imag() * wi.row(k));
    const Eigen::RowVectorXd ge = c.real() * wi.row(k) + c.imag() * wr.row(k);
    int row = 2 * vars + 4 * k;
    for (double s1 : {1.0, -1.0}) {
      for (double s2 : {1.0, -1.0}) {
        A.row(row) = s1 * gd + s2 * ge;
        b(row) = delta_max - s1 * d0 - s2 * e0;
        ++row;
      }
    }
  }

  Eigen::MatrixXd h = qp.H;
  if (Eigen::LLT<Eigen::MatrixXd>(h).info() != Eigen::Success) h.diagonal().array() += kRidge;
  const DualQpResult sol = solve_dual_active_set(h, qp.F, A, b);
  if (!sol.feasible) {
    if (sol.blocking_row < 0) throw ConvergenceError("voltage-constrained QP hit its iteration limit");
    OpfResult at = make_result(qp, sol.x);
    Eigen::Index worst = 0;
    polygon_deviation(at.voltages, qp.nominal).maxCoeff(&worst);
    int node = static_cast<int>(worst);
    if (sol.blocking_row >= 2 * vars) node = (sol.blocking_row - 2 * vars) / 4;
    const int bus = adm.bus_of_node(node);
    throw InfeasibleError("voltage limit delta_max = " + std::to_string(delta_max) +
                              " cannot be met together with the generator bounds; most violated bus " +
                              std::to_string(bus),
                          bus);
  }
  OpfResult r = make_result(qp, sol.x);
  r.iterations = sol.iterations;
  r.kkt_residual = (qp.H * sol.x + qp.F + A.transpose() * sol.multipliers).cwiseAbs().maxCoeff();
  r.delta_ok = check_delta(r.voltages, delta_max).ok;
  return r;
}

bool is_radial(const FeederModel& feeder) {
  return static_cast<int>(feeder.branches.size()) == feeder.bus_count() - 1;
}

ExactFlowReport evaluate_exact(OpfResult& result, const FeederModel& feeder, const AdmittanceSystem& adm,
                               const FlowOptions& opts) {
  ExactFlowReport rep = feeder.phases == 1 && is_radial(feeder) ? sweep_radial(feeder, result.dispatch, opts)
                                                                 : fixed_point_flow(feeder, adm, result.dispatch, opts);
  if (rep.converged) {
    result.exact_losses = rep.losses;
  } else {
    result.exact_losses.reset();
  }
  return rep;
}

}  // namespace qopf
