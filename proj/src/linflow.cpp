#include "qopf/linflow.hpp"

#include <cmath>
#include <sstream>

namespace qopf {

namespace {

// Real form of the generator term: [D_r D_i; D_i -D_r].
Eigen::MatrixXd generator_block(const Eigen::MatrixXcd& D) {
  const Eigen::Index n = D.rows(), g = D.cols();
  Eigen::MatrixXd out(2 * n, 2 * g);
  out << D.real(), D.imag(), D.imag(), -D.real();
  return out;
}

void check_dispatch(const LinearFlowModel& model, const Eigen::VectorXcd& s_g) {
  if (s_g.size() != model.variable_count()) {
    throw ValidationError("dispatch has " + std::to_string(s_g.size()) + " entries, model has " +
                          std::to_string(model.variable_count()) + " generator variables");
  }
}

VoltageSolution make_solution(const LinearFlowModel& model, Eigen::VectorXcd v) {
  VoltageSolution sol;
  sol.max_drop = max_drop(v, model.nominal);
  sol.v = std::move(v);
  sol.v0 = model.V0;
  sol.nominal = model.nominal;
  return sol;
}

}  // namespace

Eigen::VectorXd stack(const Eigen::VectorXcd& z) {
  Eigen::VectorXd x(2 * z.size());
  x << z.real(), z.imag();
  return x;
}

Eigen::VectorXcd unstack(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  Eigen::VectorXcd z(n);
  for (Eigen::Index k = 0; k < n; ++k) z(k) = Complex(x(k), x(n + k));
  return z;
}

double max_drop(const Eigen::VectorXcd& v, const Eigen::VectorXcd& nominal) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    worst = std::max(worst, std::abs(1.0 - v(k) / nominal(k)));
  }
  return worst;
}

LinearFlowModel linearize(const FeederModel& feeder, const AdmittanceSystem& adm) {
  if (feeder.phases == 1 && std::abs(std::arg(feeder.slack_voltage(0))) > 1e-12) {
    throw ValidationError("single-phase linearization needs a zero slack angle");
  }
  return linearize(build_injections(feeder, adm), adm);
}

LinearFlowModel linearize(const InjectionModel& inj, const AdmittanceSystem& adm) {
  const int n = adm.node_count();
  LinearFlowModel m;
  m.nominal = inj.nominal;
  m.V0 = adm.V0;

  m.A = adm.YN0 * adm.V0;
  m.B = Eigen::MatrixXcd::Zero(n, n);
  m.C = adm.YNN;
  for (const LoadElement& el : inj.elements) {
    const Complex e_conj = std::conj(el.nominal);
    const Complex current = (2.0 * std::conj(el.s_p) + std::conj(el.s_i)) / e_conj;
    const Complex b = -std::conj(el.s_p) / (e_conj * e_conj);
    const Complex c = std::conj(el.s_z) / std::norm(el.nominal);
    const int idx[2] = {el.pos, el.neg};
    const double sgn[2] = {1.0, -1.0};
    for (int a = 0; a < 2; ++a) {
      if (idx[a] < 0) continue;
      m.A(idx[a]) += sgn[a] * current;
      for (int bb = 0; bb < 2; ++bb) {
        if (idx[bb] < 0) continue;
        m.B(idx[a], idx[bb]) += sgn[a] * sgn[bb] * b;
        m.C(idx[a], idx[bb]) += sgn[a] * sgn[bb] * c;
      }
    }
  }

  m.D = inj.nominal.conjugate().cwiseInverse().asDiagonal() * inj.D.cast<Complex>();

  m.M.resize(2 * n, 2 * n);
  m.M << m.B.real() + m.C.real(), m.B.imag() - m.C.imag(),
         m.B.imag() + m.C.imag(), -m.B.real() + m.C.real();

  m.lu.compute(m.M);
  const double rcond = m.lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream msg;
    msg << "linear load-flow matrix M is singular (condition estimate " << (rcond > 0 ? 1.0 / rcond : INFINITY) << ")";
    throw ConvergenceError(msg.str());
  }
  m.U = unstack(m.lu.solve(-stack(m.A)));
  m.W = m.lu.solve(generator_block(m.D));
  return m;
}

VoltageSolution solve_linear_flow(const LinearFlowModel& model, const Eigen::VectorXcd& s_g) {
  check_dispatch(model, s_g);
  return make_solution(model, model.U + unstack(model.W * stack(s_g)));
}

VoltageSolution solve_linear_flow_direct(const LinearFlowModel& model, const Eigen::VectorXcd& s_g) {
  check_dispatch(model, s_g);
  const Eigen::VectorXcd gen = model.D * s_g.conjugate();
  const Eigen::VectorXd rhs = -stack(model.A) + stack(gen);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(model.M);
  return make_solution(model, unstack(lu.solve(rhs)));
}

double laurent_error_bound(double delta) {
  if (!(delta >= 0.0) || delta >= 1.0) {
    throw ValidationError("Laurent bound needs 0 <= delta < 1");
  }
  return delta * delta / (1.0 - delta);
}

}  // namespace qopf
