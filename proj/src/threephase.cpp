#include "qopf/threephase.hpp"

namespace qopf {

Eigen::MatrixXd connection_matrix(const InjectionModel& inj, int node_count) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(inj.elements.size()), node_count);
  for (std::size_t row = 0; row < inj.elements.size(); ++row) {
    const LoadElement& el = inj.elements[row];
    J(row, el.pos) = 1.0;
    if (el.neg >= 0) J(row, el.neg) = -1.0;
  }
  return J;
}

ThreePhaseSystem build_threephase(const FeederModel& feeder) {
  if (feeder.phases != 3) throw ValidationError("three-phase model needs a feeder with phases = 3");
  validate(feeder);
  ThreePhaseSystem sys;
  sys.feeder = feeder;
  sys.adm = build_admittance(feeder);
  const InjectionModel inj = build_injections(feeder, sys.adm);
  sys.linear = linearize(inj, sys.adm);

  ThreePhaseModel& m = sys.model;
  m.eta = feeder.voltage_scale();
  m.T = inj.nominal;
  m.J = connection_matrix(inj, sys.adm.node_count());
  m.D = inj.D;
  m.Dc = sys.linear.D;
  m.V0 = sys.adm.V0;
  return sys;
}

QuadProgram assemble_threephase_qp(const ThreePhaseSystem& system, const ThreePhaseOpfOptions& opts) {
  QuadProgram qp = assemble_qp(system.linear, system.adm, system.feeder, opts.delta_max);
  const double ps = system.feeder.power_scale();
  const int vars = system.linear.variable_count();
  auto override_bound = [&](const std::optional<Eigen::VectorXcd>& b, Eigen::VectorXd& target, const char* what) {
    if (!b) return;
    if (b->size() != vars) {
      throw ValidationError(std::string(what) + " has " + std::to_string(b->size()) + " entries, feeder has " +
                            std::to_string(vars) + " generator variables");
    }
    target = stack(*b * ps);
  };
  override_bound(opts.s_min, qp.lower, "s_min");
  override_bound(opts.s_max, qp.upper, "s_max");
  return qp;
}

OpfResult solve_threephase_opf(const ThreePhaseSystem& system, const ThreePhaseOpfOptions& opts) {
  const QuadProgram qp = assemble_threephase_qp(system, opts);
  return opts.method == OpfMethod::relaxed ? solve_relaxed(qp) : solve_qp(qp);
}

Eigen::VectorXcd physical_dispatch(const ThreePhaseSystem& system, const Eigen::VectorXcd& normalized) {
  return normalized / system.feeder.power_scale();
}

double physical_power(const ThreePhaseSystem& system, double normalized) {
  return normalized / system.feeder.power_scale();
}

}  // namespace qopf
