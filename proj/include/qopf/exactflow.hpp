#pragma once

#include <Eigen/Dense>

#include "qopf/linflow.hpp"
#include "qopf/netmodel.hpp"

namespace qopf {

struct FlowOptions {
  /// Convergence threshold on the largest normalized voltage update and on
  /// the nodal current mismatch.
  double tolerance = 1e-10;
  int max_iterations = 100;
};

/// Result of an exact (nonlinear) power flow. Voltages are normalized and
/// stored in the full ordering [slack phases | N nodes].
struct ExactFlowReport {
  Eigen::VectorXcd v;
  double losses = 0.0;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;

  Eigen::VectorXcd v_n(int slack_count) const { return v.tail(v.size() - slack_count); }
};

/// Backward-forward sweep for radial single-phase feeders, flat start.
/// Throws ValidationError for meshed feeders; non-convergence is reported
/// through `converged`.
ExactFlowReport sweep_radial(const FeederModel& feeder, const Eigen::VectorXcd& s_g, const FlowOptions& opts = {});

/// Fixed-point iteration V <- Ymod^-1 (I(V) - Y_N0 V0) where Ymod folds the
/// constant-impedance loads into Y_NN. Works for meshed and three-phase
/// feeders.
ExactFlowReport fixed_point_flow(const FeederModel& feeder, const AdmittanceSystem& adm, const Eigen::VectorXcd& s_g,
                                 const FlowOptions& opts = {});

/// Nodal current injected by loads and generators at the N nodes.
Eigen::VectorXcd injected_current(const InjectionModel& inj, const Eigen::VectorXcd& v_n, const Eigen::VectorXcd& s_g);

/// max |Y_N0 V0 + Y_NN V - I(V)| over the N nodes.
double current_mismatch(const AdmittanceSystem& adm, const InjectionModel& inj, const Eigen::VectorXcd& v_n,
                        const Eigen::VectorXcd& s_g);

/// Re(sum_k V_k conj((Y V)_k)) over all nodes, slack included.
double exact_losses(const AdmittanceSystem& adm, const Eigen::VectorXcd& v_all);

struct ErrorMetrics {
  /// Percent relative loss error.
  double eps_p = 0.0;
  /// 100 * max_k |V_approx - V_exact| in normalized units.
  double eps_v = 0.0;
};

/// Compares linear-model voltages (and the losses they imply) against an
/// exact report for the same dispatch. Throws ConvergenceError if the exact
/// side did not converge.
ErrorMetrics compare(const AdmittanceSystem& adm, const VoltageSolution& approx, const ExactFlowReport& exact);

}  // namespace qopf
