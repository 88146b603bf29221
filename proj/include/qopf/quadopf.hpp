#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qopf/exactflow.hpp"
#include "qopf/linflow.hpp"
#include "qopf/netmodel.hpp"

namespace qopf {

enum class BoundState { free, lower, upper };

/// Quadratic loss model 1/2 S'HS + F'S + base_objective over the stacked
/// dispatch S = [S_r; S_i], with per-variable boxes. Everything needed to
/// evaluate voltages at a dispatch is copied in, so the program is
/// self-contained and immutable once assembled.
struct QuadProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd F;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double delta_max = 0.3;
  /// Losses of the linear model at S = 0.
  double base_objective = 0.0;
  /// Set when a ridge was added to make H invertible.
  bool regularized = false;

  Eigen::VectorXcd U;
  Eigen::MatrixXd W;
  Eigen::VectorXcd nominal;
  Eigen::VectorXcd V0;

  int variable_count() const { return static_cast<int>(F.size() / 2); }
  double objective(const Eigen::VectorXd& s) const { return 0.5 * s.dot(H * s) + F.dot(s) + base_objective; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& s) const { return H * s + F; }
  VoltageSolution voltages(const Eigen::VectorXcd& dispatch) const;
};

struct OpfResult {
  Eigen::VectorXcd dispatch;
  VoltageSolution voltages;
  double predicted_losses = 0.0;
  std::optional<double> exact_losses;
  /// One entry per stacked coordinate [S_r; S_i].
  std::vector<BoundState> active_set;
  bool delta_ok = true;
  bool converged = true;
  int iterations = 0;
  double kkt_residual = 0.0;

  bool any_bound_active() const;
};

/// H = 2 [W_r; W_i]' blkdiag(G_N, G_N) [W_r; W_i] and
/// F = 2 (W_r' (G_N U_r + G_0 V0_r) + W_i' (G_N U_i + G_0 V0_i)),
/// the exact expansion of Re(V^H Y V) along V = U + W S.
QuadProgram assemble_qp(const LinearFlowModel& model, const AdmittanceSystem& adm, const FeederModel& feeder,
                        double delta_max = 0.3);

/// Unconstrained minimizer S = -H^-1 F; bounds are ignored.
OpfResult solve_relaxed(const QuadProgram& qp);

struct QpOptions {
  int max_iterations = 0;
  double kkt_tolerance = 1e-8;
};

/// Box-constrained minimizer by accelerated projected gradient.
OpfResult solve_qp(const QuadProgram& qp, const QpOptions& opts = {});

struct DeltaCheck {
  bool ok = true;
  /// delta_max - |1 - V_k / nominal_k| per node; negative where violated.
  Eigen::VectorXd margins;
};

DeltaCheck check_delta(const OpfResult& result, double delta_max);
DeltaCheck check_delta(const VoltageSolution& voltages, double delta_max);

/// Re-solves with |1 - Re(v_k)| + |Im(v_k)| <= delta_max at every node (v_k
/// the voltage relative to its nominal), linearized into four half-planes
/// per node, together with the boxes. Throws InfeasibleError naming the bus
/// when no dispatch satisfies them.
OpfResult enforce_delta(const QuadProgram& qp, const AdmittanceSystem& adm, double delta_max);

/// Fills `exact_losses` from an exact power flow at the result's dispatch and
/// returns the flow report. Uses the sweep for radial single-phase feeders,
/// the fixed-point iteration otherwise.
ExactFlowReport evaluate_exact(OpfResult& result, const FeederModel& feeder, const AdmittanceSystem& adm,
                               const FlowOptions& opts = {});

bool is_radial(const FeederModel& feeder);

}  // namespace qopf
