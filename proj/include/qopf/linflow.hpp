#pragma once

#include <Eigen/Dense>

#include "qopf/netmodel.hpp"

namespace qopf {

/// Linearized load flow A + B conj(V) + C V - Dc conj(S_G) = 0 and its real
/// sensitivity form V = U + W S.
///
/// Loads are consumption-positive and generator variables injection-positive,
/// so the generator term enters with a minus sign and
///   M [V_r; V_i] = -[A_r; A_i] + [D_r D_i; D_i -D_r] [S_r; S_i],
/// which gives U = -M^-1 [A_r; A_i] and W = M^-1 [D_r D_i; D_i -D_r].
/// Real and imaginary parts are stacked everywhere as [re; im].
struct LinearFlowModel {
  Eigen::VectorXcd A;
  Eigen::MatrixXcd B;
  Eigen::MatrixXcd C;
  /// N x G generator matrix; real in single-phase mode.
  Eigen::MatrixXcd D;
  Eigen::MatrixXd M;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::VectorXcd U;
  /// 2N x 2G, blocks [W_rr W_ri; W_ir W_ii].
  Eigen::MatrixXd W;
  /// Linearization point of every node (1, or the phase rotation T).
  Eigen::VectorXcd nominal;
  Eigen::VectorXcd V0;

  int node_count() const { return static_cast<int>(A.size()); }
  int variable_count() const { return static_cast<int>(D.cols()); }
};

struct VoltageSolution {
  Eigen::VectorXcd v;
  Eigen::VectorXcd v0;
  /// Linearization point of each node; deviations are measured against it.
  Eigen::VectorXcd nominal;
  /// max_k |1 - v_k / nominal_k| (Euclidean norm on the complex plane).
  double max_drop = 0.0;
};

/// Single- or three-phase linearization from feeder data. Single-phase
/// feeders must have a zero slack angle.
LinearFlowModel linearize(const FeederModel& feeder, const AdmittanceSystem& adm);
LinearFlowModel linearize(const InjectionModel& inj, const AdmittanceSystem& adm);

/// Voltages from the sensitivity form V = U + W S.
VoltageSolution solve_linear_flow(const LinearFlowModel& model, const Eigen::VectorXcd& s_g);

/// Voltages by assembling the right-hand side of the real linear system for
/// this dispatch and solving it with a fresh factorization of M.
VoltageSolution solve_linear_flow_direct(const LinearFlowModel& model, const Eigen::VectorXcd& s_g);

/// Worst-case |1/v - (2 - v)| over the disk |1 - v| <= delta.
double laurent_error_bound(double delta);

double max_drop(const Eigen::VectorXcd& v, const Eigen::VectorXcd& nominal);

/// Stacking helpers.
Eigen::VectorXd stack(const Eigen::VectorXcd& z);
Eigen::VectorXcd unstack(const Eigen::VectorXd& x);

}  // namespace qopf
