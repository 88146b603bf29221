#pragma once

#include <optional>

#include <Eigen/Dense>

#include "qopf/linflow.hpp"
#include "qopf/netmodel.hpp"
#include "qopf/quadopf.hpp"

namespace qopf {

/// Three-phase quantities of the linearization. Nodes are ordered by phase
/// (all phase-a nodes, then b, then c); load rows of J follow the same phase
/// slot order, then load order.
struct ThreePhaseModel {
  /// 1 / v_nom. Voltages are scaled by eta and powers by eta^2 on ingestion,
  /// so the normalized network sits near T-rotated unity.
  double eta = 1.0;
  /// e^{j phi} per N node, phi taken from the slack phase angles.
  Eigen::VectorXcd T;
  /// Load connection matrix: a unit row for wye elements, a +1/-1 row
  /// (ab, bc, ca) for delta elements.
  Eigen::MatrixXd J;
  /// Complex generator matrix diag(conj(T))^-1 D in normalized units.
  Eigen::MatrixXcd Dc;
  /// Real generator incidence with the 1/3 sharing of balanced generators.
  Eigen::MatrixXd D;
  /// Normalized slack voltages, one per phase.
  Eigen::VectorXcd V0;
};

struct ThreePhaseSystem {
  FeederModel feeder;
  AdmittanceSystem adm;
  ThreePhaseModel model;
  LinearFlowModel linear;
};

ThreePhaseSystem build_threephase(const FeederModel& feeder);

Eigen::MatrixXd connection_matrix(const InjectionModel& inj, int node_count);

enum class OpfMethod { qp, relaxed };

struct ThreePhaseOpfOptions {
  OpfMethod method = OpfMethod::qp;
  double delta_max = 0.3;
  /// Bounds in physical units (VA) per generator variable; the feeder's own
  /// bounds are used when absent.
  std::optional<Eigen::VectorXcd> s_min;
  std::optional<Eigen::VectorXcd> s_max;
};

/// Runs the quadratic OPF on the three-phase model. Dispatch, voltages and
/// losses in the returned result stay in normalized units; use
/// `physical_dispatch` and `physical_power` for reporting.
OpfResult solve_threephase_opf(const ThreePhaseSystem& system, const ThreePhaseOpfOptions& opts = {});

QuadProgram assemble_threephase_qp(const ThreePhaseSystem& system, const ThreePhaseOpfOptions& opts = {});

Eigen::VectorXcd physical_dispatch(const ThreePhaseSystem& system, const Eigen::VectorXcd& normalized);
double physical_power(const ThreePhaseSystem& system, double normalized);

}  // namespace qopf
