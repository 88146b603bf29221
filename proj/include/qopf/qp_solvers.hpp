#pragma once

#include <vector>

#include <Eigen/Dense>

namespace qopf {

/// minimize 1/2 x'Hx + f'x subject to lower <= x <= upper.
struct BoxQpOptions {
  /// Accelerated projected-gradient steps; 0 selects 10 * dimension.
  int max_iterations = 0;
  double kkt_tolerance = 1e-8;
};

struct BoxQpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  /// ||P_box(x - grad) - x||_inf at the returned point.
  double kkt_residual = 0.0;
};

double box_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const Eigen::VectorXd& x);

/// Accelerated projected gradient (FISTA with function-value restart). After
/// every step the free coordinates are re-solved exactly with the bound
/// coordinates held fixed; the result is kept only if it lowers the
/// objective, so convergence is finite once the active set settles.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BoxQpOptions& opts = {});

/// minimize 1/2 x'Hx + f'x subject to A x <= b, H positive definite.
struct DualQpResult {
  Eigen::VectorXd x;
  /// One multiplier per row of A (zero for inactive rows).
  Eigen::VectorXd multipliers;
  std::vector<int> active;
  bool feasible = false;
  /// When infeasible: the row that could not be satisfied.
  int blocking_row = -1;
  int iterations = 0;
};

/// Goldfarb-Idnani dual active-set method: starts at the unconstrained
/// minimizer and adds the most violated constraint until all hold.
DualQpResult solve_dual_active_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b, double tolerance = 1e-10);

}  // namespace qopf
