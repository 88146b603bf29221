#include "qopf/qp_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace qopf {

namespace {

double quadratic(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(H * x) + f.dot(x);
}

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

// Solves for the coordinates that are not held at a bound by the sign of the
// gradient, with the held ones fixed, then projects back onto the box.
Eigen::VectorXd polish(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const Eigen::VectorXd g = H * x + f;
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool held_low = x(i) <= lower(i) && g(i) >= 0.0;
    const bool held_high = x(i) >= upper(i) && g(i) <= 0.0;
    if (!held_low && !held_high) free.push_back(i);
  }
  if (free.empty()) return x;
  const Eigen::Index k = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd hff(k, k);
  Eigen::VectorXd rhs(k);
  Eigen::VectorXd fixed = x;
  for (Eigen::Index i : free) fixed(i) = 0.0;
  const Eigen::VectorXd coupling = H * fixed;
  for (Eigen::Index a = 0; a < k; ++a) {
    rhs(a) = -(f(free[a]) + coupling(free[a]));
    for (Eigen::Index b = 0; b < k; ++b) hff(a, b) = H(free[a], free[b]);
  }
  const Eigen::VectorXd sol = hff.ldlt().solve(rhs);
  Eigen::VectorXd out = x;
  for (Eigen::Index a = 0; a < k; ++a) out(free[a]) = sol(a);
  if (!out.allFinite()) return x;
  return clamp(out, lower, upper);
}

}  // namespace

double box_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  const Eigen::VectorXd g = H * x + f;
  return (clamp(x - g, lower, upper) - x).cwiseAbs().maxCoeff();
}

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BoxQpOptions& opts) {
  const Eigen::Index n = f.size();
  BoxQpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
  double lipschitz = eig.eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) lipschitz = 1.0;

  // Warm start from the projected unconstrained minimizer.
  Eigen::VectorXd x = clamp(H.ldlt().solve(-f), lower, upper);
  if (!x.allFinite()) x = clamp(Eigen::VectorXd::Zero(n), lower, upper);
  double fx = quadratic(H, f, x);
  Eigen::VectorXd y = x;
  double t = 1.0;

  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    Eigen::VectorXd next = clamp(y - (H * y + f) / lipschitz, lower, upper);
    double fnext = quadratic(H, f, next);
    if (fnext > fx) {
      // Restart the momentum from the last accepted point.
      t = 1.0;
      next = clamp(x - (H * x + f) / lipschitz, lower, upper);
      fnext = quadratic(H, f, next);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = next;
    fx = fnext;
    t = t_next;

    const Eigen::VectorXd candidate = polish(H, f, lower, upper, x);
    const double fc = quadratic(H, f, candidate);
    if (fc <= fx) {
      x = candidate;
      fx = fc;
      y = x;
      t = 1.0;
    }
    res.kkt_residual = box_kkt_residual(H, f, lower, upper, x);
    if (res.kkt_residual <= opts.kkt_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, max_iter);
  res.x = x;
  res.kkt_residual = box_kkt_residual(H, f, lower, upper, x);
  return res;
}

DualQpResult solve_dual_active_set(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b, double tolerance) {
  const Eigen::Index n = f.size();
  const Eigen::Index m = A.rows();
  DualQpResult res;
  res.multipliers = Eigen::VectorXd::Zero(m);

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  const Eigen::MatrixXd hinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd x = -hinv * f;

  // Constraint j in the form n_j' x >= d_j with n_j = -a_j, d_j = -b_j.
  auto slack = [&](Eigen::Index j) { return b(j) - A.row(j).dot(x); };
  auto row_scale = [&](Eigen::Index j) { return std::max(1.0, A.row(j).norm()); };

  std::vector<int>& active = res.active;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  const int max_iter = static_cast<int>(10 * (m + n) + 100);

  while (res.iterations < max_iter) {
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::find(active.begin(), active.end(), static_cast<int>(j)) != active.end()) continue;
      const double s = slack(j) / row_scale(j);
      if (s < -tolerance && s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) {
      res.feasible = true;
      break;
    }
    const Eigen::VectorXd np = -A.row(p).transpose();
    u(p) = 0.0;

    bool added = false;
    while (!added && res.iterations < max_iter) {
      ++res.iterations;
      const Eigen::Index q = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd z = hinv * np;
      Eigen::VectorXd r(q);
      if (q > 0) {
        Eigen::MatrixXd N(n, q);
        for (Eigen::Index k = 0; k < q; ++k) N.col(k) = -A.row(active[k]).transpose();
        const Eigen::MatrixXd hn = hinv * N;
        r = (N.transpose() * hn).ldlt().solve(hn.transpose() * np);
        z -= hn * r;
      }
      const double scale_z = (hinv * np).norm();
      const bool zero_step = z.norm() <= 1e-12 * std::max(scale_z, 1e-300);

      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u(active[k]) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      const double t2 = zero_step ? std::numeric_limits<double>::infinity() : -slack(p) / z.dot(np);

      if (std::isinf(t1) && std::isinf(t2)) {
        res.feasible = false;
        res.blocking_row = static_cast<int>(p);
        res.x = x;
        for (Eigen::Index k = 0; k < q; ++k) res.multipliers(active[k]) = u(active[k]);
        return res;
      }
      const double t = std::min(t1, t2);
      if (!zero_step) x += t * z;
      for (Eigen::Index k = 0; k < q; ++k) u(active[k]) -= t * r(k);
      u(p) += t;
      if (!zero_step && t2 <= t1) {
        active.push_back(static_cast<int>(p));
        added = true;
      } else {
        u(active[drop]) = 0.0;
        active.erase(active.begin() + drop);
      }
    }
  }
  res.x = x;
  for (int j : active) res.multipliers(j) = std::max(0.0, u(j));
  return res;
}

}  // namespace qopf
