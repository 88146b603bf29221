#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "qopf/netmodel.hpp"
#include "qopf/randgen.hpp"

namespace testing {

using qopf::Complex;

inline Eigen::VectorXcd cvec(std::initializer_list<Complex> values) {
  Eigen::VectorXcd v(values.size());
  int k = 0;
  for (Complex c : values) v(k++) = c;
  return v;
}

inline Eigen::MatrixXcd scalar(Complex c) { return Eigen::MatrixXcd::Constant(1, 1, c); }

inline qopf::Bus bus(int id, int phases = 1, double v_nom = 1.0) {
  qopf::Bus b;
  b.id = id;
  b.kind = id == 0 ? qopf::BusKind::slack : qopf::BusKind::load;
  b.phases = phases;
  b.v_nom = v_nom;
  return b;
}

inline qopf::ZipLoad load(int at, Complex sp, Complex si = 0.0, Complex sz = 0.0) {
  qopf::ZipLoad l;
  l.bus = at;
  l.s_p = cvec({sp});
  l.s_i = cvec({si});
  l.s_z = cvec({sz});
  return l;
}

inline qopf::Generator generator(int at, Complex s_max, Complex s_min = 0.0) {
  qopf::Generator g;
  g.bus = at;
  g.s_max = cvec({s_max});
  g.s_min = cvec({s_min});
  return g;
}

/// Single-phase chain 0-1-...-(n-1), all branches `z`.
inline qopf::FeederModel chain(int n, Complex z, Complex shunt = 0.0) {
  qopf::FeederModel f;
  f.phases = 1;
  for (int k = 0; k < n; ++k) f.buses.push_back(bus(k));
  for (int k = 1; k < n; ++k) f.branches.push_back({k - 1, k, scalar(z), scalar(shunt)});
  f.slack_voltage = cvec({1.0});
  return f;
}

/// The 2-bus worked example: z = 0.01 + j0.01, constant-power load 0.1 + j0.05.
inline qopf::FeederModel two_bus(bool with_generator = true) {
  qopf::FeederModel f = chain(2, {0.01, 0.01});
  f.loads.push_back(load(1, {0.1, 0.05}));
  if (with_generator) f.generators.push_back(generator(1, {0.2, 0.2}));
  return f;
}

inline qopf::FeederModel random_feeder(std::uint64_t seed) {
  qopf::GenParams p;
  p.seed = seed;
  return qopf::generate(p);
}

/// Zeroes the constant-power part of every load, moving it to constant current.
inline qopf::FeederModel without_constant_power(qopf::FeederModel f) {
  for (auto& l : f.loads) {
    l.s_i += l.s_p;
    l.s_p.setZero();
  }
  return f;
}

inline Eigen::VectorXcd random_dispatch(const qopf::FeederModel& f, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXcd s(f.generator_variable_count());
  int k = 0;
  for (const auto& g : f.generators) {
    for (int v = 0; v < g.variable_count(); ++v, ++k) {
      s(k) = Complex(g.s_min(v).real() + u(rng) * scale * (g.s_max(v).real() - g.s_min(v).real()),
                     g.s_min(v).imag() + u(rng) * scale * (g.s_max(v).imag() - g.s_min(v).imag()));
    }
  }
  return s;
}

/// Closed-form 2-bus voltage for a constant-power load s (consumption)
/// behind z from a real slack v0. With w = z conj(s), power balance gives
/// conj(V) v0 - |V|^2 = w; x = |V|^2 solves x^2 + (2 Re w - v0^2) x + |w|^2 = 0
/// (high-voltage root) and V = conj(x + w) / v0.
inline Complex two_bus_exact(Complex z, Complex s, double v0) {
  const Complex w = z * std::conj(s);
  const double bq = 2.0 * w.real() - v0 * v0;
  const double cq = std::norm(w);
  const double x = 0.5 * (-bq + std::sqrt(bq * bq - 4.0 * cq));
  return std::conj(Complex(x, 0.0) + w) / v0;
}

}  // namespace testing
