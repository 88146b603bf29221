#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qopf/error.hpp"

namespace qopf {

using Complex = std::complex<double>;

enum class BusKind { slack, load };
enum class Connection { wye, delta };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  int phases = 1;
  /// Phase-to-neutral nominal voltage. Only read for three-phase feeders.
  double v_nom = 1.0;
  std::string name;
};

/// Series impedance and total shunt admittance (half stamped at each end).
/// Both are 1x1 for single-phase feeders and 3x3 for three-phase feeders.
struct Branch {
  int from = 0;
  int to = 0;
  Eigen::MatrixXcd z;
  Eigen::MatrixXcd y_shunt;
};

/// ZIP load with consumption-positive powers. One entry per phase; for
/// delta connections the entries are the ab, bc and ca elements.
struct ZipLoad {
  int bus = 0;
  Eigen::VectorXcd s_p;
  Eigen::VectorXcd s_i;
  Eigen::VectorXcd s_z;
  Connection connection = Connection::wye;
};

/// Dispatchable generator with injection-positive box bounds. There is one
/// bound entry per decision variable: a single-phase generator and a
/// balanced three-phase generator (total power, shared equally between
/// phases) own one variable; an unbalanced three-phase generator owns three.
struct Generator {
  int bus = 0;
  Eigen::VectorXcd s_max;
  Eigen::VectorXcd s_min;
  bool balanced = false;

  int variable_count() const { return static_cast<int>(s_max.size()); }
};

/// Radial or meshed feeder. Single-phase feeders are in per-unit; three-phase
/// feeders are in physical units (volts, ohms, siemens, VA).
struct FeederModel {
  std::string name;
  int phases = 1;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<ZipLoad> loads;
  std::vector<Generator> generators;
  Eigen::VectorXcd slack_voltage;
  /// Three-phase reporting base in VA; losses are also reported as a fraction
  /// of it.
  double s_base = 1.0e6;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int generator_variable_count() const;
  /// Shared phase-to-neutral nominal voltage (1 for single-phase feeders).
  double v_nom() const;
  /// eta = 1/v_nom: voltages are multiplied by eta and powers by eta^2 to
  /// obtain the normalized quantities used internally.
  double voltage_scale() const { return 1.0 / v_nom(); }
  double power_scale() const { return voltage_scale() * voltage_scale(); }
};

/// Throws ValidationError describing the first violated invariant.
void validate(const FeederModel& feeder);

FeederModel parse_feeder(const std::string& json_text);
FeederModel load_feeder(const std::filesystem::path& path);
std::string feeder_to_json(const FeederModel& feeder);

/// Nodal admittance partitioned into slack and non-slack nodes.
///
/// Nodes are ordered by phase: all phase-a nodes of buses 1..n-1, then phase
/// b, then phase c. The full matrix Y is ordered [slack phases | N nodes].
/// Voltages held here are normalized (multiplied by eta); in three-phase
/// feeders the admittances stay in siemens, which makes the implied
/// impedance base 1 ohm and the per-phase power base v_nom^2.
struct AdmittanceSystem {
  int phases = 1;
  int buses = 0;
  Eigen::MatrixXcd Y;
  Eigen::MatrixXcd Y00, Y0N, YN0, YNN;
  Eigen::MatrixXd G_N, G_0;
  Eigen::VectorXcd V0;

  int node_count() const { return static_cast<int>(YNN.rows()); }
  int slack_count() const { return static_cast<int>(Y00.rows()); }
  /// Index into the N ordering of phase `phase` at non-slack bus `bus`.
  int node_index(int bus, int phase) const { return phase * (buses - 1) + bus - 1; }
  int bus_of_node(int node) const { return node % (buses - 1) + 1; }
  int phase_of_node(int node) const { return node / (buses - 1); }
  /// Stacks slack and non-slack voltages into the full ordering.
  Eigen::VectorXcd full_voltage(const Eigen::VectorXcd& v_n) const;
};

AdmittanceSystem build_admittance(const FeederModel& feeder);

/// A ZIP load as seen by the nodal equations: a wye element injects -I at
/// `pos`; a delta element injects -I at `pos` and +I at `neg`. `nominal` is
/// the normalized nominal voltage across the element.
struct LoadElement {
  int pos = -1;
  int neg = -1;
  Complex nominal{1.0, 0.0};
  Complex s_p, s_i, s_z;

  Complex voltage(const Eigen::VectorXcd& v_n) const {
    return neg < 0 ? v_n(pos) : v_n(pos) - v_n(neg);
  }
};

/// Normalized nodal injection data shared by the linear model and the exact
/// oracles.
struct InjectionModel {
  /// Nominal complex voltage of every N node: 1 for single-phase feeders,
  /// the slack phase rotation T for three-phase feeders.
  Eigen::VectorXcd nominal;
  /// Ordered by phase slot, then by load: row k of the connection matrix.
  std::vector<LoadElement> elements;
  /// N x G real incidence of generator variables (1, or 1/3 per phase for
  /// balanced three-phase generators).
  Eigen::MatrixXd D;
  Eigen::VectorXcd s_max, s_min;
  /// For every generator variable, the index of its owning generator.
  std::vector<int> variable_owner;
};

InjectionModel build_injections(const FeederModel& feeder, const AdmittanceSystem& adm);

}  // namespace qopf
