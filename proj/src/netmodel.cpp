#include "qopf/netmodel.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace qopf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

const json& required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing field '" + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

double optional_number(const json& obj, const char* key, double fallback, const std::string& where) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, where + "." + key);
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + ": expected an integer");
  return v.get<int>();
}

// A per-phase quantity: a scalar (broadcast) or an array of `phases` numbers.
Eigen::VectorXd phase_vector(const json& obj, const char* key, int phases, const std::string& where,
                             bool required_field) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(phases);
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required_field) fail(where + ": missing field '" + key + "'");
    return out;
  }
  const std::string at = where + "." + key;
  if (it->is_number()) {
    out.setConstant(it->get<double>());
    return out;
  }
  if (!it->is_array() || static_cast<int>(it->size()) != phases) {
    fail(at + ": expected a number or an array of " + std::to_string(phases) + " numbers");
  }
  for (int k = 0; k < phases; ++k) out(k) = number((*it)[k], at);
  return out;
}

// A per-phase matrix: scalar (diagonal), array (diagonal) or nested array.
Eigen::MatrixXd phase_matrix(const json& obj, const char* key, int phases, const std::string& where,
                             bool required_field) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(phases, phases);
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required_field) fail(where + ": missing field '" + key + "'");
    return out;
  }
  const std::string at = where + "." + key;
  if (it->is_number()) {
    out.diagonal().setConstant(it->get<double>());
    return out;
  }
  if (!it->is_array() || static_cast<int>(it->size()) != phases) {
    fail(at + ": expected a number, an array of " + std::to_string(phases) + " or a " +
         std::to_string(phases) + "x" + std::to_string(phases) + " matrix");
  }
  if ((*it)[0].is_array()) {
    for (int a = 0; a < phases; ++a) {
      const json& row = (*it)[a];
      if (!row.is_array() || static_cast<int>(row.size()) != phases) fail(at + ": ragged matrix");
      for (int b = 0; b < phases; ++b) out(a, b) = number(row[b], at);
    }
  } else {
    for (int a = 0; a < phases; ++a) out(a, a) = number((*it)[a], at);
  }
  return out;
}

Eigen::VectorXcd complex_vector(const json& obj, const char* re, const char* im, int phases,
                                const std::string& where, bool required_field) {
  Eigen::VectorXd r = phase_vector(obj, re, phases, where, required_field);
  Eigen::VectorXd i = phase_vector(obj, im, phases, where, required_field);
  Eigen::VectorXcd out(phases);
  for (int k = 0; k < phases; ++k) out(k) = Complex(r(k), i(k));
  return out;
}

json phase_json(const Eigen::VectorXd& v) {
  if (v.size() == 1) return v(0);
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

json matrix_json(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  json arr = json::array();
  for (int a = 0; a < m.rows(); ++a) {
    json row = json::array();
    for (int b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
    arr.push_back(row);
  }
  return arr;
}

}  // namespace

int FeederModel::generator_variable_count() const {
  int total = 0;
  for (const auto& g : generators) total += g.variable_count();
  return total;
}

double FeederModel::v_nom() const {
  if (phases == 1 || buses.empty()) return 1.0;
  return buses.front().v_nom;
}

void validate(const FeederModel& f) {
  const int n = f.bus_count();
  if (n < 2) fail("feeder needs a slack bus and at least one other bus");
  if (f.phases != 1 && f.phases != 3) fail("phase count must be 1 or 3");

  int slacks = 0;
  for (int k = 0; k < n; ++k) {
    const Bus& b = f.buses[k];
    if (b.id != k) fail("bus ids must be contiguous 0..n-1 in order; found id " + std::to_string(b.id) +
                        " at position " + std::to_string(k));
    if (b.phases != f.phases) fail("inconsistent phase counts at bus " + std::to_string(k));
    if (b.kind == BusKind::slack) ++slacks;
    if (f.phases == 3) {
      if (!(b.v_nom > 0.0)) fail("bus " + std::to_string(k) + " has a non-positive nominal voltage");
      if (std::abs(b.v_nom - f.buses[0].v_nom) > 1e-9 * b.v_nom) {
        fail("bus " + std::to_string(k) + " nominal voltage differs from the slack; transformers are not supported");
      }
    }
  }
  if (slacks != 1) fail("feeder must have exactly one slack bus, found " + std::to_string(slacks));
  if (f.buses[0].kind != BusKind::slack) fail("slack bus must have id 0");
  if (f.slack_voltage.size() != f.phases) fail("slack voltage must have one entry per phase");
  for (int ph = 0; ph < f.phases; ++ph) {
    if (std::abs(f.slack_voltage(ph)) == 0.0) fail("slack voltage must be nonzero");
  }

  std::vector<std::vector<int>> adj(n);
  for (std::size_t e = 0; e < f.branches.size(); ++e) {
    const Branch& br = f.branches[e];
    const std::string where = "branch " + std::to_string(e);
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) fail(where + " references an unknown bus");
    if (br.from == br.to) fail(where + " connects bus " + std::to_string(br.from) + " to itself");
    if (br.z.rows() != f.phases || br.z.cols() != f.phases) fail(where + " impedance has the wrong dimension");
    if (br.y_shunt.rows() != f.phases || br.y_shunt.cols() != f.phases) fail(where + " shunt has the wrong dimension");
    if (br.z.cwiseAbs().maxCoeff() == 0.0) fail(where + " has zero series impedance");
    if (f.phases == 3) {
      if ((br.z - br.z.transpose()).cwiseAbs().maxCoeff() > 1e-12 * br.z.cwiseAbs().maxCoeff()) {
        fail(where + " impedance matrix is not symmetric");
      }
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(br.z);
      if (!lu.isInvertible()) fail(where + " impedance matrix is singular");
    }
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }

  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    if (!seen[k]) fail("feeder graph is disconnected: bus " + std::to_string(k) + " is unreachable from the slack");
  }

  for (std::size_t l = 0; l < f.loads.size(); ++l) {
    const ZipLoad& ld = f.loads[l];
    const std::string where = "load " + std::to_string(l);
    if (ld.bus < 0 || ld.bus >= n) fail(where + " references unknown bus " + std::to_string(ld.bus));
    if (ld.bus == 0) fail(where + " is attached to the slack bus");
    if (ld.s_p.size() != f.phases || ld.s_i.size() != f.phases || ld.s_z.size() != f.phases) {
      fail(where + " has the wrong number of phases");
    }
    if (ld.connection == Connection::delta && f.phases != 3) fail(where + ": delta loads need a three-phase feeder");
  }

  for (std::size_t g = 0; g < f.generators.size(); ++g) {
    const Generator& gen = f.generators[g];
    const std::string where = "generator " + std::to_string(g);
    if (gen.bus < 0 || gen.bus >= n) fail(where + " references unknown bus " + std::to_string(gen.bus));
    if (gen.bus == 0) fail(where + " is attached to the slack bus");
    const int expected = (f.phases == 1 || gen.balanced) ? 1 : 3;
    if (gen.s_max.size() != expected || gen.s_min.size() != expected) fail(where + " has the wrong number of bound entries");
    if (gen.balanced && f.phases != 3) fail(where + ": balanced flag needs a three-phase feeder");
    for (int k = 0; k < expected; ++k) {
      const Complex lo = gen.s_min(k), hi = gen.s_max(k);
      if (lo.real() > 0.0 || lo.imag() > 0.0 || hi.real() < 0.0 || hi.imag() < 0.0) {
        fail(where + ": bounds must satisfy s_min <= 0 <= s_max component-wise");
      }
    }
  }
}

FeederModel parse_feeder(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("feeder file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("feeder document must be a JSON object");

  FeederModel f;
  f.name = doc.value("name", std::string{});
  const json& buses = required(doc, "buses", "feeder");
  if (!buses.is_array() || buses.empty()) fail("feeder: 'buses' must be a non-empty array");

  for (std::size_t k = 0; k < buses.size(); ++k) {
    const json& jb = buses[k];
    const std::string where = "buses[" + std::to_string(k) + "]";
    if (!jb.is_object()) fail(where + ": expected an object");
    Bus b;
    b.id = integer(required(jb, "id", where), where + ".id");
    const std::string kind = required(jb, "kind", where).get<std::string>();
    if (kind == "slack") {
      b.kind = BusKind::slack;
    } else if (kind == "load") {
      b.kind = BusKind::load;
    } else {
      fail(where + ": unknown bus kind '" + kind + "'");
    }
    b.phases = jb.contains("phases") ? integer(jb["phases"], where + ".phases") : 1;
    b.v_nom = optional_number(jb, "v_nom", 1.0, where);
    b.name = jb.value("name", std::string{});
    f.buses.push_back(b);
  }
  f.phases = f.buses.front().phases;
  if (f.phases != 1 && f.phases != 3) fail("buses[0]: phases must be 1 or 3");
  const int p = f.phases;

  const json& branches = required(doc, "branches", "feeder");
  if (!branches.is_array()) fail("feeder: 'branches' must be an array");
  for (std::size_t e = 0; e < branches.size(); ++e) {
    const json& jb = branches[e];
    const std::string where = "branches[" + std::to_string(e) + "]";
    Branch br;
    br.from = integer(required(jb, "from", where), where + ".from");
    br.to = integer(required(jb, "to", where), where + ".to");
    Eigen::MatrixXd r = phase_matrix(jb, "r", p, where, true);
    Eigen::MatrixXd x = phase_matrix(jb, "x", p, where, true);
    Eigen::MatrixXd g = phase_matrix(jb, "g_shunt", p, where, false);
    Eigen::MatrixXd b = phase_matrix(jb, "b_shunt", p, where, false);
    br.z = r.cast<Complex>() + Complex(0, 1) * x.cast<Complex>();
    br.y_shunt = g.cast<Complex>() + Complex(0, 1) * b.cast<Complex>();
    f.branches.push_back(std::move(br));
  }

  if (doc.contains("loads")) {
    const json& loads = doc["loads"];
    if (!loads.is_array()) fail("feeder: 'loads' must be an array");
    for (std::size_t l = 0; l < loads.size(); ++l) {
      const json& jl = loads[l];
      const std::string where = "loads[" + std::to_string(l) + "]";
      ZipLoad ld;
      ld.bus = integer(required(jl, "bus", where), where + ".bus");
      ld.s_p = complex_vector(jl, "sp_re", "sp_im", p, where, false);
      ld.s_i = complex_vector(jl, "si_re", "si_im", p, where, false);
      ld.s_z = complex_vector(jl, "sz_re", "sz_im", p, where, false);
      const std::string conn = jl.value("connection", std::string("wye"));
      if (conn == "wye") {
        ld.connection = Connection::wye;
      } else if (conn == "delta") {
        ld.connection = Connection::delta;
      } else {
        fail(where + ": unknown connection type '" + conn + "'");
      }
      f.loads.push_back(std::move(ld));
    }
  }

  if (doc.contains("generators")) {
    const json& gens = doc["generators"];
    if (!gens.is_array()) fail("feeder: 'generators' must be an array");
    for (std::size_t g = 0; g < gens.size(); ++g) {
      const json& jg = gens[g];
      const std::string where = "generators[" + std::to_string(g) + "]";
      Generator gen;
      gen.bus = integer(required(jg, "bus", where), where + ".bus");
      gen.balanced = jg.value("balanced", false);
      const int vars = (p == 1 || gen.balanced) ? 1 : 3;
      gen.s_max = complex_vector(jg, "smax_re", "smax_im", vars, where, true);
      gen.s_min = complex_vector(jg, "smin_re", "smin_im", vars, where, false);
      f.generators.push_back(std::move(gen));
    }
  }

  const json& slack = required(doc, "slack_voltage", "feeder");
  f.slack_voltage = complex_vector(slack, "re", "im", p, "slack_voltage", true);
  f.s_base = optional_number(doc, "s_base", 1.0e6, "feeder");

  validate(f);
  return f;
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feeder file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_feeder(buf.str());
}

std::string feeder_to_json(const FeederModel& f) {
  json doc;
  if (!f.name.empty()) doc["name"] = f.name;
  json buses = json::array();
  for (const Bus& b : f.buses) {
    json jb{{"id", b.id}, {"kind", b.kind == BusKind::slack ? "slack" : "load"}, {"phases", b.phases}, {"v_nom", b.v_nom}};
    if (!b.name.empty()) jb["name"] = b.name;
    buses.push_back(jb);
  }
  doc["buses"] = buses;

  json branches = json::array();
  for (const Branch& br : f.branches) {
    json jb{{"from", br.from}, {"to", br.to}, {"r", matrix_json(br.z.real())}, {"x", matrix_json(br.z.imag())},
            {"b_shunt", matrix_json(br.y_shunt.imag())}};
    if (br.y_shunt.real().cwiseAbs().maxCoeff() > 0.0) jb["g_shunt"] = matrix_json(br.y_shunt.real());
    branches.push_back(jb);
  }
  doc["branches"] = branches;

  json loads = json::array();
  for (const ZipLoad& ld : f.loads) {
    json jl{{"bus", ld.bus},
            {"sp_re", phase_json(ld.s_p.real())}, {"sp_im", phase_json(ld.s_p.imag())},
            {"si_re", phase_json(ld.s_i.real())}, {"si_im", phase_json(ld.s_i.imag())},
            {"sz_re", phase_json(ld.s_z.real())}, {"sz_im", phase_json(ld.s_z.imag())},
            {"connection", ld.connection == Connection::wye ? "wye" : "delta"}};
    loads.push_back(jl);
  }
  doc["loads"] = loads;

  json gens = json::array();
  for (const Generator& g : f.generators) {
    gens.push_back({{"bus", g.bus},
                    {"smax_re", phase_json(g.s_max.real())}, {"smax_im", phase_json(g.s_max.imag())},
                    {"smin_re", phase_json(g.s_min.real())}, {"smin_im", phase_json(g.s_min.imag())},
                    {"balanced", g.balanced}});
  }
  doc["generators"] = gens;
  doc["slack_voltage"] = {{"re", phase_json(f.slack_voltage.real())}, {"im", phase_json(f.slack_voltage.imag())}};
  if (f.phases == 3) doc["s_base"] = f.s_base;
  return doc.dump(2) + "\n";
}

Eigen::VectorXcd AdmittanceSystem::full_voltage(const Eigen::VectorXcd& v_n) const {
  Eigen::VectorXcd v(V0.size() + v_n.size());
  v << V0, v_n;
  return v;
}

AdmittanceSystem build_admittance(const FeederModel& f) {
  validate(f);
  const int n = f.bus_count();
  const int p = f.phases;
  AdmittanceSystem adm;
  adm.phases = p;
  adm.buses = n;
  const int total = p * n;
  auto full_index = [&](int bus, int ph) { return bus == 0 ? ph : p + adm.node_index(bus, ph); };

  adm.Y = Eigen::MatrixXcd::Zero(total, total);
  for (const Branch& br : f.branches) {
    const Eigen::MatrixXcd y = br.z.inverse();
    const Eigen::MatrixXcd half = 0.5 * br.y_shunt;
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) {
        const int fa = full_index(br.from, a), fb = full_index(br.from, b);
        const int ta = full_index(br.to, a), tb = full_index(br.to, b);
        adm.Y(fa, fb) += y(a, b) + half(a, b);
        adm.Y(ta, tb) += y(a, b) + half(a, b);
        adm.Y(fa, tb) -= y(a, b);
        adm.Y(ta, fb) -= y(a, b);
      }
    }
  }
  const int nn = total - p;
  adm.Y00 = adm.Y.topLeftCorner(p, p);
  adm.Y0N = adm.Y.topRightCorner(p, nn);
  adm.YN0 = adm.Y.bottomLeftCorner(nn, p);
  adm.YNN = adm.Y.bottomRightCorner(nn, nn);
  adm.G_N = adm.YNN.real();
  adm.G_0 = adm.YN0.real();
  adm.V0 = f.slack_voltage * f.voltage_scale();
  return adm;
}

InjectionModel build_injections(const FeederModel& f, const AdmittanceSystem& adm) {
  const int p = f.phases;
  const int nn = adm.node_count();
  const double ps = f.power_scale();
  InjectionModel inj;

  inj.nominal = Eigen::VectorXcd::Ones(nn);
  if (p == 3) {
    for (int ph = 0; ph < 3; ++ph) {
      const Complex rot = adm.V0(ph) / std::abs(adm.V0(ph));
      inj.nominal.segment(ph * (adm.buses - 1), adm.buses - 1).setConstant(rot);
    }
  }

  for (int slot = 0; slot < p; ++slot) {
    for (const ZipLoad& ld : f.loads) {
      LoadElement el;
      el.pos = adm.node_index(ld.bus, slot);
      if (ld.connection == Connection::delta) el.neg = adm.node_index(ld.bus, (slot + 1) % 3);
      el.nominal = el.neg < 0 ? inj.nominal(el.pos) : inj.nominal(el.pos) - inj.nominal(el.neg);
      el.s_p = ld.s_p(slot) * ps;
      el.s_i = ld.s_i(slot) * ps;
      el.s_z = ld.s_z(slot) * ps;
      inj.elements.push_back(el);
    }
  }

  const int vars = f.generator_variable_count();
  inj.D = Eigen::MatrixXd::Zero(nn, vars);
  inj.s_max.resize(vars);
  inj.s_min.resize(vars);
  int col = 0;
  for (std::size_t g = 0; g < f.generators.size(); ++g) {
    const Generator& gen = f.generators[g];
    if (p == 1) {
      inj.D(adm.node_index(gen.bus, 0), col) = 1.0;
    } else if (gen.balanced) {
      for (int ph = 0; ph < 3; ++ph) inj.D(adm.node_index(gen.bus, ph), col) = 1.0 / 3.0;
    } else {
      for (int ph = 0; ph < 3; ++ph) inj.D(adm.node_index(gen.bus, ph), col + ph) = 1.0;
    }
    for (int k = 0; k < gen.variable_count(); ++k) {
      inj.s_max(col + k) = gen.s_max(k) * ps;
      inj.s_min(col + k) = gen.s_min(k) * ps;
      inj.variable_owner.push_back(static_cast<int>(g));
    }
    col += gen.variable_count();
  }
  return inj;
}

}  // namespace qopf
