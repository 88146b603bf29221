#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "qopf/cli.hpp"
#include "qopf/linflow.hpp"
#include "qopf/netmodel.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "qopf");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = qopf::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(QOPF_DATA_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "qopf-cli-tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Writes a copy of the balanced IEEE37 feeder with every generator capped at `cap`.
std::string ieee37_with_cap(double cap, const std::string& name) {
  json doc = json::parse(slurp(data("ieee37-balanced.json")));
  for (json& g : doc["generators"]) g["smax_re"] = g["smax_im"] = cap;
  const fs::path p = scratch(name);
  std::ofstream(p) << doc.dump();
  return p.string();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("pf exact on the balanced IEEE37 feeder") {
  const Run r = run({"pf", data("ieee37-balanced.json"), "--mode", "exact"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["losses"].get<double>() > 0.01);
  CHECK(j["losses"].get<double>() < 0.1);
  CHECK(j["iterations"].get<int>() >= 2);
  CHECK(j["voltages"].size() == 36u);
  CHECK(j["max_drop"].get<double>() < 0.3);
}

TEST_CASE("pf linear and exact on the two-bus feeder differ by less than the Laurent bound") {
  const Run lin = run({"pf", data("two-bus.json"), "--mode", "linear"});
  const Run ex = run({"pf", data("two-bus.json"), "--mode", "exact"});
  REQUIRE(lin.code == 0);
  REQUIRE(ex.code == 0);
  const json a = json::parse(lin.out)["voltages"][0], b = json::parse(ex.out)["voltages"][0];
  const qopf::Complex va(a["re"], a["im"]), vb(b["re"], b["im"]);
  CHECK(std::abs(va - vb) <= qopf::laurent_error_bound(std::abs(1.0 - vb)));
}

TEST_CASE("pf with a dispatch file") {
  const fs::path d = scratch("dispatch.json");
  std::ofstream(d) << R"({"dispatch": [{"re": 0.1, "im": 0.05}]})";
  const Run r = run({"pf", data("two-bus.json"), "--mode", "exact", "--dispatch", d.string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["losses"].get<double>() < 1e-20);

  std::ofstream(d) << R"({"dispatch": []})";
  CHECK(run({"pf", data("two-bus.json"), "--dispatch", d.string()}).code == qopf::exit_validation);
}

TEST_CASE("missing input exits with the I/O code and writes nothing") {
  const fs::path out = scratch("never.json");
  fs::remove(out);
  const Run r = run({"pf", "/nonexistent/feeder.json", "--out", out.string()});
  CHECK(r.code == qopf::exit_io);
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("opf methods agree when bounds are generous") {
  const std::string f = ieee37_with_cap(5.0, "ieee37-wide.json");
  const Run qp = run({"opf", f, "--method", "qp"});
  const Run rel = run({"opf", f, "--method", "relaxed"});
  REQUIRE(qp.code == 0);
  REQUIRE(rel.code == 0);
  const json a = json::parse(qp.out), b = json::parse(rel.out);
  CHECK_FALSE(a["any_bound_active"].get<bool>());
  for (int k = 0; k < 3; ++k) {
    CHECK(a["generators"][k]["dispatch"]["re"].get<double>() ==
          doctest::Approx(b["generators"][k]["dispatch"]["re"].get<double>()).epsilon(1e-6));
    CHECK(a["generators"][k]["dispatch"]["im"].get<double>() ==
          doctest::Approx(b["generators"][k]["dispatch"]["im"].get<double>()).epsilon(1e-6));
  }
  CHECK(a["exact_losses"].get<double>() <= 0.4 * a["base_losses"].get<double>());
}

TEST_CASE("opf with a tight cap reports the capped generator at its bound") {
  const Run r = run({"opf", ieee37_with_cap(0.7, "ieee37-capped.json")});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["any_bound_active"].get<bool>());
  CHECK(j["generators"][0]["bound_re"] == "upper");
  CHECK(j["generators"][0]["dispatch"]["re"].get<double>() == 0.7);
}

TEST_CASE("opf error paths") {
  const Run none = run({"opf", data("two-bus.json")});
  CHECK(none.code == 0);

  json doc = json::parse(slurp(data("two-bus.json")));
  doc["generators"] = json::array();
  const fs::path p = scratch("no-gen.json");
  std::ofstream(p) << doc.dump();
  const Run r = run({"opf", p.string()});
  CHECK(r.code == qopf::exit_validation);
  CHECK(r.err.find("generator") != std::string::npos);

  const Run inf = run({"opf", data("ieee37-balanced.json"), "--delta-max", "0"});
  CHECK(inf.code == qopf::exit_convergence);
  CHECK(inf.err.find("infeasible") != std::string::npos);

  const Run ok = run({"opf", data("ieee37-balanced.json"), "--delta-max", "0.3"});
  CHECK(ok.code == 0);
  CHECK(run({"opf", data("two-bus.json"), "--method", "magic"}).code == qopf::exit_validation);
  CHECK(run({}).code == qopf::exit_validation);
}

TEST_CASE("threephase-opf") {
  const Run r = run({"threephase-opf", data("ieee37-unbalanced.json")});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["generators"].size() == 3u);
  CHECK(j["exact_losses"].get<double>() <= 0.4 * j["base_losses"].get<double>());
  CHECK(j["eps_p"].get<double>() <= 3.0);
  CHECK(run({"threephase-opf", data("two-bus.json")}).code == qopf::exit_validation);
}

TEST_CASE("fleet output is reproducible and self-consistent") {
  const fs::path a = scratch("fleet-a"), b = scratch("fleet-b");
  REQUIRE(run({"fleet", "--count", "20", "--seed", "7", "--out", a.string()}).code == 0);
  REQUIRE(run({"fleet", "--count", "20", "--seed", "7", "--threads", "3", "--out", b.string()}).code == 0);
  const std::string csv = slurp(a / "fleet.csv");
  CHECK(csv == slurp(b / "fleet.csv"));
  CHECK(slurp(a / "histograms.csv") == slurp(b / "histograms.csv"));

  const std::vector<std::string> rows = lines(csv);
  REQUIRE(rows.size() == 21u);
  CHECK(rows[0] == "seed,n,base_losses,opt_losses,improvement,eps_p,eps_v,min_v,delta_ok,status");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const std::vector<std::string> c = split(rows[k]);
    REQUIRE(c.size() == 10u);
    CHECK(std::stoull(c[0]) == 7 + k - 1);
    CHECK(c[9] == "ok");
    const double base = std::stod(c[2]), opt = std::stod(c[3]);
    CHECK(std::stod(c[4]) == 100.0 * (base - opt) / base);
  }
  const std::vector<std::string> hist = lines(slurp(a / "histograms.csv"));
  CHECK(hist.size() == 41u);

  const Run one = run({"fleet", "--count", "1", "--seed", "26"});
  REQUIRE(one.code == 0);
  CHECK(lines(one.out).size() == 2u);
  CHECK(one.out == run({"fleet", "--count", "1", "--seed", "26"}).out);
  CHECK(lines(one.out)[1] == lines(slurp(a / "fleet.csv"))[20]);
}

TEST_CASE("gen emits a loadable feeder") {
  const fs::path p = scratch("gen.json");
  REQUIRE(run({"gen", "--seed", "3", "--out", p.string()}).code == 0);
  const qopf::FeederModel f = qopf::load_feeder(p);
  CHECK(f.bus_count() >= 30);
  CHECK(run({"gen", "--seed", "3"}).out == slurp(p));

  const fs::path params = scratch("params.json");
  std::ofstream(params) << R"({"n_min": 5, "n_max": 5})";
  const Run small = run({"gen", "--seed", "1", "--params", params.string()});
  REQUIRE(small.code == 0);
  CHECK(qopf::parse_feeder(small.out).bus_count() == 5);
  std::ofstream(params) << R"({"n_min": 5, "n_max": 1})";
  CHECK(run({"gen", "--params", params.string()}).code == qopf::exit_validation);
}
