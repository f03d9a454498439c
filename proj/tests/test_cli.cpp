#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "netdiff/config.hpp"
#include "netdiff/error.hpp"
#include "netdiff/panel.hpp"
#include "netdiff/report.hpp"

namespace fs = std::filesystem;
using namespace netdiff;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("netdiff_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int status;
  std::string err;
};

Run cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" NETDIFF_CLI "' " + args + " 2> stderr.txt > /dev/null";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(dir / "stderr.txt")};
}

PanelDataset panel(const std::string& outcome, const std::string& cov, const std::string& prox,
                   PanelOptions opt = {}) {
  std::istringstream a(outcome), b(cov), c(prox);
  return ingest_panel(a, b, c, opt);
}

const std::string kOutcome = "unit,wave,y\nA,1,0\nA,2,1\nA,3,1\nB,1,1\nB,2,0\nB,3,0\nC,1,0\nC,2,0\nC,3,1\n";
const std::string kEdges = "from,to\nA,B\nB,C\n";

}  // namespace

TEST_CASE("interpolation fills interior gaps") {
  std::vector<double> v{1.0, std::nan(""), 3.0};
  interpolate_series(v, {1, 2, 3});
  CHECK(v == std::vector<double>{1.0, 2.0, 3.0});
  std::vector<double> w{std::nan(""), 2.0, std::nan(""), std::nan(""), 8.0};
  interpolate_series(w, {0, 1, 2, 4, 5});
  CHECK(std::isnan(w[0]));
  CHECK(w[2] == doctest::Approx(3.5));
  CHECK(w[3] == doctest::Approx(6.5));
}

TEST_CASE("panel ingest") {
  const auto p = panel(kOutcome,
                       "unit,wave,gdp\nA,1,1\nA,2,NA\nA,3,3\nB,1,NA\nB,2,\nB,3,NA\nC,1,5\nC,2,6\nC,3,7\n", kEdges);
  CHECK(p.units == std::vector<std::string>{"A", "B", "C"});
  CHECK(p.waves == std::vector<long>{1, 2, 3});
  CHECK(p.outcome[1] == BinaryVector{1, 0, 0});
  CHECK(p.covariates[1](0, 0) == doctest::Approx(2.0));
  // B is never observed: overall mean of the observed cells (1, 3, 5, 6, 7).
  for (int t = 0; t < 3; ++t) CHECK(p.covariates[t](1, 0) == doctest::Approx(4.4));
  CHECK(p.network.adjacency()(0, 1) == 1.0);
  CHECK(p.network.adjacency()(1, 0) == 1.0);
  CHECK(p.network.adjacency()(0, 2) == 0.0);
}

TEST_CASE("a unit absent from the covariate file gets the mean") {
  const auto p = panel(kOutcome, "unit,wave,gdp\nA,1,2\nA,2,2\nA,3,2\nC,1,4\nC,2,4\nC,3,4\n", kEdges);
  CHECK(p.covariates[0](1, 0) == doctest::Approx(3.0));
}

TEST_CASE("panel ingest errors") {
  const std::string cov = "unit,wave,gdp\nA,1,1\n";
  std::string gap = kOutcome;
  gap.replace(gap.find("B,2,0"), 5, "B,2,NA");
  try {
    panel(gap, cov, kEdges);
    FAIL("missing outcome accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("B/2") != std::string::npos);
  }
  std::string dropped = kOutcome;
  dropped.erase(dropped.find("C,3,1\n"), 6);
  CHECK_THROWS_AS(panel(dropped, cov, kEdges), ValidationError);
  CHECK_THROWS_AS(panel(kOutcome, "unit,wave,gdp\nZ,1,1\n", kEdges), ValidationError);
  CHECK_THROWS_AS(panel(kOutcome, cov, "from,to\nA,Z\n"), ValidationError);
  CHECK_THROWS_AS(panel("unit,wave,y\nA,1,2\n", cov, kEdges), ValidationError);
  PanelOptions dm;
  dm.proximity = ProximityFormat::distance_matrix;
  CHECK_THROWS_AS(panel(kOutcome, cov, ",A,B,C\nA,0,1,5\nB,1,0,2\nC,5,2,0\n", dm), InvalidArgument);
  dm.distance_threshold = 2.0;
  const auto p = panel(kOutcome, cov, ",A,B,C\nA,0,1,5\nB,1,0,2\nC,5,2,0\n", dm);
  CHECK(p.network.edge_count() == 2);
  CHECK_THROWS_AS(panel(kOutcome, cov, ",A,B,C\nA,0,1,5\nB,1,0,2\nC,4,2,0\n", dm), ValidationError);
}

TEST_CASE("config is strict") {
  CHECK_THROWS_AS(parse_run_config(R"({"grid": {"reps": 2, "rep": 3}})"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"seed": "abc"})"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config("{"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"grid": {"estimators": ["ols"]}})"), InvalidArgument);
  const auto c = parse_run_config(R"({"seed": 5, "grid": {"reps": 2, "gibbs_weights": "row_normalized"}})");
  CHECK(c.seed == 5);
  CHECK(c.grid.reps == 2);
  const auto g = effective_grid(c);
  CHECK(g.master_seed == 5);
  CHECK(g.gibbs.weights == GibbsWeights::row_normalized);
}

TEST_CASE("resolved config round trips and hashes stably") {
  const auto c = parse_run_config(R"({"seed": 9, "simulate": {"rho": -0.2}, "saom": {"phase3_reps": 300}})");
  const auto back = parse_run_config(resolved_json(c));
  CHECK(resolved_json(back) == resolved_json(c));
  CHECK(config_hash(back) == config_hash(c));
  auto moved = c;
  moved.out = "elsewhere";
  moved.workers = 4;
  CHECK(config_hash(moved) == config_hash(c));
  moved.seed = 10;
  CHECK(config_hash(moved) != config_hash(c));
  CHECK(artifact_header(c).rfind("config_hash=" + config_hash(c) + " master_seed=9", 0) == 0);
}

TEST_CASE("CSV table reader") {
  std::istringstream in("# made by hand\na,b\n1,2\n3,\n");
  const auto t = read_csv_table(in);
  CHECK(t.provenance == "made by hand");
  CHECK(t.column("b") == 1);
  CHECK(t.rows[1][1].empty());
  CHECK_THROWS(t.column("c"));
}

TEST_CASE("montecarlo then report end to end") {
  const fs::path dir = scratch("e2e");
  spit(dir / "run.json", R"({"out": "o", "grid": {"rho_values": [0.3], "n_values": [30], "reps": 2,
    "estimators": ["gibbs", "saom_avsim"]}, "gibbs": {"n_iter": 300, "burn_in": 50},
    "saom": {"phase3_reps": 200}})");
  REQUIRE(cli(dir, "--config run.json montecarlo").status == 0);
  const std::string results = slurp(dir / "o" / "results.csv");
  std::istringstream lines(results);
  std::string line;
  int gibbs = 0, saom = 0;
  std::getline(lines, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    gibbs += line.find(",gibbs,") != std::string::npos;
    saom += line.find(",saom_avsim,") != std::string::npos;
  }
  CHECK(gibbs == 2);
  CHECK(saom == 2);
  for (const char* f : {"table1_counts.csv", "table2_spatial.csv", "table3_slope.csv", "significance.csv"})
    CHECK(slurp(dir / "o" / f).rfind("# config_hash=", 0) == 0);

  // Same config, different worker count: identical bytes.
  REQUIRE(cli(dir, "--config run.json --out o2 --workers 2 montecarlo").status == 0);
  for (const char* f : {"results.csv", "table1_counts.csv", "table2_spatial.csv", "table3_slope.csv"})
    CHECK(slurp(dir / "o" / f) == slurp(dir / "o2" / f));

  REQUIRE(cli(dir, "--config run.json report").status == 0);
  REQUIRE(cli(dir, "--config run.json --out r2 report").status == 1);  // no tables under r2
  spit(dir / "rep.json", R"({"out": "r3", "report": {"input": "o"}})");
  REQUIRE(cli(dir, "--config rep.json report").status == 0);
  REQUIRE(cli(dir, "--config rep.json --out r4 report").status == 0);
  for (const auto& f : report_files()) {
    const std::string svg = slurp(dir / "r3" / f);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg == slurp(dir / "r4" / f));
    CHECK(fs::exists(dir / "o" / f));
  }
}

TEST_CASE("simulate, fit-gibbs and fit-saom from files") {
  const fs::path dir = scratch("fits");
  spit(dir / "run.json", R"({"out": ".", "network": {"n": 60}, "input": {"network": "network.txt", "data": "data.csv"},
    "gibbs": {"n_iter": 400, "burn_in": 100}, "saom": {"phase3_reps": 200}})");
  spit(dir / "sim.json", R"({"out": ".", "network": {"n": 60}})");
  REQUIRE(cli(dir, "--config sim.json --seed 3 simulate").status == 0);
  REQUIRE(cli(dir, "--config run.json fit-gibbs").status == 0);
  REQUIRE(cli(dir, "--config run.json fit-saom").status == 0);
  const auto gibbs = read_csv_table(dir / "fit_gibbs.csv");
  REQUIRE(gibbs.rows.size() == 3);
  CHECK(gibbs.rows[0][0] == "rho");
  CHECK(gibbs.rows[2][0] == "x");
  const auto saom = read_csv_table(dir / "fit_saom.csv");
  CHECK(saom.columns[1] == "theta_avSim");
  CHECK(saom.columns[2] == "theta_effFrom_x");
  REQUIRE(saom.rows.size() == 1);
  CHECK(saom.provenance.find("master_seed=20190601") != std::string::npos);
}

TEST_CASE("fit-saom on a panel") {
  const fs::path dir = scratch("panel");
  std::ostringstream outcome, cov, edges;
  outcome << "unit,wave,y\n";
  cov << "unit,wave,gdp\n";
  edges << "from,to\n";
  for (int i = 0; i < 30; ++i) {
    for (int t = 0; t < 4; ++t) {
      outcome << 'u' << i << ',' << 2000 + t << ',' << ((i * 7 + t * 3) % 5 < 2 + t / 2 ? 1 : 0) << '\n';
      cov << 'u' << i << ',' << 2000 + t << ',' << (t == 1 ? std::string("NA") : std::to_string(i % 6)) << '\n';
    }
    edges << 'u' << i << ",u" << (i + 1) % 30 << '\n';
  }
  spit(dir / "y.csv", outcome.str());
  spit(dir / "x.csv", cov.str());
  spit(dir / "e.csv", edges.str());
  spit(dir / "run.json", R"({"out": ".", "panel": {"outcome": "y.csv", "covariates": "x.csv", "proximity": "e.csv"},
    "saom": {"effects": ["linearShape", "avAlt", "effFrom:gdp"], "phase3_reps": 200}})");
  const auto r = cli(dir, "--config run.json fit-saom");
  INFO(r.err);
  REQUIRE(r.status == 0);
  const auto t = read_csv_table(dir / "fit_saom.csv");
  CHECK(t.columns[1] == "theta_linear");
  CHECK(t.columns[3] == "theta_effFrom_gdp");
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  spit(dir / "bad.json", R"({"grid": {"bogus": 1}})");
  auto r = cli(dir, "--config bad.json montecarlo");
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(cli(dir, "frobnicate").status == 1);
  CHECK(cli(dir, "--config missing.json generate").status == 1);
  spit(dir / "nofile.json", R"({"input": {"network": "nope.txt", "data": "nope.csv"}})");
  CHECK(cli(dir, "--config nofile.json fit-gibbs").status == 1);
  // A single-class outcome is a data fault; a singular spatial system is numeric.
  spit(dir / "net.txt", "n 3\nedges sym\n0 1\n1 2\n");
  spit(dir / "flat.csv", "node,x,y\n0,1,1\n1,2,1\n2,3,1\n");
  spit(dir / "flat.json", R"({"input": {"network": "net.txt", "data": "flat.csv"}})");
  CHECK(cli(dir, "--config flat.json fit-gibbs").status == 1);
  spit(dir / "sing.json", R"({"input": {"network": "net.txt"}, "simulate": {"rho": 1.0}})");
  r = cli(dir, "--config sing.json simulate");
  CHECK(r.status == 2);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(cli(dir, "--workers 0 generate").status == 1);
}
