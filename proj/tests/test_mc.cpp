#include <set>
#include <sstream>

#include "doctest.h"
#include "netdiff/error.hpp"
#include "netdiff/mc.hpp"

using namespace netdiff;

namespace {

ExperimentGrid small_grid() {
  ExperimentGrid g;
  g.rho_values = {0.4};
  g.n_values = {40};
  g.reps = 3;
  g.gibbs.n_iter = 300;
  g.gibbs.burn_in = 50;
  g.saom.phase3_reps = 200;
  return g;
}

ReplicationRow row(double spatial, int rep, bool accepted = true) {
  ReplicationRow r;
  r.rho = 0.3;
  r.n = 50;
  r.rep = rep;
  r.estimator = Estimator::saom_avsim;
  r.spatial_est = spatial;
  r.slope_est = -spatial;
  r.spatial_sig = spatial > 2.0;
  r.converged = accepted;
  r.accepted = accepted;
  return r;
}

std::string csv(const std::vector<ReplicationRow>& rows) {
  std::ostringstream s;
  write_rows_csv(s, rows, "test");
  return s.str();
}

}  // namespace

TEST_CASE("one row per estimator and replication, each with its own seed") {
  const auto g = small_grid();
  const auto rows = run_cell(0.4, 40, 3, g);
  REQUIRE(rows.size() == 9);
  std::set<std::uint64_t> seeds;
  for (Estimator e : g.estimators) {
    int count = 0;
    for (const auto& r : rows)
      if (r.estimator == e) {
        ++count;
        seeds.insert(r.seed);
        CHECK(r.cell == "rho0.4_n40");
      }
    CHECK(count == 3);
  }
  CHECK(seeds.size() == 3);  // estimators on one dataset share its seed
}

TEST_CASE("datasets depend only on the master seed and the cell") {
  const auto g = small_grid();
  const auto a = make_dataset(g, 0.4, 40, 1);
  const auto b = make_dataset(g, 0.4, 40, 1);
  CHECK(a.network == b.network);
  CHECK(a.X == b.X);
  CHECK(a.draw.y == b.draw.y);
  CHECK(replication_seed(g, 0.4, 40, 1) != replication_seed(g, 0.4, 40, 2));
  CHECK(replication_seed(g, 0.4, 40, 1) != replication_seed(g, -0.4, 40, 1));
  CHECK(a.X.col(0).isOnes());
}

TEST_CASE("results do not depend on the worker count") {
  auto g = small_grid();
  g.rho_values = {0.0, 0.4};
  g.reps = 2;
  CHECK(csv(run_grid(g, 1)) == csv(run_grid(g, 3)));
}

TEST_CASE("rows round trip through CSV") {
  auto rows = std::vector<ReplicationRow>{row(1.25, 0), row(std::nan(""), 1, false)};
  rows[0].seconds = std::nan("");
  rows[0].cell = rows[1].cell = cell_id(0.3, 50);
  std::istringstream in(csv(rows));
  const auto back = read_rows_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].spatial_est == 1.25);
  CHECK(std::isnan(back[1].spatial_est));
  CHECK(csv(back) == csv(rows));
}

TEST_CASE("aggregate moments") {
  const auto table = aggregate({row(1, 0), row(2, 1), row(3, 2), row(4, 3)});
  REQUIRE(table.size() == 1);
  CHECK(table[0].spatial->mean == doctest::Approx(2.5));
  CHECK(table[0].spatial->sd == doctest::Approx(1.2909944));
  CHECK(*table[0].spatial_sig_rate == doctest::Approx(0.5));
  CHECK(table[0].acceptance_rate == 1.0);

  const auto same = aggregate({row(7, 0), row(7, 1), row(7, 2)});
  CHECK(same[0].spatial->mean == 7.0);
  CHECK(same[0].spatial->sd == 0.0);
}

TEST_CASE("aggregate ignores row order and rejected rows") {
  const auto a = aggregate({row(1, 0), row(2, 1), row(9, 2, false), row(3, 3)});
  const auto b = aggregate({row(3, 3), row(9, 2, false), row(1, 0), row(2, 1)});
  CHECK(a[0].spatial->mean == b[0].spatial->mean);
  CHECK(a[0].spatial->sd == b[0].spatial->sd);
  CHECK(a[0].accepted == 3);
  CHECK(a[0].rows == 4);
}

TEST_CASE("a cell with nothing accepted prints NA") {
  const auto table = aggregate({row(1, 0, false), row(2, 1, false)});
  CHECK_FALSE(table[0].spatial.has_value());
  std::ostringstream s;
  write_spatial_csv(s, table, "h");
  CHECK(s.str() == "# h\nrho,n,estimator,count,mean,sd\n0.3,50,saom_avsim,0,NA,NA\n");
}

TEST_CASE("summary tables") {
  const auto table = aggregate({row(1, 0), row(3, 1, false)});
  std::ostringstream counts, sig;
  write_counts_csv(counts, table, "h");
  write_significance_csv(sig, table, "h");
  CHECK(counts.str() == "# h\nrho,n,estimator,rows,accepted,rate\n0.3,50,saom_avsim,2,1,0.5\n");
  CHECK(sig.str() == "# h\nrho,n,estimator,count,spatial_sig,slope_sig\n0.3,50,saom_avsim,1,0,0\n");
  CHECK(find_summary(table, 0.3, 50, Estimator::saom_avsim) != nullptr);
  CHECK(find_summary(table, 0.3, 50, Estimator::gibbs) == nullptr);
}

TEST_CASE("grid validation") {
  auto g = small_grid();
  g.reps = 0;
  CHECK_THROWS_AS(validate(g), InvalidArgument);
  g = small_grid();
  g.rho_values = {1.0};
  CHECK_THROWS_AS(validate(g), InvalidArgument);
  CHECK(parse_estimator("saom_avalt") == Estimator::saom_avalt);
  CHECK_THROWS_AS(parse_estimator("ols"), InvalidArgument);
}
