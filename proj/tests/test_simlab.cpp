#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "rankguard/matcore.hpp"
#include "rankguard/simlab.hpp"

using namespace rankguard;

namespace {

Scenario cell(double delta, double sigma_e2, Profile profile, std::uint64_t seed) {
  Scenario s;
  s.delta = delta;
  s.sigma_e2 = sigma_e2;
  s.profile = profile;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a = Rng::stream(7, 1, 2);
  Rng b = Rng::stream(7, 1, 2);
  Rng c = Rng::stream(7, 1, 3);
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t va = a.next();
    CHECK(va == b.next());
    if (va != c.next()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("generate: clean cell has zero contamination") {
  const GeneratedInstance g = generate(cell(0.0, 0.05, Profile::Equal, 11));
  CHECK(g.S.norm() == 0.0);
  CHECK(g.true_rank == 10);
  CHECK((g.X - g.L - g.S).norm() > 0.0);  // the noise term is present
}

TEST_CASE("generate: equal profile gives unit singular values then zero") {
  const GeneratedInstance g = generate(cell(0.0, 0.05, Profile::Equal, 13));
  const SvdTriplets t = classicalSvd(g.L, std::min(g.L.rows(), g.L.cols()));
  for (Index k = 0; k < 10; ++k)
    CHECK(std::abs(t.values[k] - 1.0) < 1e-10);
  for (Index k = 10; k < t.values.size(); ++k)
    CHECK(std::abs(t.values[k]) < 1e-10);
}

TEST_CASE("generate: decreasing profile runs linearly from 2 to 1") {
  const GeneratedInstance g = generate(cell(0.0, 0.05, Profile::Decreasing, 17));
  const SvdTriplets t = classicalSvd(g.L, 10);
  for (Index k = 0; k < 10; ++k) {
    const double expected = 2.0 - static_cast<double>(k) / 9.0;
    CHECK(std::abs(t.values[k] - expected) < 1e-10);
  }
}

TEST_CASE("generate: noise power calibrated to sigma_e2 in expectation") {
  double sum_ratio = 0;
  const int reps = 1000;
  for (int i = 0; i < reps; ++i) {
    const GeneratedInstance g =
        generate(cell(0.0, 0.5, Profile::Equal, 100 + static_cast<std::uint64_t>(i)));
    const Matrix noise = g.X - g.L - g.S;
    sum_ratio += noise.squaredNorm() / g.L.squaredNorm();
  }
  const double mean_ratio = sum_ratio / reps;
  CHECK(mean_ratio == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("generate: contamination entries have the exact spike magnitude") {
  const GeneratedInstance g = generate(cell(0.2, 0.05, Profile::Equal, 29));
  const double spike = 5.0 * g.L.cwiseAbs().maxCoeff();
  int nonzero = 0;
  for (Index i = 0; i < g.S.rows(); ++i)
    for (Index j = 0; j < g.S.cols(); ++j)
      if (g.S(i, j) != 0.0) {
        ++nonzero;
        CHECK(std::abs(std::abs(g.S(i, j)) - spike) < 1e-12);
      }
  // About delta * n * p cells should be hit.
  CHECK(nonzero > 200);
  CHECK(nonzero < 600);
}

TEST_CASE("generate: bit-identical reproducibility") {
  const Scenario s = cell(0.1, 0.5, Profile::Decreasing, 31);
  const GeneratedInstance a = generate(s);
  const GeneratedInstance b = generate(s);
  CHECK((a.X - b.X).norm() == 0.0);
  CHECK((a.S - b.S).norm() == 0.0);
}

TEST_CASE("scenarioGrid: 24 labeled cells") {
  const auto grid = scenarioGrid(5);
  CHECK(grid.size() == 24);
  std::set<std::string> labels;
  int decreasing = 0;
  for (const Scenario& s : grid) {
    labels.insert(s.label);
    if (s.profile == Profile::Decreasing) ++decreasing;
    CHECK(s.n == 50);
    CHECK(s.p == 40);
    CHECK(s.r == 10);
  }
  CHECK(labels.size() == 12);
  CHECK(decreasing == 12);

  const Scenario s12 = scenarioByLabel("S12", Profile::Equal, 5);
  CHECK(s12.delta == doctest::Approx(0.05));
  CHECK(s12.sigma_e2 == doctest::Approx(0.5));
  const Scenario s01 = scenarioByLabel("S01", Profile::Equal, 5);
  CHECK(s01.delta == 0.0);
  CHECK(s01.sigma_e2 == doctest::Approx(0.05));
  CHECK_THROWS(scenarioByLabel("S99", Profile::Equal, 5));
}

TEST_CASE("runBench: a perfect oracle scores perfectly") {
  const Scenario s = scenarioByLabel("S11", Profile::Equal, 77);
  BenchOptions opts;
  opts.reps = 5;
  opts.threads = 1;
  const BenchReport rep = runBench({s}, {parseMethod("oracle:10")}, opts);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].prop_exact == 1.0);
  CHECK(rep.rows[0].prop_over == 0.0);
  CHECK(rep.rows[0].bias == 0.0);
  CHECK(rep.rows[0].rmse == 0.0);
  CHECK(rep.rows[0].failures == 0);
}

TEST_CASE("runBench: clean scenario, classical pc3 is exact") {
  const Scenario s = scenarioByLabel("S01", Profile::Equal, 101);
  BenchOptions opts;
  opts.reps = 20;
  opts.threads = 1;
  const BenchReport rep = runBench({s}, {parseMethod("pc3")}, opts);
  CHECK(rep.rows[0].prop_exact == 1.0);
  CHECK(rep.rows[0].bias == 0.0);
}

TEST_CASE("runBench: contaminated scenario collapses classical bic") {
  const Scenario s = scenarioByLabel("S11", Profile::Equal, 103);
  BenchOptions opts;
  opts.reps = 20;
  opts.threads = 1;
  const BenchReport rep = runBench({s}, {parseMethod("bic")}, opts);
  // The spike-dominated variance makes every additional rank look worthless,
  // so the smallest candidate rank wins every replication.
  CHECK(rep.rows[0].bias == doctest::Approx(-9.0));
  CHECK(rep.rows[0].rmse == doctest::Approx(9.0));
}

TEST_CASE("runBench: report invariants hold across methods") {
  const Scenario s = scenarioByLabel("S11", Profile::Decreasing, 107);
  BenchOptions opts;
  opts.reps = 10;
  opts.threads = 1;
  const BenchReport rep =
      runBench({s}, {parseMethod("aic"), parseMethod("pc1"), parseMethod("elbow")},
               opts);
  for (const BenchRow& row : rep.rows) {
    CHECK(row.prop_exact + row.prop_over <= 1.0 + 1e-12);
    CHECK(row.rmse >= std::abs(row.bias) - 1e-12);
    CHECK(row.reps == 10);
  }
}

TEST_CASE("runBench: identical options give identical reports") {
  const Scenario s = scenarioByLabel("S02", Profile::Equal, 109);
  BenchOptions opts;
  opts.reps = 5;
  opts.threads = 1;
  const BenchReport a = runBench({s}, {parseMethod("ic2")}, opts);
  const BenchReport b = runBench({s}, {parseMethod("ic2")}, opts);
  CHECK(a.rows[0].prop_exact == b.rows[0].prop_exact);
  CHECK(a.rows[0].bias == b.rows[0].bias);
  CHECK(a.rows[0].rmse == b.rows[0].rmse);
}

TEST_CASE("parseMethod: grammar and errors") {
  CHECK(parseMethod("dicmr:0.5").spec == "dicmr:0.5");
  CHECK_NOTHROW(parseMethod("bcv:mad"));
  CHECK_NOTHROW(parseMethod("wold:mse:rproxy:0.75"));
  CHECK_NOTHROW(parseMethod("threshold:0.2"));
  CHECK_THROWS(parseMethod("nonsense"));
  CHECK_THROWS(parseMethod("dic"));  // needs an alpha
  CHECK_THROWS(parseMethod("oracle"));
}

TEST_CASE("report export: csv and appendix-style table") {
  const Scenario s = scenarioByLabel("S01", Profile::Equal, 211);
  BenchOptions opts;
  opts.reps = 3;
  opts.threads = 1;
  const BenchReport rep = runBench({s}, {parseMethod("oracle:10")}, opts);
  const std::string path = "simlab_report_tmp.csv";
  rep.toCsv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("scenario") != std::string::npos);
  CHECK(header.find("rmse") != std::string::npos);
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1);
  std::remove(path.c_str());

  const std::string table = rep.toTable();
  CHECK(table.find("1.00") != std::string::npos);  // prop (over) layout
  CHECK(table.find("(") != std::string::npos);
}
