// rankguard command-line interface: rank estimation, benchmarking, theory
// bound curves, block imputation, alpha monitoring, scenario simulation.
//
// Exit codes: 0 success, 1 data/runtime error, 2 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rankguard/criteria.hpp"
#include "rankguard/crossval.hpp"
#include "rankguard/dpdfit.hpp"
#include "rankguard/impute.hpp"
#include "rankguard/matcore.hpp"
#include "rankguard/simlab.hpp"
#include "rankguard/theory.hpp"

namespace rg = rankguard;

namespace {

std::vector<double> parseRealList(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> splitCommas(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct RankArgs {
  std::string input, method, engine = "classical", measure = "mse", out;
  double alpha = 0.5, tau = 0.0;
  rg::Index rank_max = -1;
  std::uint64_t seed = 0;
};

bool isCriterion(const std::string& m) {
  for (const char* c : {"aic", "bic", "pc1", "pc2", "pc3", "ic1", "ic2", "ic3",
                        "dic", "rcc", "dicmr"})
    if (m == c) return true;
  return false;
}

bool isCv(const std::string& m) {
  return m == "wold" || m == "gabriel" || m == "ekk" || m == "bcv";
}

int cmdRank(const RankArgs& args) {
  const rg::Matrix X = rg::loadCsv(args.input);
  const rg::Index r_max = args.rank_max > 0
                              ? args.rank_max
                              : rg::defaultRankMax(X.rows(), X.cols());

  rg::CriterionTrace trace;
  if (isCriterion(args.method)) {
    if (args.method == "dicmr") {
      rg::DpdParams params;
      params.alpha = args.alpha;
      const rg::DpdFit fit = rg::fitSequential(X, params, r_max);
      trace = rg::dicmrTrace(X, args.alpha, r_max, fit);
    } else {
      rg::CriterionEngine engine;
      const bool robust = args.engine == "robust" || args.method == "dic" ||
                          args.method == "rcc";
      if (robust) {
        engine.type = rg::CriterionEngine::Type::Rsvddpd;
        engine.alpha = args.alpha;
      }
      trace = rg::classicalTrace(rg::criterionFromName(args.method), X, r_max,
                                 engine);
    }
  } else if (isCv(args.method)) {
    rg::CvEngine engine;
    if (args.engine == "robust") {
      engine.type = rg::CvEngine::Type::RobustProxy;
      engine.alpha = args.alpha;
    }
    const rg::ScaleMeasure measure = rg::measureFromName(args.measure);
    rg::CvOptions opts;
    opts.measure = measure;
    opts.seed = args.seed;
    rg::CvResult result;
    if (args.method == "wold")
      result = rg::woldCv(X, r_max, opts, engine);
    else if (args.method == "gabriel")
      result = rg::gabrielCv(X, r_max, opts, engine);
    else if (args.method == "ekk")
      result = rg::ekkCv(X, r_max, opts, engine);
    else {
      rg::BcvStyle style;
      style.seed = args.seed;
      result = rg::bcv(X, style, r_max, measure, engine);
    }
    trace = result.trace;
  } else if (args.method == "elbow" || args.method == "threshold") {
    const rg::Index k = std::min(r_max + 2, std::min(X.rows(), X.cols()));
    const rg::SvdTriplets t = rg::classicalSvd(X, k);
    trace.kind = args.method;
    trace.first_rank = 1;
    trace.values.assign(t.values.data(), t.values.data() + t.values.size());
    trace.selected = args.method == "elbow" ? rg::elbow(trace.values)
                                            : rg::thresholdRank(trace.values,
                                                                args.tau);
  }

  if (!args.out.empty()) {
    std::ofstream out(args.out);
    out << trace.toJson() << '\n';
  }
  std::cout << "selected_rank: " << trace.selected << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank estimation for noisy, outlier-contaminated matrices"};
  app.require_subcommand(1);

  // --- rank ---
  RankArgs rank_args;
  auto* rank = app.add_subcommand("rank", "estimate the rank of a CSV matrix");
  rank->add_option("input", rank_args.input, "input CSV matrix")->required();
  rank->add_option("--method", rank_args.method, "estimator")
      ->required()
      ->check(CLI::IsMember({"aic", "bic", "pc1", "pc2", "pc3", "ic1", "ic2",
                             "ic3", "dic", "rcc", "dicmr", "wold", "gabriel",
                             "ekk", "bcv", "elbow", "threshold"}));
  rank->add_option("--alpha", rank_args.alpha, "robustness parameter");
  rank->add_option("--rank-max", rank_args.rank_max, "largest candidate rank");
  rank->add_option("--engine", rank_args.engine, "classical|robust")
      ->check(CLI::IsMember({"classical", "robust"}));
  rank->add_option("--scale-measure", rank_args.measure, "mse|mae|mad")
      ->check(CLI::IsMember({"mse", "mae", "mad"}));
  rank->add_option("--tau", rank_args.tau, "threshold level");
  rank->add_option("--seed", rank_args.seed, "random seed");
  rank->add_option("--out", rank_args.out, "trace JSON output path");

  // --- bench ---
  struct {
    bool grid = false;
    std::string scenario, profile = "equal", methods, out;
    int reps = 100, threads = 0;
    std::uint64_t seed = 0;
    rg::Index r_max = -1;
  } bench_args;
  auto* bench = app.add_subcommand("bench", "run the simulation benchmark");
  bench->add_flag("--scenario-grid", bench_args.grid, "run the full grid");
  bench->add_option("--scenario", bench_args.scenario, "single cell, e.g. S01");
  bench->add_option("--profile", bench_args.profile, "equal|decreasing")
      ->check(CLI::IsMember({"equal", "decreasing"}));
  bench->add_option("--methods", bench_args.methods, "comma-separated specs")
      ->required();
  bench->add_option("--reps", bench_args.reps, "replications")
      ->check(CLI::PositiveNumber);
  bench->add_option("--threads", bench_args.threads, "worker threads");
  bench->add_option("--rank-max", bench_args.r_max, "largest candidate rank");
  bench->add_option("--seed", bench_args.seed, "base seed");
  bench->add_option("--out", bench_args.out, "report CSV path");

  // --- bound ---
  struct {
    std::string alphas = "0", out;
    double lo = -3, hi = 3;
    int steps = 61;
  } bound_args;
  auto* bound = app.add_subcommand("bound", "theoretical bound curve");
  bound->add_option("--alpha-list", bound_args.alphas, "comma-separated alphas");
  bound->add_option("--logratio-min", bound_args.lo, "smallest log(n/p)");
  bound->add_option("--logratio-max", bound_args.hi, "largest log(n/p)");
  bound->add_option("--steps", bound_args.steps, "grid points per alpha")
      ->check(CLI::Range(2, 1000000));
  bound->add_option("--out", bound_args.out, "curve CSV path");

  // --- impute / monitor ---
  struct {
    std::string input, block, alpha_grid, rank = "dicmr", truth, out, cache;
    double alpha = 0.5;
    bool normalize = false, pancan = false;
  } imp_args;
  auto addImputeFlags = [&](CLI::App* cmd, bool grid_required) {
    cmd->add_option("input", imp_args.input, "input CSV (or archive/URL with --pancan)")
        ->required();
    cmd->add_option("--missing-block", imp_args.block,
                    "r0:r1,c0:c1 half-open 0-based missing corner")
        ->required();
    if (grid_required)
      cmd->add_option("--alpha-grid", imp_args.alpha_grid,
                      "comma-separated alphas")->required();
    else {
      cmd->add_option("--alpha", imp_args.alpha, "robustness parameter");
      cmd->add_option("--alpha-grid", imp_args.alpha_grid,
                      "comma-separated alphas (monitoring mode)");
    }
    cmd->add_flag("--normalize", imp_args.normalize, "median/MAD normalization");
    cmd->add_option("--rank", imp_args.rank, "fixed:K or dicmr");
    cmd->add_option("--truth", imp_args.truth, "true missing block CSV");
    cmd->add_option("--out", imp_args.out, "output path");
    cmd->add_flag("--pancan", imp_args.pancan, "ingest the RNA-Seq PANCAN archive");
    cmd->add_option("--cache", imp_args.cache,
                    "download cache dir (default $RANKGUARD_CACHE)");
  };
  auto* impute = app.add_subcommand("impute", "complete a missing corner block");
  addImputeFlags(impute, false);
  auto* monitor = app.add_subcommand("monitor", "rank/error vs alpha monitoring");
  addImputeFlags(monitor, true);

  // --- simulate ---
  struct {
    std::string scenario = "S01", profile = "equal", out = "instance";
    std::uint64_t seed = 0;
  } sim_args;
  auto* simulate = app.add_subcommand("simulate", "generate one scenario instance");
  simulate->add_option("--scenario", sim_args.scenario, "cell label, e.g. S11");
  simulate->add_option("--profile", sim_args.profile, "equal|decreasing")
      ->check(CLI::IsMember({"equal", "decreasing"}));
  simulate->add_option("--seed", sim_args.seed, "seed");
  simulate->add_option("--out", sim_args.out, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Normalize CLI11's internal codes to the documented contract:
    // 0 for --help/--version, 2 for any usage error.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (rank->parsed()) return cmdRank(rank_args);

    if (bench->parsed()) {
      std::vector<rg::Scenario> scenarios;
      if (bench_args.grid) {
        scenarios = rg::scenarioGrid(bench_args.seed);
      } else if (!bench_args.scenario.empty()) {
        scenarios.push_back(rg::scenarioByLabel(
            bench_args.scenario, rg::profileFromName(bench_args.profile),
            bench_args.seed));
      } else {
        std::cerr << "one of --scenario-grid or --scenario is required\n";
        return 2;
      }
      std::vector<rg::Method> methods;
      for (const std::string& spec : splitCommas(bench_args.methods))
        methods.push_back(rg::parseMethod(spec));
      rg::BenchOptions opts;
      opts.reps = bench_args.reps;
      opts.threads = bench_args.threads;
      opts.r_max = bench_args.r_max;
      const rg::BenchReport report = rg::runBench(scenarios, methods, opts);
      if (!bench_args.out.empty()) {
        report.toCsv(bench_args.out);
        std::ofstream(bench_args.out + ".txt") << report.toTable();
      }
      std::cout << report.toTable();
      return 0;
    }

    if (bound->parsed()) {
      const auto curve = rg::boundCurve(parseRealList(bound_args.alphas),
                                        bound_args.lo, bound_args.hi,
                                        bound_args.steps);
      if (!bound_args.out.empty()) rg::writeBoundCurve(curve, bound_args.out);
      for (const auto& pt : curve)
        std::cout << pt.log_ratio << ',' << pt.alpha << ',' << pt.probability
                  << '\n';
      return 0;
    }

    if (impute->parsed() || monitor->parsed()) {
      rg::Matrix X;
      if (imp_args.pancan) {
        std::string cache = imp_args.cache;
        if (cache.empty()) {
          const char* env = std::getenv("RANKGUARD_CACHE");
          cache = env ? env : "pancan-cache";
        }
        X = rg::pancanIngest(imp_args.input, cache);
      } else {
        X = rg::loadCsv(imp_args.input);
      }

      // --missing-block r0:r1,c0:c1
      rg::Index r0, r1, c0, c1;
      if (std::sscanf(imp_args.block.c_str(), "%td:%td,%td:%td", &r0, &r1, &c0,
                      &c1) != 4) {
        std::cerr << "bad --missing-block, expected r0:r1,c0:c1\n";
        return 2;
      }
      rg::BlockPartition part;
      for (rg::Index i = 0; i < X.rows(); ++i)
        if (i < r0 || i >= r1) part.rows1.push_back(i);
      for (rg::Index j = 0; j < X.cols(); ++j)
        if (j < c0 || j >= c1) part.cols1.push_back(j);
      part.validate(X.rows(), X.cols());

      std::optional<rg::Matrix> truth;
      if (!imp_args.truth.empty()) truth = rg::loadCsv(imp_args.truth);

      if (monitor->parsed() || !imp_args.alpha_grid.empty()) {
        const auto rows = rg::monitorAlpha(
            X, part, parseRealList(imp_args.alpha_grid), imp_args.normalize,
            truth ? &*truth : nullptr);
        const std::string out =
            imp_args.out.empty() ? "monitor.csv" : imp_args.out;
        rg::writeMonitorCsv(rows, out);
        for (const auto& row : rows) {
          std::cout << "alpha " << row.alpha << ": rank " << row.rank;
          if (row.rel_rmse) std::cout << ", rel_rmse " << *row.rel_rmse;
          if (row.failed) std::cout << " (failed)";
          std::cout << '\n';
        }
        return 0;
      }

      rg::ImputeConfig config;
      config.alpha = imp_args.alpha;
      config.normalize = imp_args.normalize;
      config.partition = part;
      if (imp_args.rank.rfind("fixed:", 0) == 0)
        config.fixed_rank = std::stol(imp_args.rank.substr(6));
      else if (imp_args.rank != "dicmr") {
        std::cerr << "bad --rank, expected fixed:K or dicmr\n";
        return 2;
      }
      const rg::ImputeResult result =
          rg::blockImpute(X, config, truth ? &*truth : nullptr);
      if (!imp_args.out.empty()) rg::saveCsv(result.X22_hat, imp_args.out);
      std::cout << "selected_rank: " << result.selected_rank << '\n';
      if (result.relative_rmse)
        std::cout << "rel_rmse: " << *result.relative_rmse << '\n';
      return 0;
    }

    if (simulate->parsed()) {
      rg::Scenario scenario = rg::scenarioByLabel(
          sim_args.scenario, rg::profileFromName(sim_args.profile),
          sim_args.seed);
      const rg::GeneratedInstance inst = rg::generate(scenario);
      rg::saveCsv(inst.X, sim_args.out + "-X.csv");
      rg::saveCsv(inst.L, sim_args.out + "-L.csv");
      rg::saveCsv(inst.S, sim_args.out + "-S.csv");
      std::cout << "true_rank: " << inst.true_rank << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
