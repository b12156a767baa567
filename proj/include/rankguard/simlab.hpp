#ifndef RANKGUARD_SIMLAB_HPP
#define RANKGUARD_SIMLAB_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rankguard/types.hpp"

namespace rankguard {

/// Deterministic 64-bit stream generator (splitmix64 core) with hand-rolled
/// Box-Muller normals, so generated matrices are bit-identical across
/// compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Substream keyed by (seed, a, b); streams with distinct keys are
  /// statistically independent.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

  std::uint64_t next();
  double uniform();  // [0, 1)
  double normal();   // N(0, 1)

 private:
  std::uint64_t state_;
  double spare_ = 0;
  bool has_spare_ = false;
};

enum class Profile { Equal, Decreasing };

Profile profileFromName(const std::string& name);
std::string profileName(Profile profile);

/// One simulation cell: dimensions, true rank, singular-value profile,
/// noise-to-signal ratio sigma_e2 (1/SNR), contamination proportion delta.
struct Scenario {
  Index n = 50;
  Index p = 40;
  Index r = 10;
  Profile profile = Profile::Equal;
  double sigma_e2 = 0.05;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string label;

  void validate() const;
};

struct GeneratedInstance {
  Matrix X;  // L + S + noise
  Matrix L;  // rank-r truth
  Matrix S;  // sparse contamination
  Index true_rank = 0;
};

/// L = U_A D V_A^T from a standard normal matrix A; noise scaled so its
/// expected squared Frobenius norm is sigma_e2 * ||L||_F^2; contamination
/// s_ij = 5 delta_ij (2 eta_ij - 1) max|L| with Bernoulli(delta) support.
GeneratedInstance generate(const Scenario& scenario);

/// The benchmark grid: delta in {0, 0.05, 0.1, 0.2} x sigma_e2 in
/// {0.05, 0.5, 1} at n=50, p=40, r=10, labeled Sij (i indexes delta from 0,
/// j indexes sigma_e2 from 1), once per profile — 24 scenarios.
std::vector<Scenario> scenarioGrid(std::uint64_t seed = 0);

/// Scenario with the given label ("S01".."S33") and profile from the grid.
Scenario scenarioByLabel(const std::string& label, Profile profile,
                         std::uint64_t seed = 0);

/// A rank estimator bound to its configuration, built from a compact spec
/// string (see parseMethod).
struct Method {
  std::string spec;
  // Returns the estimated rank; seed feeds any internal randomness.
  std::function<Index(const Matrix& X, Index r_max, std::uint64_t seed)> run;
};

/// Spec grammar (":"-separated, case-insensitive names):
///   criteria:  aic | bic | pc1..pc3 | ic1..ic3            [:robust:ALPHA]
///              dic:ALPHA | rcc:ALPHA | dicmr:ALPHA
///   cv:        wold | gabriel | ekk | bcv  [:mse|mae|mad]  [:rproxy:ALPHA]
///   other:     elbow | threshold:TAU | oracle:R
Method parseMethod(const std::string& spec);

struct BenchRow {
  std::string scenario;
  std::string method;
  double prop_exact = 0;
  double prop_over = 0;
  double bias = 0;
  double rmse = 0;
  int failures = 0;
  int reps = 0;
  double wall_ms = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  void toCsv(const std::string& path) const;
  /// Appendix-style layout: "prop (over)" and "bias (rmse)" per cell.
  std::string toTable() const;
};

struct BenchOptions {
  int reps = 100;
  int threads = 0;       // 0 = hardware concurrency
  Index r_max = -1;      // -1 = min(n,p)/2
};

/// Per-replication seeds derive from scenario seed + replication index;
/// method failures are counted and excluded from the aggregates.
BenchReport runBench(const std::vector<Scenario>& scenarios,
                     const std::vector<Method>& methods,
                     const BenchOptions& opts);

}  // namespace rankguard

#endif
