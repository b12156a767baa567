#ifndef RANKGUARD_CRITERIA_HPP
#define RANKGUARD_CRITERIA_HPP

#include <string>
#include <vector>

#include "rankguard/dpdfit.hpp"
#include "rankguard/types.hpp"

namespace rankguard {

enum class CriterionKind { AIC, BIC, PC1, PC2, PC3, IC1, IC2, IC3, DIC, RCC, DICMR };

std::string criterionName(CriterionKind kind);
CriterionKind criterionFromName(const std::string& name);

/// Criterion value per candidate rank plus the selected (argmin) rank.
/// `selected` is the smallest index attaining the minimum.
struct CriterionTrace {
  std::string kind;
  double alpha = 0.0;
  std::vector<double> values;  // indexed by rank, starting at `first_rank`
  Index first_rank = 0;        // 0 for penalized criteria, 1 for CV traces
  Index selected = 0;

  void select();  // recompute `selected` from `values`

  std::string toJson() const;
  void toCsv(const std::string& path) const;
};

struct CriterionEngine {
  enum class Type { ClassicalSvd, Rsvddpd };
  Type type = Type::ClassicalSvd;
  double alpha = 0.0;  // robustness parameter when type == Rsvddpd
};

/// C^phi_alpha = (2pi)^{-alpha/2} (1+alpha)^{-3/2}.
double cPhiAlpha(double alpha);

/// DICMR trace: values[r] = H_alpha^{(r)} + r(n+p)/(2np) (2pi)^{-alpha/2}
/// sigma_r^{-alpha} ((1+alpha)/(1+2alpha))^{3/2}, r = 0..r_max.
/// `fit` must come from fitSequential at the same alpha with rank >= r_max.
CriterionTrace dicmrTrace(const Matrix& X, double alpha, Index r_max,
                          const DpdFit& fit);

/// The penalized-criterion menu other than DICMR. AIC..IC3 are the classical
/// Frobenius-discrepancy criteria (optionally on robust triplet estimates);
/// DIC and RCC require the Rsvddpd engine.
/// `dic_rank_exponent` switches the DIC penalty exponent from 3/2 to 1+r/2.
CriterionTrace classicalTrace(CriterionKind kind, const Matrix& X, Index r_max,
                              const CriterionEngine& engine,
                              bool dic_rank_exponent = false);

/// Position of the sharpest slope change in a non-increasing value sequence
/// (argmax of the second difference, 1-based; ties to the smallest index).
Index elbow(const std::vector<double>& values);

/// max{k : values[k] > tau}, 0 if none. `values` sorted non-increasing.
Index thresholdRank(const std::vector<double>& values, double tau);

Index defaultRankMax(Index n, Index p);

}  // namespace rankguard

#endif
