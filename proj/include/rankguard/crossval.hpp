#ifndef RANKGUARD_CROSSVAL_HPP
#define RANKGUARD_CROSSVAL_HPP

#include <cstdint>
#include <vector>

#include "rankguard/criteria.hpp"
#include "rankguard/types.hpp"

namespace rankguard {

enum class ScaleMeasure { MSE, MAE, MAD };

ScaleMeasure measureFromName(const std::string& name);
std::string measureName(ScaleMeasure measure);

/// MSE = root-mean-square, MAE = mean absolute, MAD = median absolute
/// deviation about the median.
double aggregate(const std::vector<double>& errors, ScaleMeasure measure);

/// Every CV estimator runs either on X directly or on a robust full-rank
/// proxy of X (classical CV on the proxy; never a robust SVD per holdout).
struct CvEngine {
  enum class Type { ClassicalSvd, RobustProxy };
  Type type = Type::ClassicalSvd;
  double alpha = 0.0;
};

struct CvOptions {
  ScaleMeasure measure = ScaleMeasure::MSE;
  double em_tol = 1e-5;     // Wold EM: absolute tolerance on the imputed value
  int em_max_iter = 50;
  Index cell_cap = 5000;    // speckled estimators sample cells past this
  std::uint64_t seed = 0;
  bool ekk_scaled = false;
};

struct BcvStyle {
  Index nr = -1;            // holdout rows; default floor(n/2)
  Index nc = -1;            // holdout cols; default floor(p/2)
  int n_holdouts = 64;
  std::uint64_t seed = 0;
};

/// Gabriel block prediction of the held-out block:
/// X_{R,C^c} * partialPinv(X_{R^c,C^c}, r) * X_{R^c,C}. r = 0 gives zeros.
Matrix gabrielPredict(const Matrix& X, const BlockPartition& part, Index r);

/// Eastment-Krzanowski prediction of a single cell from the column-deleted
/// and row-deleted partial SVDs, with optional small-sample scaling.
double ekkPredict(const Matrix& X, Index i0, Index j0, Index r, bool scaled);

/// Full-rank robust reconstruction of X; classical CV applied to the result
/// recovers the rank of the outlier-free component.
Matrix robustProxy(const Matrix& X, double alpha);

struct CvResult {
  CriterionTrace trace;
  int warnings = 0;  // EM non-convergence or skipped holdouts
};

CvResult woldCv(const Matrix& X, Index r_max, const CvOptions& opts,
                const CvEngine& engine = {});

CvResult ekkCv(const Matrix& X, Index r_max, const CvOptions& opts,
               const CvEngine& engine = {});

/// Gabriel-style CV: singleton holdouts over all cells (capped sample).
CvResult gabrielCv(const Matrix& X, Index r_max, const CvOptions& opts,
                   const CvEngine& engine = {});

CvResult bcv(const Matrix& X, const BcvStyle& style, Index r_max,
             ScaleMeasure measure, const CvEngine& engine = {});

}  // namespace rankguard

#endif
