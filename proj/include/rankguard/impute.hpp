#ifndef RANKGUARD_IMPUTE_HPP
#define RANKGUARD_IMPUTE_HPP

#include <optional>
#include <string>
#include <vector>

#include "rankguard/types.hpp"

namespace rankguard {

/// Per-column robust affine normalization: center = median, scale = median
/// absolute deviation of the observed values (consistency factor 1.4826
/// optional, off by default). Zero-MAD columns fall back to scale 1 and are
/// counted as warnings.
struct ColumnNormalization {
  Vector centers;
  Vector scales;
  int zero_scale_columns = 0;

  Matrix apply(const Matrix& X) const;
  Matrix invert(const Matrix& Z) const;
};

/// `observed(i, j) == 0` marks a missing cell; pass an empty mask for fully
/// observed input. Each column needs at least 2 observed values.
ColumnNormalization normalizeColumns(const Matrix& X,
                                     const Eigen::ArrayXXi& observed = {},
                                     bool consistency_factor = false);

struct ImputeConfig {
  double alpha = 0.5;
  Index fixed_rank = -1;  // -1 selects the rank by DICMR on the observed rows
  bool normalize = true;
  BlockPartition partition;  // rows/cols of the observed corner X11
};

struct ImputeResult {
  Matrix X22_hat;
  Index selected_rank = 0;
  double alpha_used = 0;
  std::optional<double> relative_rmse;  // set when truth is supplied
  int warnings = 0;
};

/// ||truth - estimate||_F^2 / ||truth||_F^2.
double relativeRmse(const Matrix& truth, const Matrix& estimate);

/// Block completion: with X partitioned by `config.partition` so that X22
/// (complement rows x complement cols) is missing, fit robust low-rank
/// estimates of the observed blocks and impute X22_hat = L21 pinv(L11) L12.
/// `truth`, when given, is the missing block for error reporting.
ImputeResult blockImpute(const Matrix& X, const ImputeConfig& config,
                         const Matrix* truth = nullptr);

struct MonitorRow {
  double alpha = 0;
  Index rank = 0;
  std::optional<double> rel_rmse;
  bool failed = false;
};

/// DICMR rank selection + imputation per grid alpha, for the Fig.-4 style
/// monitoring plot. CSV columns: alpha, rank, rel_rmse.
std::vector<MonitorRow> monitorAlpha(const Matrix& X,
                                     const BlockPartition& partition,
                                     const std::vector<double>& alpha_grid,
                                     bool normalize = true,
                                     const Matrix* truth = nullptr);

void writeMonitorCsv(const std::vector<MonitorRow>& rows,
                     const std::string& path);

/// Download (or reuse from cache_dir) the RNA-Seq PANCAN archive, verify its
/// checksum, and parse the 801 x 20531 log2 expression matrix; `labels`
/// receives the cancer-type column. `source` may be an https URL or a local
/// archive/csv path.
Matrix pancanIngest(const std::string& source, const std::string& cache_dir,
                    std::vector<std::string>* labels = nullptr);

}  // namespace rankguard

#endif
