#include "rankguard/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rankguard/dpdfit.hpp"
#include "rankguard/matcore.hpp"

namespace rankguard {

namespace {

double median(std::vector<double> v) {
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(m), v.end());
  double hi = v[m];
  if (v.size() % 2 == 0) {
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(m));
    return 0.5 * (lo + hi);
  }
  return hi;
}

Matrix engineInput(const Matrix& X, const CvEngine& engine) {
  if (engine.type == CvEngine::Type::RobustProxy) return robustProxy(X, engine.alpha);
  return X;
}

std::vector<std::pair<Index, Index>> sampleCells(Index n, Index p, Index cap,
                                                 std::uint64_t seed) {
  std::vector<std::pair<Index, Index>> cells;
  cells.reserve(static_cast<size_t>(n * p));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) cells.emplace_back(i, j);
  if (static_cast<Index>(cells.size()) > cap) {
    std::mt19937_64 gen(seed);
    std::shuffle(cells.begin(), cells.end(), gen);
    cells.resize(static_cast<size_t>(cap));
    std::sort(cells.begin(), cells.end());
  }
  return cells;
}

std::vector<Index> sampleIndices(Index bound, Index count, std::mt19937_64& gen) {
  std::vector<Index> all(static_cast<size_t>(bound));
  std::iota(all.begin(), all.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, bound - 1);
    std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(pick(gen))]);
  }
  all.resize(static_cast<size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

// Top right-singular-vector basis of M via the smaller Gram matrix;
// columns ordered by decreasing eigenvalue.
Matrix topRightBasis(const Matrix& gram, Index r) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Index p = gram.rows();
  Matrix V(p, r);
  for (Index k = 0; k < r; ++k) V.col(k) = eig.eigenvectors().col(p - 1 - k);
  return V;
}

}  // namespace

ScaleMeasure measureFromName(const std::string& name) {
  if (name == "mse") return ScaleMeasure::MSE;
  if (name == "mae") return ScaleMeasure::MAE;
  if (name == "mad") return ScaleMeasure::MAD;
  throw Error("unknown scale measure: " + name);
}

std::string measureName(ScaleMeasure measure) {
  switch (measure) {
    case ScaleMeasure::MSE: return "mse";
    case ScaleMeasure::MAE: return "mae";
    case ScaleMeasure::MAD: return "mad";
  }
  return "unknown";
}

double aggregate(const std::vector<double>& errors, ScaleMeasure measure) {
  if (errors.empty()) throw EmptyErrors();
  switch (measure) {
    case ScaleMeasure::MSE: {
      double ss = 0;
      for (double e : errors) ss += e * e;
      return std::sqrt(ss / static_cast<double>(errors.size()));
    }
    case ScaleMeasure::MAE: {
      double sa = 0;
      for (double e : errors) sa += std::abs(e);
      return sa / static_cast<double>(errors.size());
    }
    case ScaleMeasure::MAD: {
      const double med = median(errors);
      std::vector<double> dev(errors.size());
      for (size_t i = 0; i < errors.size(); ++i) dev[i] = std::abs(errors[i] - med);
      return median(dev);
    }
  }
  throw Error("unreachable");
}

Matrix gabrielPredict(const Matrix& X, const BlockPartition& part, Index r) {
  part.validate(X.rows(), X.cols());
  const auto rc = part.rowComplement(X.rows());
  const auto cc = part.colComplement(X.cols());
  if (r == 0)
    return Matrix::Zero(static_cast<Index>(part.rows1.size()),
                        static_cast<Index>(part.cols1.size()));
  const Matrix corner = submatrix(X, rc, cc);
  if (r > std::min(corner.rows(), corner.cols()))
    throw RankOutOfRange("holdout complement smaller than rank " + std::to_string(r));
  const Matrix pinv = partialPinv(corner, r);
  return submatrix(X, part.rows1, cc) * pinv * submatrix(X, rc, part.cols1);
}

double ekkPredict(const Matrix& X, Index i0, Index j0, Index r, bool scaled) {
  const Index n = X.rows(), p = X.cols();
  if (r > std::min(n - 1, p - 1))
    throw RankOutOfRange("ekk rank " + std::to_string(r));
  if (r == 0) return 0.0;

  std::vector<Index> all_rows(static_cast<size_t>(n)), keep_rows;
  std::iota(all_rows.begin(), all_rows.end(), Index{0});
  for (Index i = 0; i < n; ++i)
    if (i != i0) keep_rows.push_back(i);
  std::vector<Index> all_cols, keep_cols;
  for (Index j = 0; j < p; ++j) {
    all_cols.push_back(j);
    if (j != j0) keep_cols.push_back(j);
  }
  const SvdTriplets col_del = classicalSvd(submatrix(X, all_rows, keep_cols), r);
  const SvdTriplets row_del = classicalSvd(submatrix(X, keep_rows, all_cols), r);

  const double cs = scaled ? std::sqrt(static_cast<double>(p) / (p - 1)) : 1.0;
  const double rs = scaled ? std::sqrt(static_cast<double>(n) / (n - 1)) : 1.0;

  double pred = 0;
  for (Index k = 0; k < r; ++k) {
    // The two SVDs carry free signs; align on the shared n-1 rows.
    double dot = 0;
    for (size_t i = 0; i < keep_rows.size(); ++i)
      dot += col_del.left(keep_rows[i], k) * row_del.left(static_cast<Index>(i), k);
    const double sign = dot < 0 ? -1.0 : 1.0;
    pred += std::sqrt(col_del.values[k] * cs) * std::sqrt(row_del.values[k] * rs) *
            col_del.left(i0, k) * sign * row_del.right(j0, k);
  }
  return pred;
}

Matrix robustProxy(const Matrix& X, double alpha) {
  DpdParams params;
  params.alpha = alpha;
  const Index m = std::min(X.rows(), X.cols());
  if (X.cwiseAbs().maxCoeff() == 0.0) return X;
  DpdFit fit = fitSequential(X, params, m);
  return fit.triplets.reconstruct();
}

CvResult woldCv(const Matrix& X_in, Index r_max, const CvOptions& opts,
                const CvEngine& engine) {
  const Matrix X = engineInput(X_in, engine);
  const Index n = X.rows(), p = X.cols();
  if (r_max < 1 || r_max >= std::min(n, p))
    throw RankOutOfRange("wold r_max = " + std::to_string(r_max));

  const auto cells = sampleCells(n, p, opts.cell_cap, opts.seed);
  const bool use_row_gram = n < p;  // work with the smaller Gram matrix
  const Matrix base_gram =
      use_row_gram ? Matrix(X * X.transpose()) : Matrix(X.transpose() * X);
  const Index dim = base_gram.rows();
  const double total_sum = X.sum();

  // Replacing one cell of X by z perturbs the Gram matrix by the rank-2
  // correction c (w e_idx^T + e_idx w^T) + c^2 e_idx e_idx^T with c = z - x,
  // where w is the affected column (or row) of X. For one cell the whole
  // iteration is therefore confined, to high accuracy, to the span of the
  // top eigenvectors of the unperturbed Gram matrix together with w and
  // e_idx. Projecting onto that subspace once per cell turns every
  // subsequent step into small dense algebra; when the subspace covers the
  // full space (small matrices) the reduction is exact.
  const Index q = std::min(dim, r_max + 2);
  const Matrix top_basis = topRightBasis(base_gram, q);
  const Index s = std::min(dim, q + 2);

  CvResult result;
  std::vector<std::vector<double>> errors(static_cast<size_t>(r_max));

  // Workspaces hoisted out of the cell loop; sizes are fixed per call.
  Matrix span(dim, q + 2), Q(dim, s), A0(s, s), gq(dim, s), A(s, s);
  Vector wt(s), et(s), ge(s), gw(s), sge2(s + 1), sgeg(s + 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  const Matrix thin_id = Matrix::Identity(dim, s);

  for (const auto& [i, j] : cells) {
    const double x = X(i, j);
    const Vector w = use_row_gram ? Vector(X.col(j)) : Vector(X.row(i));
    const Index idx = use_row_gram ? i : j;

    // Orthonormal basis Q of span(top eigenvectors, w, e_idx) and the
    // reduced coordinates of everything the iteration needs.
    span.leftCols(q) = top_basis;
    span.col(q) = w;
    span.col(q + 1).setZero();
    span(idx, q + 1) = 1.0;
    Eigen::HouseholderQR<Matrix> sqr(span);
    Q.noalias() = sqr.householderQ() * thin_id;
    gq.noalias() = base_gram * Q;
    A0.noalias() = Q.transpose() * gq;
    A0 = 0.5 * (A0 + A0.transpose()).eval();
    wt.noalias() = Q.transpose() * w;
    et = Q.row(idx).transpose();

    double z = (total_sum - x) / static_cast<double>(n * p - 1);
    // z value at which the stored eigendecomposition of the reduced matrix
    // was taken; refreshed lazily whenever z drifts beyond half the EM
    // tolerance, and shared across ranks since one decomposition yields the
    // prediction for every rank through suffix sums.
    double z_eig = std::numeric_limits<double>::quiet_NaN();

    for (Index r = 1; r <= r_max; ++r) {
      // For a fixed top-r eigenbasis with rows g = e_idx^T Q V_r the
      // prediction is affine in z: f(z) = g V_r^T w + (z - x) |g|^2, so each
      // pass solves the affine model for its fixed point directly instead of
      // stepping z = f(z); that removes the slow geometric crawl on
      // high-leverage cells while converging to the same fixed point.
      bool stable = false;
      for (int it = 0; it < opts.em_max_iter; ++it) {
        const double c = z - x;
        if (!(std::abs(z - z_eig) < 0.5 * opts.em_tol)) {
          A = A0;
          A.noalias() += (c * wt) * et.transpose();
          A.noalias() += (c * et) * wt.transpose();
          A.noalias() += (c * c * et) * et.transpose();
          es.compute(A);
          ge.noalias() = es.eigenvectors().transpose() * et;
          gw.noalias() = es.eigenvectors().transpose() * wt;
          // Eigenvalues come in ascending order, so rank r uses the suffix
          // of length r: sge2[k] = sum over components k..s-1.
          sge2[s] = 0.0;
          sgeg[s] = 0.0;
          for (Index k = s - 1; k >= 0; --k) {
            sge2[k] = sge2[k + 1] + ge[k] * ge[k];
            sgeg[k] = sgeg[k + 1] + ge[k] * gw[k];
          }
          z_eig = z;
        }
        const double lever = sge2[s - r];
        const double a0v = sgeg[s - r];
        const double z_new = lever < 1.0 - 1e-9
                                 ? (a0v - x * lever) / (1.0 - lever)
                                 : a0v + c * lever;
        const bool done = std::abs(z_new - z) < opts.em_tol;
        z = z_new;
        if (done) {
          stable = true;
          break;
        }
      }
      if (!stable) ++result.warnings;
      errors[static_cast<size_t>(r - 1)].push_back(x - z);
    }
  }

  result.trace.kind = "wold-" + measureName(opts.measure);
  result.trace.alpha = engine.type == CvEngine::Type::RobustProxy ? engine.alpha : 0.0;
  result.trace.first_rank = 1;
  for (const auto& e : errors) result.trace.values.push_back(aggregate(e, opts.measure));
  result.trace.select();
  return result;
}

CvResult ekkCv(const Matrix& X_in, Index r_max, const CvOptions& opts,
               const CvEngine& engine) {
  const Matrix X = engineInput(X_in, engine);
  const Index n = X.rows(), p = X.cols();
  if (r_max < 1 || r_max > std::min(n - 1, p - 1))
    throw RankOutOfRange("ekk r_max = " + std::to_string(r_max));

  // One SVD per deleted column and per deleted row serves every cell.
  std::vector<SvdTriplets> col_del(static_cast<size_t>(p));
  std::vector<SvdTriplets> row_del(static_cast<size_t>(n));
  {
    std::vector<Index> rows(static_cast<size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    for (Index j0 = 0; j0 < p; ++j0) {
      std::vector<Index> keep;
      for (Index j = 0; j < p; ++j)
        if (j != j0) keep.push_back(j);
      col_del[static_cast<size_t>(j0)] = classicalSvd(submatrix(X, rows, keep), r_max);
    }
    std::vector<Index> cols(static_cast<size_t>(p));
    std::iota(cols.begin(), cols.end(), Index{0});
    for (Index i0 = 0; i0 < n; ++i0) {
      std::vector<Index> keep;
      for (Index i = 0; i < n; ++i)
        if (i != i0) keep.push_back(i);
      row_del[static_cast<size_t>(i0)] = classicalSvd(submatrix(X, keep, cols), r_max);
    }
  }

  const double cs = opts.ekk_scaled ? std::sqrt(static_cast<double>(p) / (p - 1)) : 1.0;
  const double rs = opts.ekk_scaled ? std::sqrt(static_cast<double>(n) / (n - 1)) : 1.0;

  const auto cells = sampleCells(n, p, opts.cell_cap, opts.seed);
  std::vector<std::vector<double>> errors(static_cast<size_t>(r_max));
  for (const auto& [i0, j0] : cells) {
    const SvdTriplets& cd = col_del[static_cast<size_t>(j0)];
    const SvdTriplets& rd = row_del[static_cast<size_t>(i0)];
    double pred = 0;
    for (Index k = 0; k < r_max; ++k) {
      double dot = 0;
      Index ii = 0;
      for (Index i = 0; i < n; ++i) {
        if (i == i0) continue;
        dot += cd.left(i, k) * rd.left(ii, k);
        ++ii;
      }
      const double sign = dot < 0 ? -1.0 : 1.0;
      pred += std::sqrt(cd.values[k] * cs) * std::sqrt(rd.values[k] * rs) *
              cd.left(i0, k) * sign * rd.right(j0, k);
      errors[static_cast<size_t>(k)].push_back(X(i0, j0) - pred);
    }
  }

  CvResult result;
  result.trace.kind = "ekk-" + measureName(opts.measure);
  result.trace.alpha = engine.type == CvEngine::Type::RobustProxy ? engine.alpha : 0.0;
  result.trace.first_rank = 1;
  for (const auto& e : errors) result.trace.values.push_back(aggregate(e, opts.measure));
  result.trace.select();
  return result;
}

CvResult gabrielCv(const Matrix& X_in, Index r_max, const CvOptions& opts,
                   const CvEngine& engine) {
  const Matrix X = engineInput(X_in, engine);
  const Index n = X.rows(), p = X.cols();
  if (r_max < 1 || r_max > std::min(n - 1, p - 1))
    throw RankOutOfRange("gabriel r_max = " + std::to_string(r_max));

  const auto cells = sampleCells(n, p, opts.cell_cap, opts.seed);
  std::vector<std::vector<double>> errors(static_cast<size_t>(r_max));
  CvResult result;
  for (const auto& [i0, j0] : cells) {
    std::vector<Index> rc, cc;
    for (Index i = 0; i < n; ++i)
      if (i != i0) rc.push_back(i);
    for (Index j = 0; j < p; ++j)
      if (j != j0) cc.push_back(j);
    const Matrix corner = submatrix(X, rc, cc);
    const SvdTriplets t = classicalSvd(corner, r_max);
    const Vector top = submatrix(X, {i0}, cc).transpose();   // X_{i0, C^c}
    const Vector left = submatrix(X, rc, {j0});              // X_{R^c, j0}
    double pred = 0;
    for (Index k = 0; k < r_max; ++k) {
      if (t.values[k] < 1e-12) {
        ++result.warnings;
        errors[static_cast<size_t>(k)].push_back(X(i0, j0) - pred);
        continue;
      }
      pred += (top.dot(t.right.col(k))) * (t.left.col(k).dot(left)) / t.values[k];
      errors[static_cast<size_t>(k)].push_back(X(i0, j0) - pred);
    }
  }

  result.trace.kind = "gabriel-" + measureName(opts.measure);
  result.trace.alpha = engine.type == CvEngine::Type::RobustProxy ? engine.alpha : 0.0;
  result.trace.first_rank = 1;
  for (const auto& e : errors) result.trace.values.push_back(aggregate(e, opts.measure));
  result.trace.select();
  return result;
}

CvResult bcv(const Matrix& X_in, const BcvStyle& style, Index r_max,
             ScaleMeasure measure, const CvEngine& engine) {
  const Matrix X = engineInput(X_in, engine);
  const Index n = X.rows(), p = X.cols();
  const Index nr = style.nr > 0 ? style.nr : n / 2;
  const Index nc = style.nc > 0 ? style.nc : p / 2;
  if (nr < 1 || nr >= n || nc < 1 || nc >= p)
    throw ShapeError("bcv holdout dimensions out of range");
  if (style.n_holdouts < 1) throw Error("bcv needs at least one holdout");
  if (r_max < 1 || r_max > std::min(n - nr, p - nc))
    throw RankOutOfRange("bcv r_max = " + std::to_string(r_max));

  std::mt19937_64 gen(style.seed);
  std::vector<std::vector<double>> errors(static_cast<size_t>(r_max));
  CvResult result;
  for (int b = 0; b < style.n_holdouts; ++b) {
    BlockPartition part;
    part.rows1 = sampleIndices(n, nr, gen);
    part.cols1 = sampleIndices(p, nc, gen);
    const auto rc = part.rowComplement(n);
    const auto cc = part.colComplement(p);
    const Matrix corner = submatrix(X, rc, cc);
    const Matrix held = submatrix(X, part.rows1, part.cols1);
    const Matrix top = submatrix(X, part.rows1, cc);
    const Matrix left = submatrix(X, rc, part.cols1);
    const SvdTriplets t = classicalSvd(corner, r_max);
    Matrix pred = Matrix::Zero(nr, nc);
    for (Index k = 0; k < r_max; ++k) {
      if (t.values[k] < 1e-12) {
        ++result.warnings;
        break;
      }
      pred.noalias() += (top * t.right.col(k)) * (t.left.col(k).transpose() * left) /
                        t.values[k];
      errors[static_cast<size_t>(k)].push_back((held - pred).norm());
    }
  }
  for (const auto& e : errors)
    if (e.empty()) throw NoValidHoldouts();

  result.trace.kind = "bcv-" + measureName(measure);
  result.trace.alpha = engine.type == CvEngine::Type::RobustProxy ? engine.alpha : 0.0;
  result.trace.first_rank = 1;
  for (const auto& e : errors) result.trace.values.push_back(aggregate(e, measure));
  result.trace.select();
  return result;
}

}  // namespace rankguard
