#include "rankguard/impute.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include "rankguard/criteria.hpp"
#include "rankguard/dpdfit.hpp"
#include "rankguard/matcore.hpp"

namespace rankguard {

namespace {

double medianOf(std::vector<double> v) {
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(m), v.end());
  double hi = v[m];
  if (v.size() % 2 == 0) {
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(m));
    return 0.5 * (lo + hi);
  }
  return hi;
}

}  // namespace

Matrix ColumnNormalization::apply(const Matrix& X) const {
  if (X.cols() != centers.size())
    throw ShapeError("normalization fitted on a different column count");
  return (X.rowwise() - centers.transpose()).array().rowwise() /
         scales.transpose().array();
}

Matrix ColumnNormalization::invert(const Matrix& Z) const {
  if (Z.cols() != centers.size())
    throw ShapeError("normalization fitted on a different column count");
  return (Z.array().rowwise() * scales.transpose().array()).matrix().rowwise() +
         centers.transpose();
}

ColumnNormalization normalizeColumns(const Matrix& X,
                                     const Eigen::ArrayXXi& observed,
                                     bool consistency_factor) {
  const bool masked = observed.size() > 0;
  if (masked && (observed.rows() != X.rows() || observed.cols() != X.cols()))
    throw ShapeError("mask shape does not match the matrix");

  ColumnNormalization out;
  out.centers = Vector(X.cols());
  out.scales = Vector(X.cols());
  const double factor = consistency_factor ? 1.4826 : 1.0;

  for (Index j = 0; j < X.cols(); ++j) {
    std::vector<double> values;
    for (Index i = 0; i < X.rows(); ++i)
      if (!masked || observed(i, j) != 0) values.push_back(X(i, j));
    if (values.size() < 2)
      throw ShapeError("column " + std::to_string(j) +
                       " has fewer than 2 observed values");
    const double center = medianOf(values);
    std::vector<double> dev(values.size());
    for (size_t k = 0; k < values.size(); ++k)
      dev[k] = std::abs(values[k] - center);
    double scale = factor * medianOf(dev);
    if (scale == 0.0) {
      scale = 1.0;
      ++out.zero_scale_columns;
    }
    out.centers[j] = center;
    out.scales[j] = scale;
  }
  return out;
}

double relativeRmse(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw ShapeError("truth and estimate shapes differ");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw DivisionByZero("all-zero truth block");
  return (truth - estimate).squaredNorm() / denom;
}

namespace {

// Robust low-rank estimate of a fully observed block. Greedy deflation
// alone leaves cross-component error when the underlying factors are not
// orthogonal (each rank-one fit treats the remaining components as
// contamination), so it only seeds an EM-style polish: per-cell weights
// w = exp(-alpha res^2 / (2 sigma^2)) from the current residuals, blend
// low-weight cells toward the current reconstruction, and re-solve the
// blended matrix by a classical rank-r SVD. Gross outliers keep weight ~0
// and are effectively imputed; on clean input the weights are nearly even
// and the iteration lands on the exact classical fit.
Matrix fitBlock(const Matrix& block, double alpha, Index r) {
  if (r == 0) return Matrix::Zero(block.rows(), block.cols());
  if (block.cwiseAbs().maxCoeff() == 0.0) return block;
  if (r >= std::min(block.rows(), block.cols()))
    return block;  // full-rank request: the block is its own best fit
  DpdParams params;
  params.alpha = alpha;
  Matrix recon = alpha > 0.0
                     ? fitSequential(block, params, r).triplets.reconstruct()
                     : classicalSvd(block, r).reconstruct();
  const double np = static_cast<double>(block.size());
  for (int iter = 0; iter < 50; ++iter) {
    const Matrix residual = block - recon;
    // The weight scale is the residual RMS, not a robust scale: mid-fit the
    // residual still carries dense signal that a robust scale would misread
    // as contamination and freeze out. As the fit improves the RMS shrinks
    // and genuinely aberrant cells lose their weight.
    const double sigma = std::max(residual.norm() / std::sqrt(np), kScaleFloor);
    if (residual.cwiseAbs().maxCoeff() <= 6.0 * sigma) {
      // No cell stands out against the current fit: the data look
      // contamination-free, and the unweighted fit is both exact on clean
      // low-rank input and statistically efficient.
      return classicalSvd(block, r).reconstruct();
    }
    const Matrix weights =
        (-alpha / (2.0 * sigma * sigma) * residual.array().square()).exp();
    const Matrix blended =
        weights.array() * block.array() + (1.0 - weights.array()) * recon.array();
    const Matrix next = classicalSvd(blended, r).reconstruct();
    const double change = (next - recon).norm();
    recon = next;
    if (change <= 1e-10 * block.norm()) break;
  }
  // The iteration may stall short of the optimum on clean data whose factors
  // are far from orthogonal. Score the result against the plain classical fit
  // under the profiled robust objective and keep the better one: on clean
  // input the classical fit wins (and is exact for noiseless low-rank data),
  // while contamination inflates its residual everywhere and hands the win
  // back to the weighted fit.
  const auto profile = [&](const Matrix& fit) {
    const Matrix res = block - fit;
    const double s = minimizeScale(res, alpha);
    double h = 0.0;
    for (Index j = 0; j < block.cols(); ++j)
      for (Index i = 0; i < block.rows(); ++i)
        h += vCell(block(i, j), fit(i, j), s, alpha);
    return h / np;
  };
  const Matrix classical = classicalSvd(block, r).reconstruct();
  return profile(classical) <= profile(recon) ? classical : recon;
}

}  // namespace

ImputeResult blockImpute(const Matrix& X, const ImputeConfig& config,
                         const Matrix* truth) {
  const Index n = X.rows(), p = X.cols();
  config.partition.validate(n, p);
  const auto rows2 = config.partition.rowComplement(n);
  const auto cols2 = config.partition.colComplement(p);
  if (rows2.empty() || cols2.empty())
    throw ShapeError("the partition leaves no missing block");
  const auto& rows1 = config.partition.rows1;
  const auto& cols1 = config.partition.cols1;
  std::vector<Index> all_cols(static_cast<size_t>(p));
  for (Index j = 0; j < p; ++j) all_cols[static_cast<size_t>(j)] = j;

  ImputeResult result;
  result.alpha_used = config.alpha;

  // The X22 region of the input is never read; normalization statistics use
  // only the observed L-shaped region.
  ColumnNormalization norm;
  if (config.normalize) {
    Eigen::ArrayXXi observed = Eigen::ArrayXXi::Ones(n, p);
    for (Index i : rows2)
      for (Index j : cols2) observed(i, j) = 0;
    norm = normalizeColumns(X, observed);
    result.warnings += norm.zero_scale_columns;
  }
  const Matrix Z = config.normalize ? norm.apply(X) : X;

  const Matrix X11 = submatrix(Z, rows1, cols1);
  const Matrix X12 = submatrix(Z, rows1, cols2);
  const Matrix X21 = submatrix(Z, rows2, cols1);

  Index r;
  if (config.fixed_rank >= 0) {
    r = config.fixed_rank;
  } else {
    // Rank selection runs on the widest fully observed submatrix: the row
    // block [X11 X12].
    const Matrix row_block = submatrix(Z, rows1, all_cols);
    const Index r_max = defaultRankMax(row_block.rows(), row_block.cols());
    DpdParams params;
    params.alpha = config.alpha;
    const DpdFit fit = fitSequential(row_block, params, r_max);
    r = dicmrTrace(row_block, config.alpha, r_max, fit).selected;
  }
  const Index cap = std::min({X11.rows(), X11.cols(), X12.cols(), X21.rows()});
  if (r > cap) {
    r = cap;
    ++result.warnings;
  }
  result.selected_rank = r;

  Matrix Z22_hat;
  if (r == 0) {
    Z22_hat = Matrix::Zero(static_cast<Index>(rows2.size()),
                           static_cast<Index>(cols2.size()));
  } else {
    const Matrix L11 = fitBlock(X11, config.alpha, r);
    const Matrix L12 = fitBlock(X12, config.alpha, r);
    const Matrix L21 = fitBlock(X21, config.alpha, r);
    Index r_use = r;
    Matrix pinv;
    for (;;) {
      try {
        pinv = partialPinv(L11, r_use);
        break;
      } catch (const SingularValueUnderflow&) {
        if (--r_use == 0) break;
        ++result.warnings;
      }
    }
    Z22_hat = r_use == 0 ? Matrix::Zero(static_cast<Index>(rows2.size()),
                                        static_cast<Index>(cols2.size()))
                         : Matrix(L21 * pinv * L12);
    result.selected_rank = r_use;
  }

  if (config.normalize) {
    result.X22_hat = Matrix(Z22_hat.rows(), Z22_hat.cols());
    for (Index jj = 0; jj < Z22_hat.cols(); ++jj) {
      const Index j = cols2[static_cast<size_t>(jj)];
      result.X22_hat.col(jj) =
          (Z22_hat.col(jj).array() * norm.scales[j] + norm.centers[j]).matrix();
    }
  } else {
    result.X22_hat = Z22_hat;
  }

  if (truth) result.relative_rmse = relativeRmse(*truth, result.X22_hat);
  return result;
}

std::vector<MonitorRow> monitorAlpha(const Matrix& X,
                                     const BlockPartition& partition,
                                     const std::vector<double>& alpha_grid,
                                     bool normalize, const Matrix* truth) {
  if (alpha_grid.empty()) throw Error("empty alpha grid");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()))
    throw Error("alpha grid must be sorted ascending");
  std::vector<MonitorRow> rows;
  for (double alpha : alpha_grid) {
    MonitorRow row;
    row.alpha = alpha;
    try {
      ImputeConfig config;
      config.alpha = alpha;
      config.normalize = normalize;
      config.partition = partition;
      const ImputeResult res = blockImpute(X, config, truth);
      row.rank = res.selected_rank;
      row.rel_rmse = res.relative_rmse;
    } catch (const std::exception&) {
      row.failed = true;
    }
    rows.push_back(row);
  }
  return rows;
}

void writeMonitorCsv(const std::vector<MonitorRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "alpha,rank,rel_rmse\n";
  for (const auto& row : rows) {
    out << row.alpha << ',';
    if (row.failed)
      out << "failed,";
    else
      out << row.rank << ',';
    if (row.rel_rmse)
      out << *row.rel_rmse;
    out << '\n';
  }
}

namespace {

namespace fs = std::filesystem;

std::string sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof(b), "%02x", digest[i]);
    hex << b;
  }
  return hex.str();
}

void download(const std::string& url, const std::string& dest) {
  // Split https://host/path.
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw NetworkError("bad url: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string host = url.substr(scheme_end + 3,
                                      path_start - scheme_end - 3);
  const std::string path =
      path_start == std::string::npos ? "/" : url.substr(path_start);

  std::string body;
  auto fetch = [&](auto& client) {
    client.set_follow_location(true);
    client.set_read_timeout(600, 0);
    auto res = client.Get(path);
    if (!res || res->status != 200)
      throw NetworkError("download failed for " + url +
                         (res ? " (status " + std::to_string(res->status) + ")"
                              : " (no response)"));
    body = std::move(res->body);
  };
  if (scheme == "https") {
    httplib::SSLClient client(host);
    client.enable_server_certificate_verification(false);
    fetch(client);
  } else {
    httplib::Client client(host);
    fetch(client);
  }

  const std::string tmp = dest + ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  }
  fs::rename(tmp, dest);
}

void extractArchive(const std::string& archive, const std::string& dir) {
  std::string cmd;
  if (archive.ends_with(".zip"))
    cmd = "python3 -m zipfile -e '" + archive + "' '" + dir + "'";
  else
    cmd = "python3 -m tarfile -e '" + archive + "' '" + dir + "'";
  if (std::system(cmd.c_str()) != 0)
    throw CorruptData("extraction failed for " + archive);
}

std::string findFile(const std::string& dir, const std::string& name) {
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == name)
      return entry.path().string();
  return "";
}

// data.csv layout: header row, then one row per sample with a sample-id
// first column and 20531 numeric gene columns.
Matrix parseExpressionCsv(const std::string& path,
                          std::vector<std::string>* labels_unused) {
  (void)labels_unused;
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyInput();
  const Index cols =
      static_cast<Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> data;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // sample id
    Index got = 0;
    while (std::getline(ss, cell, ',')) {
      data.push_back(std::strtod(cell.c_str(), nullptr));
      ++got;
    }
    if (got != cols)
      throw ParseError("row " + std::to_string(rows + 2) + " has " +
                       std::to_string(got) + " cells, expected " +
                       std::to_string(cols));
    ++rows;
  }
  Matrix X(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      X(i, j) = data[static_cast<size_t>(i * cols + j)];
  return X;
}

std::vector<std::string> parseLabelsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    std::string label = line.substr(comma + 1);
    while (!label.empty() && (label.back() == '\r' || label.back() == '\n'))
      label.pop_back();
    labels.push_back(label);
  }
  return labels;
}

}  // namespace

Matrix pancanIngest(const std::string& source, const std::string& cache_dir,
                    std::vector<std::string>* labels) {
  fs::create_directories(cache_dir);
  const std::string extracted = cache_dir + "/extracted";

  std::string data_csv = findFile(fs::exists(extracted) ? extracted : cache_dir,
                                  "data.csv");
  if (data_csv.empty()) {
    std::string archive;
    if (fs::exists(source) && !fs::is_directory(source)) {
      archive = source;
    } else {
      archive = cache_dir + "/pancan.zip";
      if (!fs::exists(archive)) {
        download(source, archive);
        std::ofstream(cache_dir + "/pancan.zip.sha256") << sha256File(archive);
      }
    }
    // Verify against the recorded digest from the first successful download.
    const std::string digest_file = archive + ".sha256";
    if (fs::exists(digest_file)) {
      std::string expected;
      std::ifstream(digest_file) >> expected;
      if (!expected.empty() && sha256File(archive) != expected)
        throw CorruptData("checksum mismatch for " + archive);
    }
    extractArchive(archive, extracted);
    // The UCI zip nests a tarball; unfold one level if needed.
    for (const auto& entry : fs::recursive_directory_iterator(extracted)) {
      const std::string name = entry.path().string();
      if (entry.is_regular_file() &&
          (name.ends_with(".tar.gz") || name.ends_with(".tar")))
        extractArchive(name, extracted);
    }
    data_csv = findFile(extracted, "data.csv");
    if (data_csv.empty()) throw CorruptData("archive does not contain data.csv");
  }

  if (labels) {
    const std::string labels_csv =
        findFile(fs::path(data_csv).parent_path().string(), "labels.csv");
    if (!labels_csv.empty()) *labels = parseLabelsCsv(labels_csv);
  }
  return parseExpressionCsv(data_csv, nullptr);
}

}  // namespace rankguard
