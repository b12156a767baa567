#include "rankguard/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rankguard {

void BlockPartition::validate(Index n, Index p) const {
  auto check = [](const std::vector<Index>& idx, Index bound, const char* what) {
    if (idx.empty()) throw ShapeError(std::string(what) + " index set empty");
    std::vector<Index> sorted(idx);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= bound)
      throw ShapeError(std::string(what) + " index out of range");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ShapeError(std::string(what) + " index set has duplicates");
  };
  check(rows1, n, "row");
  check(cols1, p, "column");
}

static std::vector<Index> complementOf(const std::vector<Index>& idx, Index bound) {
  std::vector<bool> in(static_cast<size_t>(bound), false);
  for (Index i : idx) in[static_cast<size_t>(i)] = true;
  std::vector<Index> out;
  out.reserve(static_cast<size_t>(bound) - idx.size());
  for (Index i = 0; i < bound; ++i)
    if (!in[static_cast<size_t>(i)]) out.push_back(i);
  return out;
}

std::vector<Index> BlockPartition::rowComplement(Index n) const {
  return complementOf(rows1, n);
}

std::vector<Index> BlockPartition::colComplement(Index p) const {
  return complementOf(cols1, p);
}

Matrix submatrix(const Matrix& X, const std::vector<Index>& rows,
                 const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = X(rows[i], cols[j]);
  return out;
}

Matrix loadCsv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  bool skipped_header = !has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      double value = 0;
      try {
        value = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-numeric cell '" + cell + "' at line " +
                         std::to_string(line_no));
      }
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
        ++pos;
      if (pos != cell.size())
        throw ParseError("non-numeric cell '" + cell + "' at line " +
                         std::to_string(line_no));
      if (!std::isfinite(value))
        throw ParseError("non-finite cell at line " + std::to_string(line_no));
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("ragged row at line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInput();

  Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return X;
}

void saveCsv(const Matrix& X, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      if (j) out << ',';
      out << X(i, j);
    }
    out << '\n';
  }
}

SvdTriplets classicalSvd(const Matrix& X, Index r) {
  const Index m = std::min(X.rows(), X.cols());
  if (r < 1 || r > m)
    throw RankOutOfRange("requested " + std::to_string(r) + ", min(n,p) = " +
                         std::to_string(m));
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdTriplets t;
  t.values = svd.singularValues().head(r);
  t.left = svd.matrixU().leftCols(r);
  t.right = svd.matrixV().leftCols(r);
  for (Index k = 0; k < r; ++k) {
    Index imax = 0;
    t.left.col(k).cwiseAbs().maxCoeff(&imax);
    if (t.left(imax, k) < 0) {
      t.left.col(k) = -t.left.col(k);
      t.right.col(k) = -t.right.col(k);
    }
  }
  return t;
}

Matrix partialPinv(const Matrix& X, Index r) {
  SvdTriplets t = classicalSvd(X, r);
  if (t.values[r - 1] < 1e-12)
    throw SingularValueUnderflow("lambda_" + std::to_string(r) + " = " +
                                 std::to_string(t.values[r - 1]));
  Matrix out = Matrix::Zero(X.cols(), X.rows());
  for (Index k = 0; k < r; ++k)
    out.noalias() += (1.0 / t.values[k]) * t.right.col(k) * t.left.col(k).transpose();
  return out;
}

double frobenius(const Matrix& X) { return X.norm(); }

}  // namespace rankguard
