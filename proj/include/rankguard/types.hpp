#ifndef RANKGUARD_TYPES_HPP
#define RANKGUARD_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankguard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. Every failure mode surfaces as a typed exception so
// callers (and the CLI) can map them to stable exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("empty input") {}
};

class RankOutOfRange : public Error {
 public:
  explicit RankOutOfRange(const std::string& msg) : Error("rank out of range: " + msg) {}
};

class SingularValueUnderflow : public Error {
 public:
  explicit SingularValueUnderflow(const std::string& msg)
      : Error("singular value underflow: " + msg) {}
};

class InvalidScale : public Error {
 public:
  explicit InvalidScale(const std::string& msg) : Error("invalid scale: " + msg) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& msg) : Error("degenerate input: " + msg) {}
};

class InvalidAlpha : public Error {
 public:
  explicit InvalidAlpha(const std::string& msg) : Error("invalid alpha: " + msg) {}
};

class InsufficientValues : public Error {
 public:
  explicit InsufficientValues(const std::string& msg)
      : Error("insufficient values: " + msg) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

class EmptyErrors : public Error {
 public:
  EmptyErrors() : Error("empty error list") {}
};

class NoValidHoldouts : public Error {
 public:
  NoValidHoldouts() : Error("every holdout was skipped") {}
};

class DivisionByZero : public Error {
 public:
  explicit DivisionByZero(const std::string& msg) : Error("division by zero: " + msg) {}
};

class NetworkError : public Error {
 public:
  explicit NetworkError(const std::string& msg) : Error("network error: " + msg) {}
};

class CorruptData : public Error {
 public:
  explicit CorruptData(const std::string& msg) : Error("corrupt data: " + msg) {}
};

/// Top-r singular triplets. Columns of `left`/`right` are unit-norm; for
/// classical decompositions they are also orthogonal, robust fits only
/// guarantee the unit norms.
struct SvdTriplets {
  Vector values;  // r non-negative values, non-increasing for classical SVD
  Matrix left;    // n x r
  Matrix right;   // p x r

  Index rank() const { return values.size(); }

  /// Sum_{k<r} values[k] * left.col(k) * right.col(k)^T, r = rank() if omitted.
  Matrix reconstruct(Index r = -1) const {
    if (r < 0) r = rank();
    Matrix out = Matrix::Zero(left.rows(), right.rows());
    for (Index k = 0; k < r; ++k)
      out.noalias() += values[k] * left.col(k) * right.col(k).transpose();
    return out;
  }
};

/// Row/column index sets defining the top-left block of a 2x2 partition.
struct BlockPartition {
  std::vector<Index> rows1;
  std::vector<Index> cols1;

  void validate(Index n, Index p) const;
  std::vector<Index> rowComplement(Index n) const;
  std::vector<Index> colComplement(Index p) const;
};

Matrix submatrix(const Matrix& X, const std::vector<Index>& rows,
                 const std::vector<Index>& cols);

}  // namespace rankguard

#endif
