#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "rankguard/matcore.hpp"

using namespace rankguard;

namespace {

std::string writeTemp(const std::string& body) {
  static int counter = 0;
  std::string path = "matcore_tmp_" + std::to_string(counter++) + ".csv";
  std::ofstream out(path);
  out << body;
  return path;
}

Matrix randomMatrix(Index n, Index p, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal;
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) X(i, j) = normal(gen);
  return X;
}

// Dense Moore-Penrose pseudoinverse built from Eigen's Jacobi SVD, used as
// an independent oracle for partialPinv.
Matrix densePinv(const Matrix& X) {
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector inv = svd.singularValues();
  for (Index k = 0; k < inv.size(); ++k)
    inv[k] = inv[k] > 1e-12 ? 1.0 / inv[k] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

TEST_CASE("csv: basic parse") {
  const std::string path = writeTemp("1,2\n3,4\n");
  const Matrix X = loadCsv(path);
  REQUIRE(X.rows() == 2);
  REQUIRE(X.cols() == 2);
  CHECK(X(0, 0) == 1);
  CHECK(X(0, 1) == 2);
  CHECK(X(1, 0) == 3);
  CHECK(X(1, 1) == 4);
  std::remove(path.c_str());
}

TEST_CASE("csv: ragged row raises") {
  const std::string path = writeTemp("1,2\n3\n");
  CHECK_THROWS_AS(loadCsv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("csv: header skip") {
  const std::string path = writeTemp("a,b\n1,2\n");
  const Matrix X = loadCsv(path, /*has_header=*/true);
  REQUIRE(X.rows() == 1);
  REQUIRE(X.cols() == 2);
  CHECK(X(0, 0) == 1);
  CHECK(X(0, 1) == 2);
  std::remove(path.c_str());
}

TEST_CASE("csv: empty file raises") {
  const std::string path = writeTemp("");
  CHECK_THROWS_AS(loadCsv(path), EmptyInput);
  std::remove(path.c_str());
}

TEST_CASE("csv: non-numeric cell raises") {
  const std::string path = writeTemp("1,x\n2,3\n");
  CHECK_THROWS_AS(loadCsv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("csv: non-finite cell raises") {
  const std::string path = writeTemp("1,nan\n2,3\n");
  CHECK_THROWS_AS(loadCsv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("csv: save/load round trip") {
  const Matrix X = randomMatrix(5, 3, 7);
  const std::string path = "matcore_roundtrip.csv";
  saveCsv(X, path);
  const Matrix Y = loadCsv(path);
  CHECK((X - Y).cwiseAbs().maxCoeff() < 1e-12);
  std::remove(path.c_str());
}

TEST_CASE("svd: identity") {
  const SvdTriplets t = classicalSvd(Matrix::Identity(2, 2), 2);
  CHECK(t.values[0] == doctest::Approx(1.0));
  CHECK(t.values[1] == doctest::Approx(1.0));
}

TEST_CASE("svd: diagonal") {
  Matrix X = Matrix::Zero(2, 2);
  X(0, 0) = 3;
  const SvdTriplets t = classicalSvd(X, 1);
  CHECK(t.values[0] == doctest::Approx(3.0));
  CHECK(std::abs(t.left(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(t.right(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("svd: full-rank reconstruction") {
  const Matrix X = randomMatrix(5, 4, 11);
  const SvdTriplets t = classicalSvd(X, 4);
  CHECK((X - t.reconstruct()).norm() < 1e-10);
}

TEST_CASE("svd: rank out of range") {
  CHECK_THROWS_AS(classicalSvd(Matrix::Identity(3, 3), 4), RankOutOfRange);
  CHECK_THROWS_AS(classicalSvd(Matrix::Identity(3, 3), 0), RankOutOfRange);
}

TEST_CASE("svd: reconstruction property up to 100x100") {
  for (unsigned seed : {1u, 2u}) {
    const Matrix X = randomMatrix(100, 100, seed);
    const SvdTriplets t = classicalSvd(X, 100);
    CHECK((X - t.reconstruct()).norm() / X.norm() < 1e-9);
  }
}

TEST_CASE("svd: values match eigenvalues of X^T X") {
  const Matrix X = randomMatrix(10, 8, 3);
  const SvdTriplets t = classicalSvd(X, 8);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(X.transpose() * X);
  for (Index k = 0; k < 8; ++k)
    CHECK(t.values[k] ==
          doctest::Approx(std::sqrt(eig.eigenvalues()[7 - k])).epsilon(1e-8));
}

TEST_CASE("svd: sign convention is deterministic") {
  const Matrix X = randomMatrix(6, 5, 9);
  const SvdTriplets t = classicalSvd(X, 5);
  for (Index k = 0; k < 5; ++k) {
    Index imax = 0;
    t.left.col(k).cwiseAbs().maxCoeff(&imax);
    CHECK(t.left(imax, k) >= 0.0);
  }
}

TEST_CASE("svd: orthonormal factors") {
  const Matrix X = randomMatrix(7, 6, 21);
  const SvdTriplets t = classicalSvd(X, 6);
  CHECK((t.left.transpose() * t.left - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <
        1e-6);
  CHECK((t.right.transpose() * t.right - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("pinv: diagonal inverse") {
  Matrix X = Matrix::Zero(2, 2);
  X(0, 0) = 2;
  X(1, 1) = 4;
  const Matrix P = partialPinv(X, 2);
  CHECK(P(0, 0) == doctest::Approx(0.5));
  CHECK(P(1, 1) == doctest::Approx(0.25));
  CHECK(std::abs(P(0, 1)) < 1e-12);
}

TEST_CASE("pinv: generalized-inverse identity on a rank-1 matrix") {
  Matrix X(2, 2);
  X << 1, 2, 2, 4;
  const Matrix P = partialPinv(X, 1);
  CHECK((X * P * X - X).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pinv: left inverse of a tall full-rank matrix") {
  const Matrix X = randomMatrix(3, 2, 13);
  const Matrix P = partialPinv(X, 2);
  CHECK((P * X - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pinv: matches dense Moore-Penrose at full rank") {
  const Matrix X = randomMatrix(6, 4, 17);
  const Matrix P = partialPinv(X, 4);
  CHECK((P - densePinv(X)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pinv: underflow raises") {
  Matrix X(2, 2);
  X << 1, 2, 2, 4;  // rank 1
  CHECK_THROWS_AS(partialPinv(X, 2), SingularValueUnderflow);
}

TEST_CASE("frobenius") {
  CHECK(frobenius(Matrix::Zero(3, 3)) == 0.0);
  CHECK(frobenius(Matrix::Identity(2, 2)) == doctest::Approx(std::sqrt(2.0)));
  Matrix X(1, 2);
  X << 3, 4;
  CHECK(frobenius(X) == doctest::Approx(5.0));
}

TEST_CASE("block partition validation and complements") {
  BlockPartition part;
  part.rows1 = {0, 2};
  part.cols1 = {1};
  part.validate(4, 3);
  CHECK(part.rowComplement(4) == std::vector<Index>{1, 3});
  CHECK(part.colComplement(3) == std::vector<Index>{0, 2});

  BlockPartition bad;
  bad.rows1 = {0, 0};
  bad.cols1 = {1};
  CHECK_THROWS(bad.validate(4, 3));
  BlockPartition empty;
  empty.cols1 = {0};
  CHECK_THROWS(empty.validate(4, 3));
}

TEST_CASE("submatrix picks the requested cells") {
  const Matrix X = randomMatrix(4, 4, 5);
  const Matrix S = submatrix(X, {1, 3}, {0, 2});
  CHECK(S(0, 0) == X(1, 0));
  CHECK(S(1, 1) == X(3, 2));
}
