#ifndef RANKGUARD_MATCORE_HPP
#define RANKGUARD_MATCORE_HPP

#include <string>

#include "rankguard/types.hpp"

namespace rankguard {

/// Parse a rectangular CSV of decimal reals ('.' decimal point, ','
/// separator). Ragged rows, non-numeric cells and NaN/Inf entries raise
/// ParseError; an empty body raises EmptyInput.
Matrix loadCsv(const std::string& path, bool has_header = false);

void saveCsv(const Matrix& X, const std::string& path);

/// Top-r singular triplets of X with a deterministic sign convention: the
/// largest-magnitude entry of each left vector is non-negative, flips
/// propagate to the right vector.
SvdTriplets classicalSvd(const Matrix& X, Index r);

/// Generalized inverse of the rank-r part of X: sum_k (1/lambda_k) v_k u_k^T
/// (p x n). Throws SingularValueUnderflow if lambda_r < 1e-12.
Matrix partialPinv(const Matrix& X, Index r);

double frobenius(const Matrix& X);

}  // namespace rankguard

#endif
