#ifndef RANKGUARD_DPDFIT_HPP
#define RANKGUARD_DPDFIT_HPP

#include <cstdint>
#include <vector>

#include "rankguard/types.hpp"

namespace rankguard {

// sigma never drops below this; the objective is undefined at sigma = 0.
inline constexpr double kScaleFloor = 1e-8;

enum class DpdInit { ClassicalSvd, Random };

struct DpdParams {
  double alpha = 0.0;    // robustness parameter in [0, 1]
  double tol = 1e-6;     // relative objective change stopping rule
  int max_iter = 100;
  DpdInit init = DpdInit::ClassicalSvd;
  std::uint64_t seed = 0;  // used when init == Random

  void validate() const;
};

/// Sequential robust SVD fit: triplets up to rank r, per-rank scale
/// estimates sigma[0..r] (sigma[k] is the residual scale after k triplets)
/// and the objective value after each rank. Triplets are kept in fitting
/// (deflation) order; on contaminated data the values need not be exactly
/// non-increasing.
struct DpdFit {
  SvdTriplets triplets;
  std::vector<double> sigma;       // size r+1
  std::vector<double> objective;   // size r+1, H_alpha^{(k)} at the fit
  std::vector<bool> converged;     // size r, per rank
  std::vector<int> iterations;     // size r, per rank
};

struct RankOneFit {
  double lambda = 0;
  Vector u;
  Vector v;
  double sigma = 0;
  double objective = 0;
  bool converged = false;
  int iterations = 0;
};

/// Single-cell contribution to the DPD objective. For alpha > 0:
///   sigma^{-alpha} [ Integral(phi^{1+alpha}) - (1 + 1/alpha) phi^alpha(|x-mu|/sigma) ]
/// with phi the standard normal density; for alpha = 0 the KL limit
/// (x - mu)^2 / (2 sigma^2).
double vCell(double x, double mu, double sigma, double alpha);

/// (1/np) sum_ij vCell(X_ij, reconstruction_ij, sigma, alpha).
double objectiveH(const Matrix& X, const SvdTriplets& triplets, double sigma,
                  double alpha);

/// argmin_sigma H_alpha^{(0)}(sigma; X) with mu = 0. At alpha = 0 this is the
/// root-mean-square of the entries. Returns kScaleFloor for an all-zero X.
double estimateScaleRank0(const Matrix& X, double alpha);

/// Minimizer of the rank-0 objective for a given residual matrix (exposed for
/// the alternating fitter, which re-solves sigma each sweep).
double minimizeScale(const Matrix& residual, double alpha);

RankOneFit fitRankOne(const Matrix& X, const DpdParams& params);

DpdFit fitSequential(const Matrix& X, const DpdParams& params, Index r_max);

/// Hook for the descent property test: when set, receives every
/// (objective_before, objective_after) pair accepted inside fitRankOne.
using DescentProbe = void (*)(double before, double after);
void setDescentProbe(DescentProbe probe);

}  // namespace rankguard

#endif
