#ifndef RANKGUARD_THEORY_HPP
#define RANKGUARD_THEORY_HPP

#include <functional>
#include <string>
#include <vector>

#include "rankguard/types.hpp"

namespace rankguard {

/// Divergence constants of the rank-selection asymptotics for a bounded
/// symmetric model density f:
///   a_alpha = int [f(|x|) + |x| f'(|x|)] f^alpha(|x|) dx
///   b_alpha = int f^{1+alpha} - 2 int |x| f'(|x|) f^alpha
///             + int x^2 f'(|x|)^2 f^{alpha-1} dx
///   c_alpha = int f'(|x|)^2 f^{alpha-1}(|x|) dx
///   norm_f  = int f^{1+alpha}(|x|) dx
struct DivergenceConstants {
  double a_alpha = 0;
  double b_alpha = 0;
  double c_alpha = 0;
  double norm_f = 0;
};

/// Closed-form constants for the standard normal density.
DivergenceConstants constantsGaussian(double alpha);

/// Symmetric density on the real line given through f(|x|) and f'(|x|)
/// (the derivative is negative for decreasing f).
struct SymmetricDensity {
  std::function<double(double)> f;
  std::function<double(double)> fprime;
};

/// Adaptive quadrature on [-12, 12], absolute tolerance 1e-10. Serves as
/// the independent oracle for the closed forms and as the only route for
/// non-Gaussian densities.
double integrate(const std::function<double(double)>& g, double lo = -12.0,
                 double hi = 12.0, double abs_tol = 1e-10);

/// Constants computed by quadrature for an arbitrary symmetric density.
DivergenceConstants constantsQuadrature(double alpha,
                                        const SymmetricDensity& density);

/// Gaussian t_alpha:
/// (1+c)/(2 sqrt c) * (2+a^2)/(1+a)^{7/2}
///   * [(2+4a^2)/(1+2a)^{5/2} - a^2/(1+a)^3]^{-1/2}.
double tAlphaClosed(double alpha, double c);

/// Generic route:
/// (1+c)/(2 sqrt c) * C_{2a}/(C_a ||f||) * B_a / sqrt(B_{2a} - A_a^2),
/// from constants evaluated at alpha and 2*alpha.
double tAlphaGeneric(double alpha, double c, const DivergenceConstants& at_alpha,
                     const DivergenceConstants& at_2alpha);

/// Lower bound 1/2 + 1/2 max{0, 1 - t^{-2}} on the probability of not
/// overestimating a rank-zero matrix. `use_closed` picks the Gaussian
/// closed form for t; otherwise the generic route with Gaussian constants.
double overestimationBound(double alpha, double c, bool use_closed = true);

struct BoundPoint {
  double log_ratio;  // log(n/p)
  double alpha;
  double probability;
};

/// Grid of bound values over log(n/p) in [lo, hi] for each alpha.
std::vector<BoundPoint> boundCurve(const std::vector<double>& alphas, double lo,
                                   double hi, int steps);

/// CSV with header log_ratio,alpha,probability.
void writeBoundCurve(const std::vector<BoundPoint>& curve,
                     const std::string& path);

}  // namespace rankguard

#endif
