#include "rankguard/theory.hpp"

#include <cmath>
#include <fstream>

namespace rankguard {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double simpson(const std::function<double(double)>& g, double a, double b,
               double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptiveStep(const std::function<double(double)>& g, double a, double b,
                    double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = g(lm), frm = g(rm);
  const double left = simpson(g, a, m, fa, flm, fm);
  const double right = simpson(g, m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptiveStep(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptiveStep(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& g, double lo, double hi,
                 double abs_tol) {
  if (!(hi > lo)) throw DomainError("integration interval is empty");
  // Seed the adaptive splitter with a few panels so a narrow bump in the
  // middle of the interval cannot hide from the first Simpson estimate.
  const int panels = 16;
  double total = 0;
  const double h = (hi - lo) / panels;
  for (int i = 0; i < panels; ++i) {
    const double a = lo + i * h, b = a + h, m = 0.5 * (a + b);
    const double fa = g(a), fm = g(m), fb = g(b);
    total += adaptiveStep(g, a, b, fa, fm, fb, simpson(g, a, b, fa, fm, fb),
                          abs_tol / panels, 48);
  }
  return total;
}

DivergenceConstants constantsGaussian(double alpha) {
  if (alpha < 0.0) throw InvalidAlpha("alpha must be non-negative");
  const double pref = std::pow(kTwoPi, -alpha / 2.0);
  const double ap1 = 1.0 + alpha;
  DivergenceConstants out;
  out.norm_f = pref / std::sqrt(ap1);
  out.c_alpha = pref * std::pow(ap1, -1.5);
  out.a_alpha = pref * (std::pow(ap1, -0.5) - std::pow(ap1, -1.5));
  out.b_alpha = pref * std::pow(ap1, -2.5) * (alpha * alpha + 4.0 * alpha + 6.0);
  return out;
}

DivergenceConstants constantsQuadrature(double alpha,
                                        const SymmetricDensity& density) {
  if (alpha < 0.0) throw InvalidAlpha("alpha must be non-negative");
  const auto& f = density.f;
  const auto& fp = density.fprime;
  auto fpow = [&](double x, double e) { return std::pow(f(std::abs(x)), e); };
  DivergenceConstants out;
  out.norm_f = integrate([&](double x) { return fpow(x, 1.0 + alpha); });
  out.c_alpha = integrate([&](double x) {
    const double d = fp(std::abs(x));
    return d * d * fpow(x, alpha - 1.0);
  });
  out.a_alpha = integrate([&](double x) {
    const double ax = std::abs(x);
    return (f(ax) + ax * fp(ax)) * fpow(x, alpha);
  });
  out.b_alpha = out.norm_f -
                2.0 * integrate([&](double x) {
                  const double ax = std::abs(x);
                  return ax * fp(ax) * fpow(x, alpha);
                }) +
                integrate([&](double x) {
                  const double d = fp(std::abs(x));
                  return x * x * d * d * fpow(x, alpha - 1.0);
                });
  return out;
}

double tAlphaClosed(double alpha, double c) {
  if (alpha < 0.0) throw InvalidAlpha("alpha must be non-negative");
  if (c <= 0.0) throw DomainError("dimension ratio c must be positive");
  const double a2 = alpha * alpha;
  const double bracket = (2.0 + 4.0 * a2) / std::pow(1.0 + 2.0 * alpha, 2.5) -
                         a2 / std::pow(1.0 + alpha, 3.0);
  if (bracket <= 0.0) throw DomainError("non-positive radicand in t_alpha");
  return (1.0 + c) / (2.0 * std::sqrt(c)) * (2.0 + a2) /
         std::pow(1.0 + alpha, 3.5) / std::sqrt(bracket);
}

double tAlphaGeneric(double alpha, double c, const DivergenceConstants& at_alpha,
                     const DivergenceConstants& at_2alpha) {
  if (c <= 0.0) throw DomainError("dimension ratio c must be positive");
  const double radicand =
      at_2alpha.b_alpha - at_alpha.a_alpha * at_alpha.a_alpha;
  if (radicand <= 0.0) throw DomainError("non-positive radicand in t_alpha");
  (void)alpha;
  return (1.0 + c) / (2.0 * std::sqrt(c)) * at_2alpha.c_alpha /
         (at_alpha.c_alpha * at_alpha.norm_f) * at_alpha.b_alpha /
         std::sqrt(radicand);
}

double overestimationBound(double alpha, double c, bool use_closed) {
  double t;
  if (use_closed) {
    t = tAlphaClosed(alpha, c);
  } else {
    t = tAlphaGeneric(alpha, c, constantsGaussian(alpha),
                      constantsGaussian(2.0 * alpha));
  }
  return 0.5 + 0.5 * std::max(0.0, 1.0 - 1.0 / (t * t));
}

std::vector<BoundPoint> boundCurve(const std::vector<double>& alphas, double lo,
                                   double hi, int steps) {
  if (steps < 2) throw Error("bound curve needs at least 2 steps");
  if (alphas.empty()) throw Error("bound curve needs at least one alpha");
  std::vector<BoundPoint> curve;
  curve.reserve(alphas.size() * static_cast<size_t>(steps));
  for (double alpha : alphas) {
    for (int s = 0; s < steps; ++s) {
      const double lr = lo + (hi - lo) * s / (steps - 1);
      curve.push_back({lr, alpha, overestimationBound(alpha, std::exp(lr))});
    }
  }
  return curve;
}

void writeBoundCurve(const std::vector<BoundPoint>& curve,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "log_ratio,alpha,probability\n";
  for (const auto& pt : curve)
    out << pt.log_ratio << ',' << pt.alpha << ',' << pt.probability << '\n';
}

}  // namespace rankguard
