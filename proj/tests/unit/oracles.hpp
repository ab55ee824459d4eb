#pragma once
// Independent reference computations used only by tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

// Regularized lower incomplete gamma P(a, x) by series / Lentz continued fraction.
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double sum = 1.0 / a, term = sum;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-17) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

// Inverse-gamma cdf with shape a, scale b.
inline double ig_cdf(double x, double a, double b) { return 1.0 - gamma_p(a, b / x); }

// Quantile by plain bisection on the cdf.
inline double ig_quantile_bisect(double u, double a, double b) {
  double lo = 1e-12, hi = 1.0;
  while (ig_cdf(hi, a, b) < u) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ig_cdf(mid, a, b) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double phi_inv_bisect(double p) {
  if (p > 0.5) {
    // bisect on the upper tail so the target keeps full precision
    const double q = 1.0 - p;
    double lo = 0, hi = 40;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(mid / std::sqrt(2.0)) > q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Hill estimate of the tail index from the top k order statistics.
inline double hill(std::vector<double> v, std::size_t k) {
  std::sort(v.begin(), v.end());
  const double ref = v[v.size() - k - 1];
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(v[v.size() - 1 - i] / ref);
  return static_cast<double>(k) / s;
}

// Linear-interpolation quantile straight from the definition.
inline double quantile7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

}  // namespace oracle
