#include "stpot/special.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "stpot/errors.hpp"

namespace stpot {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("normal_quantile: probability must lie in (0,1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double ig_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_q(shape, scale / x);
}

double ig_quantile(double u, double shape, double scale) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidInput("ig_quantile: probability must lie in (0,1)");
  if (u > 0.5) return ig_quantile_upper(1.0 - u, shape, scale);
  // F(x) = Q(a, b/x)  =>  x = b / Q^{-1}(a, u)
  return scale / boost::math::gamma_q_inv(shape, u);
}

double ig_quantile_upper(double q, double shape, double scale) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidInput("ig_quantile: probability must lie in (0,1)");
  // 1 - F(x) = P(a, b/x)
  return scale / boost::math::gamma_p_inv(shape, q);
}

}  // namespace stpot
