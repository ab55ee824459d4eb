#pragma once

namespace stpot {

double normal_cdf(double x);
// Upper tail 1 - normal_cdf(x), accurate for large x.
double normal_sf(double x);
double normal_quantile(double p);

// Inverse-gamma with shape a and scale b: X = b / G, G ~ Gamma(a, 1).
double ig_cdf(double x, double shape, double scale);
double ig_quantile(double u, double shape, double scale);
// Quantile at upper-tail probability q = 1 - u; keeps precision when u is close to 1.
double ig_quantile_upper(double q, double shape, double scale);

}  // namespace stpot
