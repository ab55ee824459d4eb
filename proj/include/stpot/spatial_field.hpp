#pragma once

#include <string>
#include <vector>

#include "stpot/linalg.hpp"
#include "stpot/rng.hpp"

namespace stpot {

// Site geometry plus covariates. Distances are Euclidean on the given coordinates;
// lon/lat are treated as planar degrees.
struct SiteSet {
  std::vector<std::string> ids;
  Mat coords;      // d x 2
  Mat covariates;  // d x p
  Mat dist;        // d x d
  double delta = 0.0;

  static SiteSet from_coordinates(std::vector<std::string> ids, Mat coords, Mat covariates);

  int size() const { return static_cast<int>(ids.size()); }
  SiteSet subset(const std::vector<int>& rows) const;
};

// d1 x d2 regular grid on the unit square in row-major site order; covariates are
// the two coordinates.
SiteSet unit_grid(int d1, int d2);

struct CorrelationModel {
  double range = 1.0;
};

// Inverse-gamma margin with unit mean: scale is tied to shape - 1.
struct IgMargin {
  double shape = 5.0;
  double scale() const { return shape - 1.0; }
  double mean() const { return scale() / (shape - 1.0); }
  double variance() const;
};

Mat correlation_matrix(const SiteSet& sites, const CorrelationModel& model);
Mat correlation_matrix(const Mat& dist, double range);

// Lower Cholesky factor. Retries with 1e-10 * 10^k diagonal jitter (k = 0, 1, 2)
// before raising NumericError.
Mat cholesky(const Mat& corr);

double ig_quantile(double u, const IgMargin& margin);

// n replicates (rows) of the Gaussian-copula field with inverse-gamma margins.
Mat sample_x3(const SiteSet& sites, const CorrelationModel& model, const IgMargin& margin, int n,
              Rng& rng);
// Same, from a precomputed Cholesky factor.
Mat sample_x3_chol(const Mat& chol, const IgMargin& margin, int n, Rng& rng);

}  // namespace stpot
