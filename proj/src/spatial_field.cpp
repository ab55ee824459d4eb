#include "stpot/spatial_field.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "stpot/errors.hpp"
#include "stpot/special.hpp"

namespace stpot {

SiteSet SiteSet::from_coordinates(std::vector<std::string> ids, Mat coords, Mat covariates) {
  const auto d = static_cast<Eigen::Index>(ids.size());
  if (d < 1) throw InvalidInput("SiteSet: at least one site required");
  if (coords.rows() != d || coords.cols() != 2)
    throw InvalidInput("SiteSet: coordinates must be d x 2");
  if (covariates.rows() != d) throw InvalidInput("SiteSet: covariate rows must equal site count");
  if (!coords.allFinite()) throw InvalidInput("SiteSet: non-finite coordinates");
  if (!covariates.allFinite()) throw InvalidInput("SiteSet: non-finite covariates");

  SiteSet s;
  s.ids = std::move(ids);
  s.coords = std::move(coords);
  s.covariates = std::move(covariates);
  s.dist.resize(d, d);
  s.delta = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    s.dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double h = (s.coords.row(i) - s.coords.row(j)).norm();
      s.dist(i, j) = s.dist(j, i) = h;
      s.delta = std::max(s.delta, h);
    }
  }
  return s;
}

SiteSet SiteSet::subset(const std::vector<int>& rows) const {
  std::vector<std::string> sub_ids;
  Mat c(rows.size(), 2), z(rows.size(), covariates.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int r = rows[k];
    if (r < 0 || r >= size()) throw InvalidInput("SiteSet::subset: index out of range");
    sub_ids.push_back(ids[r]);
    c.row(k) = coords.row(r);
    z.row(k) = covariates.row(r);
  }
  return from_coordinates(std::move(sub_ids), std::move(c), std::move(z));
}

SiteSet unit_grid(int d1, int d2) {
  if (d1 < 1 || d2 < 1) throw InvalidInput("unit_grid: dimensions must be positive");
  std::vector<std::string> ids;
  Mat coords(d1 * d2, 2);
  for (int i = 0; i < d1; ++i) {
    for (int j = 0; j < d2; ++j) {
      const int k = i * d2 + j;
      coords(k, 0) = d2 > 1 ? static_cast<double>(j) / (d2 - 1) : 0.0;
      coords(k, 1) = d1 > 1 ? static_cast<double>(i) / (d1 - 1) : 0.0;
      ids.push_back("s" + std::to_string(k + 1));
    }
  }
  Mat cov = coords;
  return SiteSet::from_coordinates(std::move(ids), std::move(coords), std::move(cov));
}

double IgMargin::variance() const {
  if (shape <= 2.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (shape - 2.0);
}

Mat correlation_matrix(const Mat& dist, double range) {
  if (!(range > 0.0) || !std::isfinite(range))
    throw InvalidInput("correlation_matrix: range must be positive and finite");
  if (!dist.allFinite()) throw InvalidInput("correlation_matrix: non-finite distances");
  Mat c = (-dist.array() / range).exp().matrix();
  c.diagonal().setOnes();
  return c;
}

Mat correlation_matrix(const SiteSet& sites, const CorrelationModel& model) {
  return correlation_matrix(sites.dist, model.range);
}

Mat cholesky(const Mat& corr) {
  if (corr.rows() != corr.cols()) throw InvalidInput("cholesky: matrix must be square");
  Eigen::LLT<Mat> llt(corr);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  double jitter = 1e-10;
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
    Mat m = corr;
    m.diagonal().array() += jitter;
    llt.compute(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericError("cholesky: matrix is not positive definite after jitter retries");
}

double ig_quantile(double u, const IgMargin& margin) {
  if (!(margin.shape > 1.0)) throw InvalidInput("ig_quantile: shape must exceed 1");
  return stpot::ig_quantile(u, margin.shape, margin.scale());
}

Mat sample_x3_chol(const Mat& chol, const IgMargin& margin, int n, Rng& rng) {
  if (!(margin.shape > 1.0)) throw InvalidInput("sample_x3: shape must exceed 1");
  const auto d = chol.rows();
  Mat eps(d, n);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index j = 0; j < d; ++j) eps(j, t) = rng.normal();
  const Mat z = chol.triangularView<Eigen::Lower>() * eps;  // d x n
  Mat out(n, d);
  const double a = margin.shape, b = margin.scale();
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double zz = z(j, t);
      // Evaluate whichever tail keeps the probability away from 1.
      constexpr double tiny = std::numeric_limits<double>::min();
      out(t, j) = zz > 0.0 ? ig_quantile_upper(std::max(normal_sf(zz), tiny), a, b)
                           : stpot::ig_quantile(std::max(normal_cdf(zz), tiny), a, b);
    }
  }
  return out;
}

Mat sample_x3(const SiteSet& sites, const CorrelationModel& model, const IgMargin& margin, int n,
              Rng& rng) {
  return sample_x3_chol(cholesky(correlation_matrix(sites, model)), margin, n, rng);
}

}  // namespace stpot
