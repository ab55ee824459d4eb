#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "stpot/errors.hpp"
#include "stpot/special.hpp"
#include "stpot/spatial_field.hpp"

using namespace stpot;

TEST_CASE("correlation matrix entries") {
  SiteSet sites = unit_grid(4, 4);
  const Mat c = correlation_matrix(sites, {0.5});
  CHECK(c(0, 0) == 1.0);
  // sites 0 and 3 are (0,0) and (1,0): h = 1
  CHECK(sites.dist(0, 3) == doctest::Approx(1.0));
  CHECK(c(0, 3) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(c(0, 3) == doctest::Approx(0.1353352832366127).epsilon(1e-12));

  Mat dist(2, 2);
  dist << 0.0, 0.7, 0.7, 0.0;
  const Mat c2 = correlation_matrix(dist, 0.7);
  CHECK(c2(0, 1) == doctest::Approx(0.36787944117144233).epsilon(1e-14));

  SUBCASE("unit diagonal and entries in (0,1]") {
    CHECK((c.diagonal().array() == 1.0).all());
    CHECK((c.array() > 0.0).all());
    CHECK((c.array() <= 1.0).all());
    CHECK(c.isApprox(c.transpose(), 0.0));
  }
  SUBCASE("errors") {
    dist(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(correlation_matrix(dist, 0.5), InvalidInput);
    CHECK_THROWS_AS(correlation_matrix(sites, {0.0}), InvalidInput);
  }
}

TEST_CASE("site set invariants") {
  Mat coords(3, 2);
  coords << 0, 0, 0, 0, 3, 4;
  SiteSet s = SiteSet::from_coordinates({"a", "b", "c"}, coords, coords);
  CHECK(s.dist(0, 1) == 0.0);
  CHECK(s.dist(0, 2) == doctest::Approx(5.0));
  CHECK(s.delta == doctest::Approx(5.0));
  CHECK(s.dist.isApprox(s.dist.transpose(), 0.0));
  CHECK(unit_grid(4, 4).delta == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cholesky") {
  CHECK(cholesky(Mat::Identity(3, 3)).isApprox(Mat::Identity(3, 3)));

  Mat a(2, 2);
  a << 1.0, 0.5, 0.5, 1.0;
  const Mat l = cholesky(a);
  CHECK(l(0, 0) == doctest::Approx(1.0));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(0.5));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));

  Rng rng(11);
  Mat b(6, 6);
  for (int i = 0; i < 36; ++i) b(i) = rng.normal();
  const Mat pd = b * b.transpose() + 0.1 * Mat::Identity(6, 6);
  const Mat lp = cholesky(pd);
  CHECK((lp * lp.transpose() - pd).norm() / pd.norm() < 1e-10);

  SUBCASE("jitter rescues a singular matrix") {
    Mat s = Mat::Ones(2, 2);
    const Mat ls = cholesky(s);
    CHECK((ls * ls.transpose() - s).norm() / s.norm() < 1e-8);
  }
  SUBCASE("indefinite matrix is a decomposition error") {
    Mat s(2, 2);
    s << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(cholesky(s), NumericError);
  }
  SUBCASE("dense grid with a long range stays decomposable") {
    const Mat c = correlation_matrix(unit_grid(10, 10), {2.0 * std::sqrt(2.0)});
    const Mat lc = cholesky(c);
    CHECK((lc * lc.transpose() - c).norm() / c.norm() < 1e-8);
  }
}

TEST_CASE("normal cdf and quantile") {
  for (double p : {1e-10, 1e-4, 0.025, 0.3, 0.5, 0.8, 0.975, 1 - 1e-6}) {
    CHECK(std::abs(normal_quantile(p) - oracle::phi_inv_bisect(p)) < 1e-12);
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-12);
  }
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidInput);
}

TEST_CASE("inverse-gamma quantile") {
  const IgMargin m{5.0};
  CHECK(m.mean() == 1.0);
  CHECK(m.variance() == doctest::Approx(1.0 / 3.0));

  const double u1 = oracle::ig_cdf(1.0, 5.0, 4.0);
  CHECK(ig_quantile(u1, m) == doctest::Approx(1.0).epsilon(1e-10));

  const double median = oracle::ig_quantile_bisect(0.5, 5.0, 4.0);
  CHECK(std::abs(ig_quantile(0.5, m) - median) < 1e-10);

  for (double u : {1e-6, 0.01, 0.3, 0.77, 0.99, 1 - 1e-8}) {
    const double x = ig_quantile(u, m);
    CHECK(std::abs(oracle::ig_cdf(x, 5.0, 4.0) - u) < 1e-10);
  }
  double prev = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double q = ig_quantile(k / 1000.0, m);
    CHECK(q > prev);
    prev = q;
  }
  CHECK_THROWS_AS(ig_quantile(0.0, m), InvalidInput);
  CHECK_THROWS_AS(ig_quantile(1.0, m), InvalidInput);
  CHECK_THROWS_AS(ig_quantile(1.2, m), InvalidInput);
}

namespace {
std::vector<double> column(const Mat& m, Eigen::Index j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}
}  // namespace

TEST_CASE("sample_x3 margins") {
  SiteSet sites = unit_grid(2, 2);

  SUBCASE("very large shape collapses to one") {
    Rng rng(1);
    const Mat x = sample_x3(sites, {0.5}, IgMargin{1e6}, 2000, rng);
    CHECK((x.array() > 0.0).all());
    CHECK(((x.array() - 1.0).abs() < 0.01).all());
  }

  SUBCASE("variance matches closed-form moments") {
    Rng rng(2);
    const int n = 100000;
    const Mat x = sample_x3(sites, {0.5}, IgMargin{5.0}, n, rng);
    // IG(5, 4): E[X^k] = 4^k / prod_{i=1..k}(5 - i)
    const double m2 = 16.0 / 12.0, m3 = 64.0 / 24.0, m4 = 256.0 / 24.0;
    const double var = m2 - 1.0;
    const double mu4 = m4 - 4 * m3 + 6 * m2 - 3;
    const double se = std::sqrt((mu4 - var * var) / n);
    const auto v = oracle::variance(column(x, 0));
    CHECK(std::abs(v - 1.0 / 3.0) < 4 * se);
  }

  SUBCASE("unit mean for several shapes") {
    for (double b3 : {3.0, 5.0, 10.0}) {
      Rng rng(3);
      const int n = 100000;
      const Mat x = sample_x3(sites, {0.5}, IgMargin{b3}, n, rng);
      const double se = std::sqrt(1.0 / (b3 - 2.0) / n);
      for (int j = 0; j < sites.size(); ++j)
        CHECK(std::abs(oracle::mean(column(x, j)) - 1.0) < 4 * se);
    }
  }
}

TEST_CASE("sample_x3 copula") {
  SiteSet sites = unit_grid(4, 4);
  Rng rng(4);
  const int n = 10000;
  const Mat x = sample_x3(sites, {0.5}, IgMargin{5.0}, n, rng);
  Mat g(n, sites.size());
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < sites.size(); ++j)
      g(t, j) = oracle::phi_inv_bisect(oracle::ig_cdf(x(t, j), 5.0, 4.0));
  double worst = 0.0;
  for (int i = 0; i < sites.size(); ++i)
    for (int j = i + 1; j < sites.size(); ++j) {
      const double r = oracle::correlation(column(g, i), column(g, j));
      worst = std::max(worst, std::abs(r - std::exp(-sites.dist(i, j) / 0.5)));
    }
  CHECK(worst < 0.05);
}

TEST_CASE("sample_x3 tail index") {
  SiteSet sites = unit_grid(1, 1);
  Rng rng(5);
  const int n = 1000000;
  const Mat x = sample_x3(sites, {0.5}, IgMargin{5.0}, n, rng);
  // k = sqrt(n) upper order statistics
  const double h = oracle::hill(column(x, 0), 1000);
  CHECK(h >= 4.25);
  CHECK(h <= 5.75);
}

TEST_CASE("sample_x3 ranks do not depend on the margin") {
  SiteSet sites = unit_grid(3, 3);
  Rng r1(6), r2(6);
  const Mat a = sample_x3(sites, {0.4}, IgMargin{3.0}, 500, r1);
  const Mat b = sample_x3(sites, {0.4}, IgMargin{12.0}, 500, r2);
  bool same = true;
  for (int j = 0; j < sites.size(); ++j)
    for (int s = 0; s < 500; ++s)
      for (int t = 0; t < 500; ++t)
        if ((a(s, j) < a(t, j)) != (b(s, j) < b(t, j))) same = false;
  CHECK(same);
}
