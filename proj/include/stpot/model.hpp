#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stpot/linalg.hpp"
#include "stpot/rng.hpp"
#include "stpot/spatial_field.hpp"

namespace stpot {

enum class FactorMode { absent, varying, constant };

// Which factors enter the product and whether each one is shared by all sites.
struct FactorVariant {
  std::string name;
  FactorMode noise = FactorMode::absent;  // X1, Weibull-tailed white noise
  FactorMode ar = FactorMode::absent;     // X2 AR(1) log-normal factor
  bool x3 = false;                        // copula field with inverse-gamma margins
  bool legacy_x2_iid = false;             // spatially constant i.i.d. X2 (DY)

  static FactorVariant from_name(std::string_view name);
  static const std::vector<FactorVariant>& catalog();

  bool has_beta1() const { return noise != FactorMode::absent; }
  bool has_ar() const { return ar != FactorMode::absent; }
  bool has_beta2() const { return legacy_x2_iid; }
};

struct CovariateTerm {
  int column = 0;
  bool squared = false;
};

// Log-linear scale specification; the intercept is always present.
struct CovariateModel {
  std::string name;
  std::vector<CovariateTerm> terms;

  static CovariateModel from_name(std::string_view name);
  int n_gamma() const { return 1 + static_cast<int>(terms.size()); }
  std::vector<std::string> gamma_names() const;
  int max_column() const;
};

struct Prior {
  enum class Kind { uniform, normal };
  Kind kind = Kind::uniform;
  double a = 0.0;  // lo or mean
  double b = 1.0;  // hi or sd

  static Prior uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Prior normal(double mean, double sd) { return {Kind::normal, mean, sd}; }
  double sample(Rng& rng) const;
  bool contains(double x) const;
  void validate(const std::string& label) const;
};

struct PriorSpec {
  Prior gamma = Prior::normal(0.0, 2.0);
  Prior beta1 = Prior::uniform(0.05, 2.0);
  Prior phi = Prior::uniform(-0.85, 0.85);
  Prior sigma = Prior::uniform(0.05, 3.0);
  Prior beta2 = Prior::uniform(0.05, 2.0);
  Prior beta3 = Prior::uniform(2.0, 15.0);
  Prior rho = Prior::uniform(0.0, 2.0);

  // Defaults with the range prior upper bound at twice the maximum intersite distance.
  static PriorSpec defaults(double delta);
  void validate() const;
};

struct ParameterVector {
  Vec gamma;
  std::optional<double> beta1, phi, sigma, beta2, beta3, rho;
};

// Canonical parameter order for a (variant, covariate model) pair:
// gamma0..gammap, beta1?, phi, sigma, beta2?, beta3?, rho?.
// The latent-factor block is everything after the gammas.
class ParameterLayout {
 public:
  ParameterLayout(FactorVariant variant, CovariateModel covmodel);

  const FactorVariant& variant() const { return variant_; }
  const CovariateModel& covmodel() const { return covmodel_; }

  std::vector<std::string> names() const;
  std::vector<std::string> alpha_names() const { return covmodel_.gamma_names(); }
  std::vector<std::string> x_names() const;
  int n_alpha() const { return covmodel_.n_gamma(); }
  int n_x() const { return static_cast<int>(x_names().size()); }
  int size() const { return n_alpha() + n_x(); }

  Vec flatten(const ParameterVector& theta) const;
  ParameterVector unflatten(const Vec& values) const;
  Vec x_block(const ParameterVector& theta) const;
  void set_x_block(ParameterVector& theta, const Vec& values) const;
  std::vector<Prior> x_priors(const PriorSpec& prior) const;
  std::vector<Prior> priors(const PriorSpec& prior) const;

  // Throws ConfigError when a required field is missing.
  void check_complete(const ParameterVector& theta) const;

 private:
  FactorVariant variant_;
  CovariateModel covmodel_;
};

// n x d panel of observations with per-site thresholds.
struct CensoredPanel {
  Mat values;
  Vec thresholds;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> censor_mask;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

ParameterVector sample_prior(const PriorSpec& prior, const FactorVariant& variant,
                             const CovariateModel& covmodel, Rng& rng);
// Draws only the latent-factor block; gamma is left empty.
ParameterVector sample_prior_x(const PriorSpec& prior, const FactorVariant& variant, Rng& rng);

Vec alpha(const SiteSet& sites, const CovariateModel& covmodel, const Vec& gamma);

Mat sample_x1(double beta1, int n, int d, bool constant, Rng& rng);
Mat sample_x2_ar(double phi, double sigma, int n, int d, bool constant, Rng& rng);
Vec sample_x2_iid(double beta2, int n, Rng& rng);
// Mean of the stationary log-AR process that makes E[X2] = 1.
double ar_log_mean(double phi, double sigma);

// Product of all enabled latent factors (alpha excluded). Each factor uses its own
// child stream split off rng.
Mat simulate_factors(const SiteSet& sites, const FactorVariant& variant,
                     const ParameterVector& theta, int n, Rng& rng);
Mat simulate_panel(const SiteSet& sites, const CovariateModel& covmodel,
                   const FactorVariant& variant, const ParameterVector& theta, int n, Rng& rng);

// Linear interpolation between closest order statistics ("type 7").
double quantile_sorted(const double* sorted, std::size_t n, double level);
double quantile(std::vector<double> values, double level);

Vec empirical_threshold(const Mat& panel, double level);
CensoredPanel censor(const Mat& panel, const Vec& thresholds);
Mat latent_ratio(const CensoredPanel& censored, const Vec& alpha);

}  // namespace stpot
