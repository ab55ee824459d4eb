#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stpot/model.hpp"

namespace stpot {

double absolute_bias(const Vec& draws, double truth);
// Sample standard deviation with the 1/(N-1) convention.
double posterior_se(const Vec& draws);
std::pair<double, double> credible_interval(const Vec& draws, double lo = 0.025, double hi = 0.975);

double autocorrelation(const Vec& draws, int lag);
// N / (1 + 2 sum_{k=1..K} rho_k), K the first lag with rho_k <= 0.05, capped at N/3.
double ess(const Vec& draws);
struct EssResult {
  double ess = 0.0;
  double ess_per_min = 0.0;
};
EssResult ess(const Vec& draws, double wall_minutes);

double r_squared(const Vec& post_means, const Vec& truths);

// Tail index from the k largest values: k / sum log(x_(i) / x_(k+1)).
double hill_estimator(std::vector<double> values, std::size_t k);

// Per-site empirical quantiles at levels c/100 for c = c_u..99; rows index the level.
Mat upper_quantiles(const Mat& panel, int c_u);

struct QuantileErrors {
  double mqae = 0.0;
  double mqse = 0.0;
  Vec site_mqae;  // averaged over draws and levels
  Vec site_mqse;
};
// Discrepancy between observed per-site quantiles and those of each simulated panel,
// averaged over panels, levels c_u..99 and sites.
QuantileErrors quantile_errors(const Mat& observed, const std::vector<Mat>& simulated, int c_u);
double mqae(const Mat& observed, const std::vector<Mat>& simulated, int c_u = 75);
double mqse(const Mat& observed, const std::vector<Mat>& simulated, int c_u = 75);

// One simulated n-row panel per selected posterior draw (rows of `draws`, canonical order).
std::vector<Mat> posterior_predictive(const SiteSet& sites, const ParameterLayout& layout,
                                      const Mat& draws, int n, int max_panels, Rng& rng);

struct QqRow {
  double prob = 0.0;
  double observed = 0.0;
  double fitted = 0.0;  // median over replicates
  double lower = 0.0;
  double upper = 0.0;
};
// Per-site QQ tables for a model simulated at fixed parameters (e.g. posterior means).
std::vector<std::vector<QqRow>> qq_data(const Mat& observed, const SiteSet& sites,
                                        const ParameterLayout& layout, const ParameterVector& theta,
                                        const std::vector<double>& probs, int replicates, Rng& rng);

double return_probability(double years, int season_days = 122);

struct ReturnLevelTable {
  std::vector<std::string> site_ids;
  std::vector<double> periods;
  Mat median, lower, upper;  // sites x periods
};
// For each selected posterior draw simulate a panel of `length` rows and take the
// per-site quantile at 1 - 1/(T * season_days). Requires length >= 50 / (1 - p).
ReturnLevelTable return_levels(const SiteSet& sites, const ParameterLayout& layout, const Mat& draws,
                               const std::vector<double>& periods, int season_days, int length,
                               int max_draws, Rng& rng);
long return_level_min_length(const std::vector<double>& periods, int season_days);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  double ess = 0.0;
  double ess_per_min = 0.0;
  std::optional<double> truth, ab;
  bool covered() const { return truth && *truth >= ci_lower && *truth <= ci_upper; }
};

struct MetricReport {
  std::vector<ParameterSummary> parameters;
  int n_draws = 0;
  int c_u = 75;
  std::optional<double> mqae_train, mqse_train, mqae_test, mqse_test;
  std::optional<std::vector<double>> r2;

  // Timing-dependent fields (ESS/min) are written only when include_timing is set.
  nlohmann::json to_json(bool include_timing = false) const;
};

// draws: N x P after burn-in, columns in `names` order.
MetricReport summarize_draws(const Mat& draws, const std::vector<std::string>& names,
                             double wall_minutes, const std::optional<Vec>& truth = std::nullopt);

}  // namespace stpot
