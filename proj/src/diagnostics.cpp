#include "stpot/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "stpot/errors.hpp"

namespace stpot {

namespace {

std::vector<double> to_vector(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double mean_of(const Vec& v) { return v.sum() / static_cast<double>(v.size()); }

}  // namespace

double absolute_bias(const Vec& draws, double truth) {
  if (draws.size() < 1) throw InvalidInput("absolute_bias needs at least one draw");
  return std::abs(mean_of(draws) - truth);
}

double posterior_se(const Vec& draws) {
  if (draws.size() < 2) throw InvalidInput("posterior_se needs at least two draws");
  const double m = mean_of(draws);
  return std::sqrt((draws.array() - m).square().sum() / static_cast<double>(draws.size() - 1));
}

std::pair<double, double> credible_interval(const Vec& draws, double lo, double hi) {
  if (draws.size() < 2) throw InvalidInput("credible_interval needs at least two draws");
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) throw InvalidInput("credible_interval levels must satisfy 0 <= lo <= hi <= 1");
  std::vector<double> v = to_vector(draws);
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v.data(), v.size(), lo), quantile_sorted(v.data(), v.size(), hi)};
}

double autocorrelation(const Vec& draws, int lag) {
  const Eigen::Index n = draws.size();
  if (lag < 0 || lag >= n) throw InvalidInput("autocorrelation lag out of range");
  const Vec c = draws.array() - mean_of(draws);
  const double denom = c.squaredNorm();
  if (denom == 0.0) return 0.0;
  return c.head(n - lag).dot(c.tail(n - lag)) / denom;
}

double ess(const Vec& draws) {
  const Eigen::Index n = draws.size();
  if (n < 10) throw InvalidInput("ess needs at least 10 draws");
  const Vec c = draws.array() - mean_of(draws);
  const double denom = c.squaredNorm();
  if (!(denom > 0.0)) return static_cast<double>(n);
  const Eigen::Index cap = std::max<Eigen::Index>(1, n / 3);
  double sum = 0.0;
  for (Eigen::Index k = 1; k <= cap; ++k) {
    const double rho = c.head(n - k).dot(c.tail(n - k)) / denom;
    sum += rho;
    if (rho <= 0.05) break;
  }
  const double den = 1.0 + 2.0 * sum;
  const double e = den > 0.0 ? static_cast<double>(n) / den : static_cast<double>(n);
  return std::min(e, static_cast<double>(n));
}

EssResult ess(const Vec& draws, double wall_minutes) {
  const double e = ess(draws);
  return {e, wall_minutes > 0.0 ? e / wall_minutes : 0.0};
}

double r_squared(const Vec& post_means, const Vec& truths) {
  if (post_means.size() != truths.size()) throw InvalidInput("r_squared: length mismatch");
  if (truths.size() < 2) throw InvalidInput("r_squared needs at least two replicates");
  const double m = mean_of(truths);
  const double sst = (truths.array() - m).square().sum();
  if (!(sst > 0.0)) throw InvalidInput("r_squared: truths are constant");
  return 1.0 - (post_means - truths).squaredNorm() / sst;
}

double hill_estimator(std::vector<double> values, std::size_t k) {
  if (k < 1 || k >= values.size()) throw InvalidInput("hill_estimator needs 1 <= k < n");
  std::nth_element(values.begin(), values.end() - static_cast<std::ptrdiff_t>(k) - 1, values.end());
  const double ref = *(values.end() - static_cast<std::ptrdiff_t>(k) - 1);
  if (!(ref > 0.0)) throw InvalidInput("hill_estimator needs positive order statistics");
  double s = 0.0;
  for (auto it = values.end() - static_cast<std::ptrdiff_t>(k); it != values.end(); ++it)
    s += std::log(*it / ref);
  return static_cast<double>(k) / s;
}

Mat upper_quantiles(const Mat& panel, int c_u) {
  if (c_u < 0 || c_u >= 99) throw InvalidInput("c_u must lie in [0, 99)");
  if (panel.rows() < 1) throw InvalidInput("upper_quantiles of an empty panel");
  const int levels = 100 - c_u;
  Mat q(levels, panel.cols());
  std::vector<double> col(static_cast<std::size_t>(panel.rows()));
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    for (Eigen::Index t = 0; t < panel.rows(); ++t) col[t] = panel(t, j);
    std::sort(col.begin(), col.end());
    for (int c = 0; c < levels; ++c) q(c, j) = quantile_sorted(col.data(), col.size(), (c_u + c) / 100.0);
  }
  return q;
}

QuantileErrors quantile_errors(const Mat& observed, const std::vector<Mat>& simulated, int c_u) {
  if (simulated.empty()) throw InvalidInput("quantile errors need at least one simulated panel");
  const Mat qo = upper_quantiles(observed, c_u);
  QuantileErrors out;
  out.site_mqae = Vec::Zero(observed.cols());
  out.site_mqse = Vec::Zero(observed.cols());
  for (const Mat& s : simulated) {
    if (s.cols() != observed.cols()) throw InvalidInput("simulated panel has the wrong number of sites");
    const Mat diff = upper_quantiles(s, c_u) - qo;
    out.site_mqae += diff.cwiseAbs().colwise().sum().transpose();
    out.site_mqse += diff.array().square().matrix().colwise().sum().transpose();
  }
  const double per_site = static_cast<double>(simulated.size()) * static_cast<double>(qo.rows());
  out.site_mqae /= per_site;
  out.site_mqse /= per_site;
  out.mqae = mean_of(out.site_mqae);
  out.mqse = mean_of(out.site_mqse);
  return out;
}

double mqae(const Mat& observed, const std::vector<Mat>& simulated, int c_u) {
  return quantile_errors(observed, simulated, c_u).mqae;
}

double mqse(const Mat& observed, const std::vector<Mat>& simulated, int c_u) {
  return quantile_errors(observed, simulated, c_u).mqse;
}

std::vector<Mat> posterior_predictive(const SiteSet& sites, const ParameterLayout& layout,
                                      const Mat& draws, int n, int max_panels, Rng& rng) {
  if (draws.cols() != layout.size()) throw InvalidInput("posterior draws have the wrong number of parameters");
  const Eigen::Index total = draws.rows();
  const Eigen::Index count = max_panels > 0 ? std::min<Eigen::Index>(total, max_panels) : total;
  std::vector<Mat> out;
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index i = k * total / count;
    Rng r = rng.split();
    const ParameterVector th = layout.unflatten(draws.row(i).transpose());
    out.push_back(simulate_panel(sites, layout.covmodel(), layout.variant(), th, n, r));
  }
  return out;
}

std::vector<std::vector<QqRow>> qq_data(const Mat& observed, const SiteSet& sites,
                                        const ParameterLayout& layout, const ParameterVector& theta,
                                        const std::vector<double>& probs, int replicates, Rng& rng) {
  const Eigen::Index d = observed.cols();
  if (d != sites.size()) throw InvalidInput("observed panel does not match the site set");
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("QQ probabilities must lie in [0, 1]");
  std::vector<std::vector<QqRow>> out(d);
  if (probs.empty()) return out;
  if (replicates < 2) throw InvalidInput("QQ bands need at least two replicates");
  const int n = static_cast<int>(observed.rows());
  const std::size_t np = probs.size();
  // q[(j * np + p) * replicates + r]
  std::vector<double> q(static_cast<std::size_t>(d) * np * replicates);
  std::vector<double> col(n);
  for (int r = 0; r < replicates; ++r) {
    Rng rr = rng.split();
    const Mat panel = simulate_panel(sites, layout.covmodel(), layout.variant(), theta, n, rr);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (int t = 0; t < n; ++t) col[t] = panel(t, j);
      std::sort(col.begin(), col.end());
      for (std::size_t p = 0; p < np; ++p)
        q[(j * np + p) * replicates + r] = quantile_sorted(col.data(), col.size(), probs[p]);
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (int t = 0; t < n; ++t) col[t] = observed(t, j);
    std::sort(col.begin(), col.end());
    for (std::size_t p = 0; p < np; ++p) {
      double* reps = q.data() + (j * np + p) * replicates;
      std::sort(reps, reps + replicates);
      out[j].push_back({probs[p], quantile_sorted(col.data(), col.size(), probs[p]),
                        quantile_sorted(reps, replicates, 0.5), quantile_sorted(reps, replicates, 0.025),
                        quantile_sorted(reps, replicates, 0.975)});
    }
  }
  return out;
}

double return_probability(double years, int season_days) {
  if (!(years >= 1.0)) throw InvalidInput("return periods must be at least one year");
  if (season_days < 1) throw InvalidInput("season_days must be positive");
  return 1.0 - 1.0 / (years * season_days);
}

long return_level_min_length(const std::vector<double>& periods, int season_days) {
  double worst = 0.0;
  for (double t : periods) worst = std::max(worst, 50.0 / (1.0 - return_probability(t, season_days)));
  return static_cast<long>(std::ceil(worst - 1e-6));
}

ReturnLevelTable return_levels(const SiteSet& sites, const ParameterLayout& layout, const Mat& draws,
                               const std::vector<double>& periods, int season_days, int length,
                               int max_draws, Rng& rng) {
  if (periods.empty()) throw InvalidInput("no return periods requested");
  std::vector<double> probs;
  for (double t : periods) probs.push_back(return_probability(t, season_days));
  const long need = return_level_min_length(periods, season_days);
  if (length < need)
    throw ConfigError("return-level simulation budget too small: " + std::to_string(length) +
                      " rows per draw, the longest period needs at least " + std::to_string(need));
  if (draws.rows() < 1) throw InvalidInput("return levels need at least one posterior draw");
  if (draws.cols() != layout.size()) throw InvalidInput("posterior draws have the wrong number of parameters");
  const Eigen::Index d = sites.size();
  const Eigen::Index total = draws.rows();
  const auto nd = static_cast<std::size_t>(max_draws > 0 ? std::min<Eigen::Index>(total, max_draws) : total);
  const std::size_t np = periods.size();
  std::vector<double> lv(static_cast<std::size_t>(d) * np * nd);
  std::vector<double> col(length);
  // same draw selection as posterior_predictive, one panel in memory at a time
  for (std::size_t i = 0; i < nd; ++i) {
    Rng r = rng.split();
    const ParameterVector th = layout.unflatten(draws.row(static_cast<Eigen::Index>(i) * total / static_cast<Eigen::Index>(nd)).transpose());
    const Mat panel = simulate_panel(sites, layout.covmodel(), layout.variant(), th, length, r);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (int t = 0; t < length; ++t) col[t] = panel(t, j);
      std::sort(col.begin(), col.end());
      for (std::size_t p = 0; p < np; ++p) lv[(j * np + p) * nd + i] = quantile_sorted(col.data(), col.size(), probs[p]);
    }
  }
  ReturnLevelTable out;
  out.site_ids = sites.ids;
  out.periods = periods;
  out.median.resize(d, np);
  out.lower.resize(d, np);
  out.upper.resize(d, np);
  for (Eigen::Index j = 0; j < d; ++j)
    for (std::size_t p = 0; p < np; ++p) {
      double* v = lv.data() + (j * np + p) * nd;
      std::sort(v, v + nd);
      out.median(j, p) = quantile_sorted(v, nd, 0.5);
      out.lower(j, p) = quantile_sorted(v, nd, 0.025);
      out.upper(j, p) = quantile_sorted(v, nd, 0.975);
    }
  return out;
}

MetricReport summarize_draws(const Mat& draws, const std::vector<std::string>& names,
                             double wall_minutes, const std::optional<Vec>& truth) {
  if (static_cast<std::size_t>(draws.cols()) != names.size())
    throw InvalidInput("draw columns do not match parameter names");
  if (truth && truth->size() != draws.cols()) throw InvalidInput("truth vector has the wrong length");
  MetricReport rep;
  rep.n_draws = static_cast<int>(draws.rows());
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    const Vec v = draws.col(k);
    ParameterSummary s;
    s.name = names[k];
    s.mean = mean_of(v);
    s.se = posterior_se(v);
    std::tie(s.ci_lower, s.ci_upper) = credible_interval(v);
    const EssResult e = ess(v, wall_minutes);
    s.ess = e.ess;
    s.ess_per_min = e.ess_per_min;
    if (truth) {
      s.truth = (*truth)(k);
      s.ab = absolute_bias(v, (*truth)(k));
    }
    rep.parameters.push_back(s);
  }
  return rep;
}

nlohmann::json MetricReport::to_json(bool include_timing) const {
  using nlohmann::json;
  json params = json::array();
  for (const auto& s : parameters) {
    json p = {{"name", s.name},       {"mean", s.mean},
              {"se", s.se},           {"ci", {s.ci_lower, s.ci_upper}},
              {"ci_width", s.ci_upper - s.ci_lower}, {"ess", s.ess}};
    if (include_timing) p["ess_per_min"] = s.ess_per_min;
    if (s.truth) {
      p["truth"] = *s.truth;
      p["ab"] = *s.ab;
      p["covered"] = s.covered();
    }
    params.push_back(p);
  }
  json j = {{"n_draws", n_draws}, {"c_u", c_u}, {"parameters", params}};
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  opt("mqae_train", mqae_train);
  opt("mqse_train", mqse_train);
  opt("mqae_test", mqae_test);
  opt("mqse_test", mqse_test);
  if (r2) j["r2"] = *r2;
  return j;
}

}  // namespace stpot
