#include "stpot/model.hpp"

#include <algorithm>
#include <cmath>

#include "stpot/errors.hpp"

namespace stpot {

const std::vector<FactorVariant>& FactorVariant::catalog() {
  using M = FactorMode;
  static const std::vector<FactorVariant> kCatalog = {
      {"D1", M::absent, M::constant, false, false},
      {"D2", M::absent, M::varying, false, false},
      {"D3", M::absent, M::constant, true, false},
      {"D4", M::absent, M::varying, true, false},
      {"D5", M::varying, M::varying, true, false},
      {"D6", M::varying, M::constant, true, false},
      {"D7", M::constant, M::constant, true, false},
      {"D8", M::constant, M::varying, true, false},
      {"DY", M::varying, M::absent, true, true},
  };
  return kCatalog;
}

FactorVariant FactorVariant::from_name(std::string_view name) {
  for (const auto& v : catalog())
    if (v.name == name) return v;
  throw ConfigError("unknown factor variant '" + std::string(name) + "' (expected D1-D8 or DY)");
}

CovariateModel CovariateModel::from_name(std::string_view name) {
  // Columns: 0 = lon (or x), 1 = lat (or y), 2 = alt (or third covariate).
  static const std::vector<CovariateTerm> kOrder = {
      {0, false}, {1, false}, {2, false}, {0, true}, {1, true}, {2, true}};
  if (name.size() == 2 && name[0] == 'M' && name[1] >= '1' && name[1] <= '7') {
    const int k = name[1] - '1';
    CovariateModel m;
    m.name = std::string(name);
    m.terms.assign(kOrder.begin(), kOrder.begin() + k);
    return m;
  }
  throw ConfigError("unknown covariate model '" + std::string(name) + "' (expected M1-M7)");
}

std::vector<std::string> CovariateModel::gamma_names() const {
  std::vector<std::string> out;
  for (int k = 0; k < n_gamma(); ++k) out.push_back("gamma" + std::to_string(k));
  return out;
}

int CovariateModel::max_column() const {
  int m = -1;
  for (const auto& t : terms) m = std::max(m, t.column);
  return m;
}

double Prior::sample(Rng& rng) const {
  return kind == Kind::uniform ? rng.uniform(a, b) : a + b * rng.normal();
}

bool Prior::contains(double x) const {
  if (!std::isfinite(x)) return false;
  return kind == Kind::normal || (x >= a && x <= b);
}

void Prior::validate(const std::string& label) const {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw ConfigError("prior for " + label + " has non-finite bounds");
  if (kind == Kind::uniform && !(b > a))
    throw ConfigError("prior for " + label + " is degenerate: uniform upper bound must exceed lower");
  if (kind == Kind::normal && !(b > 0.0))
    throw ConfigError("prior for " + label + " is degenerate: normal sd must be positive");
}

PriorSpec PriorSpec::defaults(double delta) {
  PriorSpec p;
  p.rho = Prior::uniform(0.0, 2.0 * delta);
  return p;
}

void PriorSpec::validate() const {
  gamma.validate("gamma");
  beta1.validate("beta1");
  phi.validate("phi");
  sigma.validate("sigma");
  beta2.validate("beta2");
  beta3.validate("beta3");
  rho.validate("rho");
  if (phi.kind != Prior::Kind::uniform || phi.a <= -1.0 || phi.b >= 1.0)
    throw ConfigError("phi prior must be uniform inside (-1, 1)");
  if (sigma.kind != Prior::Kind::uniform || sigma.a <= 0.0)
    throw ConfigError("sigma prior must be uniform on positive values");
  if (beta3.kind != Prior::Kind::uniform || beta3.a <= 1.0)
    throw ConfigError("beta3 prior must be uniform above 1");
  if (rho.kind != Prior::Kind::uniform || rho.a < 0.0)
    throw ConfigError("rho prior must be uniform on nonnegative values");
  for (const auto* p : {&beta1, &beta2})
    if (p->kind != Prior::Kind::uniform || p->a <= 0.0)
      throw ConfigError("beta1/beta2 priors must be uniform on positive values");
}

// ---------------------------------------------------------------------------

ParameterLayout::ParameterLayout(FactorVariant variant, CovariateModel covmodel)
    : variant_(std::move(variant)), covmodel_(std::move(covmodel)) {}

std::vector<std::string> ParameterLayout::x_names() const {
  std::vector<std::string> out;
  if (variant_.has_beta1()) out.push_back("beta1");
  if (variant_.has_ar()) {
    out.push_back("phi");
    out.push_back("sigma");
  }
  if (variant_.has_beta2()) out.push_back("beta2");
  if (variant_.x3) {
    out.push_back("beta3");
    out.push_back("rho");
  }
  return out;
}

std::vector<std::string> ParameterLayout::names() const {
  auto out = alpha_names();
  for (auto& n : x_names()) out.push_back(std::move(n));
  return out;
}

Vec ParameterLayout::x_block(const ParameterVector& theta) const {
  std::vector<double> v;
  auto need = [&](const std::optional<double>& f, const char* name) {
    if (!f) throw ConfigError(std::string("parameter '") + name + "' required by variant " + variant_.name);
    v.push_back(*f);
  };
  if (variant_.has_beta1()) need(theta.beta1, "beta1");
  if (variant_.has_ar()) {
    need(theta.phi, "phi");
    need(theta.sigma, "sigma");
  }
  if (variant_.has_beta2()) need(theta.beta2, "beta2");
  if (variant_.x3) {
    need(theta.beta3, "beta3");
    need(theta.rho, "rho");
  }
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void ParameterLayout::set_x_block(ParameterVector& theta, const Vec& values) const {
  if (values.size() != n_x()) throw InvalidInput("set_x_block: wrong block length");
  Eigen::Index k = 0;
  theta.beta1.reset();
  theta.phi.reset();
  theta.sigma.reset();
  theta.beta2.reset();
  theta.beta3.reset();
  theta.rho.reset();
  if (variant_.has_beta1()) theta.beta1 = values[k++];
  if (variant_.has_ar()) {
    theta.phi = values[k++];
    theta.sigma = values[k++];
  }
  if (variant_.has_beta2()) theta.beta2 = values[k++];
  if (variant_.x3) {
    theta.beta3 = values[k++];
    theta.rho = values[k++];
  }
}

Vec ParameterLayout::flatten(const ParameterVector& theta) const {
  if (theta.gamma.size() != n_alpha())
    throw ConfigError("gamma length " + std::to_string(theta.gamma.size()) + " does not match " +
                      covmodel_.name + " (" + std::to_string(n_alpha()) + ")");
  Vec out(size());
  out.head(n_alpha()) = theta.gamma;
  out.tail(n_x()) = x_block(theta);
  return out;
}

ParameterVector ParameterLayout::unflatten(const Vec& values) const {
  if (values.size() != size()) throw InvalidInput("unflatten: wrong parameter vector length");
  ParameterVector theta;
  theta.gamma = values.head(n_alpha());
  set_x_block(theta, values.tail(n_x()));
  return theta;
}

std::vector<Prior> ParameterLayout::x_priors(const PriorSpec& p) const {
  std::vector<Prior> out;
  if (variant_.has_beta1()) out.push_back(p.beta1);
  if (variant_.has_ar()) {
    out.push_back(p.phi);
    out.push_back(p.sigma);
  }
  if (variant_.has_beta2()) out.push_back(p.beta2);
  if (variant_.x3) {
    out.push_back(p.beta3);
    out.push_back(p.rho);
  }
  return out;
}

std::vector<Prior> ParameterLayout::priors(const PriorSpec& p) const {
  std::vector<Prior> out(static_cast<std::size_t>(n_alpha()), p.gamma);
  for (const auto& q : x_priors(p)) out.push_back(q);
  return out;
}

void ParameterLayout::check_complete(const ParameterVector& theta) const {
  flatten(theta);
}

// ---------------------------------------------------------------------------

ParameterVector sample_prior_x(const PriorSpec& prior, const FactorVariant& variant, Rng& rng) {
  ParameterVector t;
  if (variant.has_beta1()) t.beta1 = prior.beta1.sample(rng);
  if (variant.has_ar()) {
    t.phi = prior.phi.sample(rng);
    t.sigma = prior.sigma.sample(rng);
  }
  if (variant.has_beta2()) t.beta2 = prior.beta2.sample(rng);
  if (variant.x3) {
    t.beta3 = prior.beta3.sample(rng);
    t.rho = prior.rho.sample(rng);
  }
  return t;
}

ParameterVector sample_prior(const PriorSpec& prior, const FactorVariant& variant,
                             const CovariateModel& covmodel, Rng& rng) {
  Vec gamma(covmodel.n_gamma());
  for (Eigen::Index k = 0; k < gamma.size(); ++k) gamma[k] = prior.gamma.sample(rng);
  ParameterVector t = sample_prior_x(prior, variant, rng);
  t.gamma = std::move(gamma);
  return t;
}

Vec alpha(const SiteSet& sites, const CovariateModel& covmodel, const Vec& gamma) {
  if (gamma.size() != covmodel.n_gamma())
    throw InvalidInput("alpha: gamma length does not match covariate model " + covmodel.name);
  if (covmodel.max_column() >= sites.covariates.cols())
    throw InvalidInput("alpha: covariate model " + covmodel.name + " needs more covariate columns");
  if (!sites.covariates.allFinite()) throw InvalidInput("alpha: non-finite covariates");
  Vec eta = Vec::Constant(sites.size(), gamma[0]);
  for (std::size_t k = 0; k < covmodel.terms.size(); ++k) {
    const auto& term = covmodel.terms[k];
    auto z = sites.covariates.col(term.column).array();
    if (term.squared)
      eta.array() += gamma[k + 1] * z.square();
    else
      eta.array() += gamma[k + 1] * z;
  }
  return eta.array().exp();
}

Mat sample_x1(double beta1, int n, int d, bool constant, Rng& rng) {
  if (!(beta1 > 0.0)) throw InvalidInput("sample_x1: beta1 must be positive");
  const double norm = std::tgamma(1.0 + beta1);
  Mat out(n, d);
  for (int t = 0; t < n; ++t) {
    if (constant) {
      out.row(t).setConstant(std::pow(rng.exponential(), beta1) / norm);
    } else {
      for (int j = 0; j < d; ++j) out(t, j) = std::pow(rng.exponential(), beta1) / norm;
    }
  }
  return out;
}

double ar_log_mean(double phi, double sigma) {
  return -sigma * sigma / (2.0 * (1.0 - phi * phi));
}

Mat sample_x2_ar(double phi, double sigma, int n, int d, bool constant, Rng& rng) {
  if (!(std::abs(phi) < 1.0)) throw InvalidInput("sample_x2_ar: |phi| must be below 1");
  if (!(sigma > 0.0)) throw InvalidInput("sample_x2_ar: sigma must be positive");
  const double tau = ar_log_mean(phi, sigma);
  const double sd0 = sigma / std::sqrt(1.0 - phi * phi);
  const int chains = constant ? 1 : d;
  Mat logx(n, chains);
  for (int c = 0; c < chains; ++c) {
    if (n == 0) break;
    double prev = tau + sd0 * rng.normal();
    logx(0, c) = prev;
    for (int t = 1; t < n; ++t) {
      prev = (1.0 - phi) * tau + phi * prev + sigma * rng.normal();
      logx(t, c) = prev;
    }
  }
  Mat out(n, d);
  if (constant) {
    for (int t = 0; t < n; ++t) out.row(t).setConstant(std::exp(logx(t, 0)));
  } else {
    out = logx.array().exp();
  }
  return out;
}

Vec sample_x2_iid(double beta2, int n, Rng& rng) {
  if (!(beta2 > 0.0)) throw InvalidInput("sample_x2_iid: beta2 must be positive");
  const double norm = std::tgamma(1.0 + beta2);
  Vec out(n);
  for (int t = 0; t < n; ++t) out[t] = std::pow(rng.exponential(), beta2) / norm;
  return out;
}

Mat simulate_factors(const SiteSet& sites, const FactorVariant& variant,
                     const ParameterVector& theta, int n, Rng& rng) {
  const int d = sites.size();
  ParameterLayout layout(variant, CovariateModel::from_name("M1"));
  layout.x_block(theta);  // throws on missing fields

  // Independent child streams, split unconditionally so each factor's stream is
  // stable across variants.
  Rng r1 = rng.split(), r2 = rng.split(), r3 = rng.split();
  Mat prod = Mat::Ones(n, d);
  if (variant.has_beta1())
    prod.array() *=
        sample_x1(*theta.beta1, n, d, variant.noise == FactorMode::constant, r1).array();
  if (variant.has_ar())
    prod.array() *= sample_x2_ar(*theta.phi, *theta.sigma, n, d,
                                 variant.ar == FactorMode::constant, r2)
                        .array();
  if (variant.has_beta2()) {
    const Vec x2 = sample_x2_iid(*theta.beta2, n, r2);
    prod.array().colwise() *= x2.array();
  }
  if (variant.x3) {
    if (!(*theta.rho > 0.0)) throw InvalidInput("simulate: rho must be positive");
    prod.array() *=
        sample_x3(sites, CorrelationModel{*theta.rho}, IgMargin{*theta.beta3}, n, r3).array();
  }
  return prod;
}

Mat simulate_panel(const SiteSet& sites, const CovariateModel& covmodel,
                   const FactorVariant& variant, const ParameterVector& theta, int n, Rng& rng) {
  ParameterLayout(variant, covmodel).check_complete(theta);
  const Vec a = alpha(sites, covmodel, theta.gamma);
  Mat panel = simulate_factors(sites, variant, theta, n, rng);
  panel.array().rowwise() *= a.transpose().array();
  return panel;
}

double quantile_sorted(const double* sorted, std::size_t n, double level) {
  if (n == 0) throw InvalidInput("quantile: empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw InvalidInput("quantile: level outside [0,1]");
  const double h = static_cast<double>(n - 1) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double level) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values.data(), values.size(), level);
}

Vec empirical_threshold(const Mat& panel, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("empirical_threshold: level must lie in (0,1)");
  if (panel.rows() < 2) throw InvalidInput("empirical_threshold: at least two rows required");
  Vec u(panel.cols());
  std::vector<double> col(static_cast<std::size_t>(panel.rows()));
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    Eigen::Map<Vec>(col.data(), panel.rows()) = panel.col(j);
    std::sort(col.begin(), col.end());
    u[j] = quantile_sorted(col.data(), col.size(), level);
  }
  return u;
}

CensoredPanel censor(const Mat& panel, const Vec& thresholds) {
  if (thresholds.size() != panel.cols()) throw InvalidInput("censor: threshold count must equal columns");
  if (!thresholds.allFinite()) throw InvalidInput("censor: thresholds must be finite");
  CensoredPanel out;
  out.thresholds = thresholds;
  out.values.resize(panel.rows(), panel.cols());
  out.censor_mask.resize(panel.rows(), panel.cols());
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
      const bool c = panel(t, j) <= thresholds[j];
      out.censor_mask(t, j) = c;
      out.values(t, j) = c ? thresholds[j] : panel(t, j);
    }
  }
  return out;
}

Mat latent_ratio(const CensoredPanel& censored, const Vec& a) {
  if (a.size() != censored.values.cols()) throw InvalidInput("latent_ratio: alpha length mismatch");
  if (!((a.array() > 0.0).all()) || !a.allFinite())
    throw InvalidInput("latent_ratio: alpha must be positive and finite");
  return censored.values.array().rowwise() / a.transpose().array();
}

}  // namespace stpot
