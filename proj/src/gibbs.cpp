#include "stpot/gibbs.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stpot/errors.hpp"

namespace stpot {

nlohmann::json PosteriorChain::meta() const {
  return {{"seed", seed},         {"chain_id", chain_id},   {"n_iter", n_iter()},
          {"burn_in", burn_in},   {"variant", variant},     {"covmodel", covmodel},
          {"parameters", names},  {"checkpoint_hashes", checkpoint_hashes}};
}

int default_burn_in(int n_iter) { return n_iter / 10; }

Vec initialize(const PriorSpec& prior, const FactorVariant& variant, Rng& rng) {
  const ParameterLayout layout(variant, CovariateModel::from_name("M1"));
  return layout.x_block(sample_prior_x(prior, variant, rng));
}

void check_compatible(const Estimator& ea, const Estimator& ex, const SiteSet& sites,
                      const CensoredPanel& cp, const ParameterLayout& layout) {
  const std::string& v = layout.variant().name;
  const std::string& m = layout.covmodel().name;
  if (ea.role != "ralpha" || ex.role != "rx")
    throw ConfigError("expected an R_alpha and an R_X checkpoint, got roles '" + ea.role + "' and '" +
                      ex.role + "'");
  if (ea.variant != v || ex.variant != v || ea.covmodel != m || ex.covmodel != m)
    throw ConfigError("checkpoints were trained for " + ea.variant + "-" + ea.covmodel + " / " +
                      ex.variant + "-" + ex.covmodel + ", not " + v + "-" + m);
  const int d = sites.size();
  if (cp.cols() != d) throw ConfigError("censored panel has " + std::to_string(cp.cols()) + " sites, site set has " + std::to_string(d));
  if (ea.summary.arch().columns != d + layout.n_x() || ea.dim() != layout.n_alpha())
    throw ConfigError("R_alpha checkpoint expects " + std::to_string(ea.summary.arch().columns - layout.n_x()) +
                      " sites; data has " + std::to_string(d));
  const SummaryArch& ax = ex.summary.arch();
  if (ax.d1 * ax.d2 != d || ex.dim() != layout.n_x())
    throw ConfigError("R_X checkpoint grid " + std::to_string(ax.d1) + "x" + std::to_string(ax.d2) +
                      " does not match " + std::to_string(d) + " sites");
  if (ea.extra.contains("site_ids") && ea.extra["site_ids"].get<std::vector<std::string>>() != sites.ids)
    throw ConfigError("R_alpha checkpoint was trained on a different site list");
  if (ex.extra.contains("site_ids") && ex.extra["site_ids"].get<std::vector<std::string>>() != sites.ids)
    throw ConfigError("R_X checkpoint was trained on a different site list");
}

PosteriorChain gibbs_run(const Estimator& ea, const Estimator& ex, const SiteSet& sites,
                         const CensoredPanel& cp, const Vec& init_x, int n_iter, Rng& rng) {
  if (n_iter < 0) throw InvalidInput("n_iter must be non-negative");
  const ParameterLayout layout(FactorVariant::from_name(ea.variant), CovariateModel::from_name(ea.covmodel));
  check_compatible(ea, ex, sites, cp, layout);
  if (init_x.size() != layout.n_x()) throw ConfigError("initial latent block has the wrong length");
  const int na = layout.n_alpha(), nx = layout.n_x();
  const auto t0 = std::chrono::steady_clock::now();

  PosteriorChain chain;
  chain.names = layout.names();
  chain.variant = layout.variant().name;
  chain.covmodel = layout.covmodel().name;
  chain.draws.resize(n_iter, na + nx);
  chain.burn_in = default_burn_in(n_iter);

  Vec theta_x = init_x;
  Mat za(na, 1), zx(nx, 1);
  for (int i = 0; i < n_iter; ++i) {
    for (int k = 0; k < na; ++k) za(k) = rng.normal();
    for (int k = 0; k < nx; ++k) zx(k) = rng.normal();
    const Mat input_a = assemble_ralpha_input(cp, theta_x, layout.variant());
    const Vec gamma = ea.sample(input_a, za).col(0);
    const Mat ratio = latent_ratio(cp, alpha(sites, layout.covmodel(), gamma));
    theta_x = ex.sample(ratio, zx).col(0);
    chain.draws.row(i).head(na) = gamma.transpose();
    chain.draws.row(i).tail(nx) = theta_x.transpose();
  }
  chain.wall_minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return chain;
}

void write_chain_csv(const std::string& path, const PosteriorChain& chain) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write chain " + path);
  out << "iteration";
  for (const auto& n : chain.names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (int i = 0; i < chain.n_iter(); ++i) {
    out << i;
    for (Eigen::Index k = 0; k < chain.draws.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", chain.draws(i, k));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing chain " + path);
}

PosteriorChain read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain " + path);
  PosteriorChain chain;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty chain file " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "iteration") throw DataError("chain file " + path + " must start with an iteration column");
    while (std::getline(ss, cell, ',')) chain.names.push_back(cell);
  }
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("non-numeric value '" + cell + "' in " + path + " row " + std::to_string(rows + 1));
      }
      ++count;
    }
    if (count != chain.names.size())
      throw DataError("row " + std::to_string(rows + 1) + " of " + path + " has the wrong number of columns");
    ++rows;
  }
  chain.draws.resize(rows, static_cast<Eigen::Index>(chain.names.size()));
  for (int i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < chain.names.size(); ++k) chain.draws(i, k) = values[i * chain.names.size() + k];
  chain.burn_in = default_burn_in(rows);
  return chain;
}

}  // namespace stpot
