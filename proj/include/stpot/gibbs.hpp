#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "stpot/estimator.hpp"
#include "stpot/model.hpp"

namespace stpot {

struct PosteriorChain {
  std::vector<std::string> names;  // canonical order
  Mat draws;                       // n_iter x P
  double wall_minutes = 0.0;
  std::uint64_t seed = 0;
  int chain_id = 0;
  int burn_in = 0;
  std::string variant, covmodel;
  std::vector<std::string> checkpoint_hashes;

  int n_iter() const { return static_cast<int>(draws.rows()); }
  Mat kept() const { return draws.bottomRows(std::max(0, n_iter() - burn_in)); }
  // Deterministic metadata; runtime is reported separately.
  nlohmann::json meta() const;
};

// Default burn-in is 10% of the run length.
int default_burn_in(int n_iter);

// Prior draw of the latent-factor block in canonical order.
Vec initialize(const PriorSpec& prior, const FactorVariant& variant, Rng& rng);

// Throws ConfigError when the two estimators do not fit each other or the data.
void check_compatible(const Estimator& est_alpha, const Estimator& est_x, const SiteSet& sites,
                      const CensoredPanel& censored, const ParameterLayout& layout);

// Two-block scan: one draw of the scale block given the latent block, then one draw of
// the latent block given the implied latent ratios. Row i holds (Theta_alpha^(i), Theta_X^(i+1)).
PosteriorChain gibbs_run(const Estimator& est_alpha, const Estimator& est_x, const SiteSet& sites,
                         const CensoredPanel& censored, const Vec& init_x, int n_iter, Rng& rng);

void write_chain_csv(const std::string& path, const PosteriorChain& chain);
PosteriorChain read_chain_csv(const std::string& path);

}  // namespace stpot
