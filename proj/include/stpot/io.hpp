#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stpot/model.hpp"
#include "stpot/trainer.hpp"

namespace stpot {

// ---- data files -----------------------------------------------------------

// Sites CSV: site_id, lon, lat, alt, then optional extra covariate columns.
// Covariates (alt and extras, plus lon/lat) are standardized over the loaded sites;
// coordinates stay in the file's units.
SiteSet load_sites(const std::string& path);
void write_sites(const std::string& path, const SiteSet& sites);

struct ObservationTable {
  std::vector<std::string> dates;  // ISO yyyy-mm-dd, strictly increasing
  Mat values;                      // n x d in site order
};

// Observations CSV: date, one column per site id (any order, extra columns ignored).
// Rows outside `months` are dropped; remaining empty cells are an error.
ObservationTable load_observations(const std::string& path, const SiteSet& sites,
                                   const std::vector<int>& months = {9, 10, 11, 12});
void write_observations(const std::string& path, const ObservationTable& obs,
                        const std::vector<std::string>& site_ids);

ObservationTable select_dates(const ObservationTable& obs, const std::string& first,
                              const std::string& last);
ObservationTable select_sites(const ObservationTable& obs, const SiteSet& all,
                              const std::vector<std::string>& ids);

// Consecutive calendar days falling in `months`, starting at `first`.
std::vector<std::string> season_dates(const std::string& first, const std::vector<int>& months, int n);
// Days per (non-leap) year covered by the months.
int season_length(const std::vector<int>& months);

// Unit-square grid with covariates (x, y, z), z ~ N(0, 1) independent per site.
SiteSet sim_study_sites(int d1, int d2, std::uint64_t seed);

// ---- experiment configuration --------------------------------------------

struct GibbsSettings {
  int n_iter = 1000;
  int burn_in = -1;  // -1: 10% of n_iter
  int chains = 1;

  int effective_burn_in() const { return burn_in < 0 ? n_iter / 10 : burn_in; }
};

struct SplitSettings {
  std::vector<std::string> train_sites;  // empty: every loaded site
  std::vector<std::string> test_sites;   // empty: the training sites
  std::string train_start, train_end;    // empty bounds are open
  std::string test_start, test_end;      // both empty: no test split

  bool has_test() const { return !test_start.empty() || !test_end.empty(); }
};

struct SimulationSettings {
  int d1 = 4, d2 = 4;
  int n = 100;
  std::map<std::string, double> truth;  // canonical parameter names
  std::uint64_t data_seed = 2015;
  std::string start_date = "2015-09-01";
};

struct DiagnosticSettings {
  int c_u = 75;
  int predictive_panels = 100;
  int qq_replicates = 200;
  std::vector<double> return_periods = {2, 5, 10, 25};
  int return_level_draws = 20;
  long return_level_length = 0;  // 0: the minimum for the longest period
  int recovery_replicates = 0;
  int recovery_draws = 200;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string sites_file, observations_file;  // both empty: simulated data
  std::string variant = "D4";
  std::string covmodel = "M4";
  double censor_level = 0.75;
  std::vector<int> months = {9, 10, 11, 12};
  int season_days = 122;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  TrainConfig train;
  GibbsSettings gibbs;
  SplitSettings split;
  SimulationSettings simulation;
  DiagnosticSettings diagnostics;

  bool simulated() const { return sites_file.empty() && observations_file.empty(); }
  // Throws ConfigError; `check_files` also requires the data files to exist.
  void validate(bool check_files = true) const;
  // The training settings with the experiment-level fields filled in.
  TrainConfig train_config(int n) const;

  nlohmann::json to_json() const;
  // Strict: unknown keys and wrong types are ConfigErrors.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  static ExperimentConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

}  // namespace stpot
