#include "stpot/stpot.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "stpot/diagnostics.hpp"
#include "stpot/errors.hpp"
#include "stpot/experiment.hpp"

struct stpot_config {
  stpot::ExperimentConfig cfg;
};
struct stpot_sites {
  stpot::SiteSet sites;
};
struct stpot_estimator {
  stpot::Estimator est;
};

namespace {

thread_local std::string g_last_error;

stpot_status fail(stpot_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <class F>
stpot_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return STPOT_OK;
  } catch (const stpot::Error& e) {
    return fail(static_cast<stpot_status>(static_cast<int>(e.kind())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(STPOT_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(STPOT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(STPOT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(STPOT_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw stpot::InvalidInput(std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* stpot_version(void) { return "0.1.0"; }
const char* stpot_last_error(void) { return g_last_error.c_str(); }
void stpot_string_free(char* s) { std::free(s); }

// ---- config ----

stpot_status stpot_config_preset(const char* name, stpot_config** out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    *out = new stpot_config{stpot::ExperimentConfig::preset(name)};
  });
}

stpot_status stpot_config_load(const char* path, stpot_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new stpot_config{stpot::ExperimentConfig::load(path)};
  });
}

stpot_status stpot_config_from_json(const char* text, stpot_config** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw stpot::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new stpot_config{stpot::ExperimentConfig::from_json(j)};
  });
}

stpot_status stpot_config_to_json(const stpot_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup_string(cfg->cfg.to_json().dump(2));
  });
}

stpot_status stpot_config_save(const stpot_config* cfg, const char* path) {
  return guard([&] {
    need(cfg, "cfg");
    need(path, "path");
    cfg->cfg.save(path);
  });
}

stpot_status stpot_config_set_seed(stpot_config* cfg, uint64_t seed) {
  return guard([&] {
    need(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

stpot_status stpot_config_set_output_dir(stpot_config* cfg, const char* dir) {
  return guard([&] {
    need(cfg, "cfg");
    need(dir, "dir");
    cfg->cfg.output_dir = dir;
  });
}

stpot_status stpot_config_validate(const stpot_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    cfg->cfg.validate();
  });
}

void stpot_config_free(stpot_config* cfg) { delete cfg; }

// ---- pipeline ----

stpot_status stpot_simulate(const stpot_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    stpot::run_stage(cfg->cfg, "simulate");
  });
}

stpot_status stpot_train(const stpot_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    stpot::run_stage(cfg->cfg, "train");
  });
}

stpot_status stpot_gibbs(const stpot_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    stpot::run_stage(cfg->cfg, "gibbs");
  });
}

stpot_status stpot_diagnose(const stpot_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    stpot::run_stage(cfg->cfg, "diagnose");
  });
}

stpot_status stpot_run_experiment(const stpot_config* cfg, char** report_json) {
  return guard([&] {
    need(cfg, "cfg");
    const stpot::ExperimentResult r = stpot::run_experiment(cfg->cfg);
    if (report_json) *report_json = dup_string(r.report.dump(2));
  });
}

stpot_status stpot_compare(const char* const* dirs, size_t n_dirs, const char* criterion, const char* split,
                           const char* out_csv, char** ranking_json) {
  return guard([&] {
    need(criterion, "criterion");
    need(split, "split");
    if (n_dirs > 0) need(dirs, "dirs");
    std::vector<std::string> ds;
    for (size_t k = 0; k < n_dirs; ++k) {
      need(dirs[k], "dirs[k]");
      ds.emplace_back(dirs[k]);
    }
    const auto rows = stpot::compare_models(ds, criterion, split);
    if (out_csv) stpot::write_ranking(out_csv, rows);
    if (ranking_json) {
      nlohmann::json j = nlohmann::json::array();
      for (std::size_t k = 0; k < rows.size(); ++k)
        j.push_back({{"rank", k + 1}, {"name", rows[k].name}, {"dir", rows[k].dir}, {"mqae", rows[k].mqae}, {"mqse", rows[k].mqse}});
      *ranking_json = dup_string(j.dump(2));
    }
  });
}

// ---- sites ----

stpot_status stpot_sites_load(const char* path, stpot_sites** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new stpot_sites{stpot::load_sites(path)};
  });
}

stpot_status stpot_sites_grid(int d1, int d2, stpot_sites** out) {
  return guard([&] {
    need(out, "out");
    *out = new stpot_sites{stpot::unit_grid(d1, d2)};
  });
}

size_t stpot_sites_count(const stpot_sites* sites) { return sites ? sites->sites.ids.size() : 0; }
double stpot_sites_delta(const stpot_sites* sites) { return sites ? sites->sites.delta : 0.0; }
void stpot_sites_free(stpot_sites* sites) { delete sites; }

// ---- model ----

stpot_status stpot_parameter_names(const char* variant, const char* covmodel, char** out_json) {
  return guard([&] {
    need(variant, "variant");
    need(covmodel, "covmodel");
    need(out_json, "out_json");
    const stpot::ParameterLayout layout(stpot::FactorVariant::from_name(variant),
                                        stpot::CovariateModel::from_name(covmodel));
    *out_json = dup_string(nlohmann::json(layout.names()).dump());
  });
}

stpot_status stpot_simulate_panel(const stpot_sites* sites, const char* variant, const char* covmodel,
                                  const double* theta, size_t theta_len, int n, uint64_t seed, double* out) {
  return guard([&] {
    need(sites, "sites");
    need(variant, "variant");
    need(covmodel, "covmodel");
    need(theta, "theta");
    need(out, "out");
    if (n < 1) throw stpot::InvalidInput("n must be positive");
    const stpot::ParameterLayout layout(stpot::FactorVariant::from_name(variant),
                                        stpot::CovariateModel::from_name(covmodel));
    if (theta_len != static_cast<size_t>(layout.size()))
      throw stpot::InvalidInput("theta has " + std::to_string(theta_len) + " values, " + variant + "-" + covmodel +
                                " needs " + std::to_string(layout.size()));
    const stpot::Vec t = Eigen::Map<const stpot::Vec>(theta, static_cast<Eigen::Index>(theta_len));
    stpot::Rng rng(seed);
    const stpot::Mat y = stpot::simulate_panel(sites->sites, layout.covmodel(), layout.variant(),
                                               layout.unflatten(t), n, rng);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, y.rows(), y.cols()) = y;
  });
}

// ---- estimators ----

stpot_status stpot_estimator_load(const char* path, stpot_estimator** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new stpot_estimator{stpot::Estimator::load(path)};
  });
}

int stpot_estimator_dim(const stpot_estimator* est) { return est ? est->est.dim() : 0; }

stpot_status stpot_estimator_sample(const stpot_estimator* est, const double* input, int rows, int cols, int count,
                                    uint64_t seed, double* out) {
  return guard([&] {
    need(est, "est");
    need(input, "input");
    need(out, "out");
    if (rows < 1 || cols < 1 || count < 1) throw stpot::InvalidInput("rows, cols and count must be positive");
    const stpot::Mat x =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(input, rows, cols);
    stpot::Rng rng(seed);
    const stpot::Mat draws = est->est.sample(x, count, rng);  // dim x count
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, count, draws.rows()) =
        draws.transpose();
  });
}

void stpot_estimator_free(stpot_estimator* est) { delete est; }

// ---- diagnostics ----

stpot_status stpot_ess(const double* draws, size_t n, double* out) {
  return guard([&] {
    need(draws, "draws");
    need(out, "out");
    *out = stpot::ess(Eigen::Map<const stpot::Vec>(draws, static_cast<Eigen::Index>(n)));
  });
}

stpot_status stpot_hill(const double* values, size_t n, size_t k, double* out) {
  return guard([&] {
    need(values, "values");
    need(out, "out");
    *out = stpot::hill_estimator(std::vector<double>(values, values + n), k);
  });
}

stpot_status stpot_return_probability(double years, int season_days, double* out) {
  return guard([&] {
    need(out, "out");
    if (!(years >= 1.0) || season_days < 1) throw stpot::InvalidInput("need years >= 1 and season_days >= 1");
    *out = stpot::return_probability(years, season_days);
  });
}

}  // extern "C"
