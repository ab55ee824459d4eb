#ifndef STPOT_H
#define STPOT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define STPOT_API __declspec(dllexport)
#else
#define STPOT_API __attribute__((visibility("default")))
#endif

typedef enum stpot_status {
  STPOT_OK = 0,
  STPOT_ERR_INVALID_INPUT = 1,
  STPOT_ERR_CONFIG = 2,
  STPOT_ERR_NUMERIC = 3,
  STPOT_ERR_DATA = 4,
  STPOT_ERR_IO = 5,
  STPOT_ERR_INTERNAL = 6
} stpot_status;

typedef struct stpot_config stpot_config;
typedef struct stpot_sites stpot_sites;
typedef struct stpot_estimator stpot_estimator;

STPOT_API const char* stpot_version(void);
/* Message of the last failed call on this thread; "" after a success. */
STPOT_API const char* stpot_last_error(void);
STPOT_API void stpot_string_free(char* s);

/* ---- experiment configuration ---- */
STPOT_API stpot_status stpot_config_preset(const char* name, stpot_config** out);
STPOT_API stpot_status stpot_config_load(const char* path, stpot_config** out);
STPOT_API stpot_status stpot_config_from_json(const char* text, stpot_config** out);
/* JSON text; release with stpot_string_free. */
STPOT_API stpot_status stpot_config_to_json(const stpot_config* cfg, char** out);
STPOT_API stpot_status stpot_config_save(const stpot_config* cfg, const char* path);
STPOT_API stpot_status stpot_config_set_seed(stpot_config* cfg, uint64_t seed);
STPOT_API stpot_status stpot_config_set_output_dir(stpot_config* cfg, const char* dir);
STPOT_API stpot_status stpot_config_validate(const stpot_config* cfg);
STPOT_API void stpot_config_free(stpot_config* cfg);

/* ---- pipeline: every stage reads and writes the config's output directory ---- */
STPOT_API stpot_status stpot_simulate(const stpot_config* cfg);
STPOT_API stpot_status stpot_train(const stpot_config* cfg);
STPOT_API stpot_status stpot_gibbs(const stpot_config* cfg);
STPOT_API stpot_status stpot_diagnose(const stpot_config* cfg);
/* Runs every stage; report_json (optional) receives the metric report. */
STPOT_API stpot_status stpot_run_experiment(const stpot_config* cfg, char** report_json);
/* criterion "MQAE" or "MQSE", split "train" or "test"; out_csv may be NULL. */
STPOT_API stpot_status stpot_compare(const char* const* dirs, size_t n_dirs, const char* criterion,
                                     const char* split, const char* out_csv, char** ranking_json);

/* ---- sites ---- */
STPOT_API stpot_status stpot_sites_load(const char* path, stpot_sites** out);
STPOT_API stpot_status stpot_sites_grid(int d1, int d2, stpot_sites** out);
STPOT_API size_t stpot_sites_count(const stpot_sites* sites);
STPOT_API double stpot_sites_delta(const stpot_sites* sites);
STPOT_API void stpot_sites_free(stpot_sites* sites);

/* ---- generative model ---- */
/* JSON array of canonical parameter names. */
STPOT_API stpot_status stpot_parameter_names(const char* variant, const char* covmodel, char** out_json);
/* theta in canonical order; out receives n x d values, row-major. */
STPOT_API stpot_status stpot_simulate_panel(const stpot_sites* sites, const char* variant, const char* covmodel,
                                            const double* theta, size_t theta_len, int n, uint64_t seed,
                                            double* out);

/* ---- trained estimators ---- */
STPOT_API stpot_status stpot_estimator_load(const char* path, stpot_estimator** out);
STPOT_API int stpot_estimator_dim(const stpot_estimator* est);
/* input: rows x cols, row-major; out receives count x dim draws, row-major. */
STPOT_API stpot_status stpot_estimator_sample(const stpot_estimator* est, const double* input, int rows, int cols,
                                              int count, uint64_t seed, double* out);
STPOT_API void stpot_estimator_free(stpot_estimator* est);

/* ---- diagnostics on plain arrays ---- */
STPOT_API stpot_status stpot_ess(const double* draws, size_t n, double* out);
STPOT_API stpot_status stpot_hill(const double* values, size_t n, size_t k, double* out);
STPOT_API stpot_status stpot_return_probability(double years, int season_days, double* out);

#ifdef __cplusplus
}
#endif

#endif
