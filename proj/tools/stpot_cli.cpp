// Command-line front end. Talks to the library only through stpot.h.
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stpot/stpot.h"

namespace {

int exit_code(stpot_status s) {
  switch (s) {
    case STPOT_OK: return 0;
    case STPOT_ERR_INVALID_INPUT:
    case STPOT_ERR_CONFIG: return 2;
    case STPOT_ERR_NUMERIC: return 3;
    case STPOT_ERR_DATA:
    case STPOT_ERR_IO: return 4;
    default: return 1;
  }
}

int report(stpot_status s) {
  if (s != STPOT_OK) std::fprintf(stderr, "error: %s\n", stpot_last_error());
  return exit_code(s);
}

struct ConfigFlags {
  std::string config, preset, out;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config, "experiment config (JSON)");
    auto* p = cmd->add_option("--preset", preset, "built-in config")->check(CLI::IsMember({"smoke", "sim-study", "guanacaste-d4m5"}));
    c->excludes(p);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out, "override the output directory");
  }

  // Returns a status; on success *cfg owns the configuration.
  stpot_status build(stpot_config** cfg) const {
    stpot_status s;
    if (!config.empty())
      s = stpot_config_load(config.c_str(), cfg);
    else if (!preset.empty())
      s = stpot_config_preset(preset.c_str(), cfg);
    else
      s = stpot_config_preset("smoke", cfg);
    if (s != STPOT_OK) return s;
    if (seed && (s = stpot_config_set_seed(*cfg, *seed)) != STPOT_OK) return s;
    if (!out.empty() && (s = stpot_config_set_output_dir(*cfg, out.c_str())) != STPOT_OK) return s;
    return STPOT_OK;
  }
};

using Stage = stpot_status (*)(const stpot_config*);

int run_stage(const ConfigFlags& flags, Stage stage) {
  stpot_config* cfg = nullptr;
  stpot_status s = flags.build(&cfg);
  if (s == STPOT_OK) s = stage(cfg);
  stpot_config_free(cfg);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal peaks-over-threshold model with amortized Gibbs inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(stpot_version()));

  ConfigFlags sim_f, train_f, gibbs_f, diag_f, exp_f, cfg_f;
  auto* sim = app.add_subcommand("simulate", "write the (simulated or loaded) dataset to <out>/data");
  sim_f.add_to(sim);
  auto* train = app.add_subcommand("train", "train both summary/flow estimators");
  train_f.add_to(train);
  auto* gibbs = app.add_subcommand("gibbs", "run Gibbs chains with trained checkpoints in <out>");
  gibbs_f.add_to(gibbs);
  auto* diag = app.add_subcommand("diagnose", "posterior summaries, quantile errors, QQ and return levels");
  diag_f.add_to(diag);
  auto* exp = app.add_subcommand("experiment", "run every stage and write a manifest");
  exp_f.add_to(exp);
  auto* show = app.add_subcommand("config", "print the resolved config as JSON");
  cfg_f.add_to(show);

  std::vector<std::string> dirs;
  std::string criterion = "MQAE", split = "train", out_csv;
  auto* cmp = app.add_subcommand("compare", "rank result directories by MQAE or MQSE");
  cmp->add_option("dirs", dirs, "result directories")->required();
  cmp->add_option("--criterion", criterion)->check(CLI::IsMember({"MQAE", "MQSE"}));
  cmp->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
  cmp->add_option("--out", out_csv, "write the ranking as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*sim) return run_stage(sim_f, stpot_simulate);
  if (*train) return run_stage(train_f, stpot_train);
  if (*gibbs) return run_stage(gibbs_f, stpot_gibbs);
  if (*diag) return run_stage(diag_f, stpot_diagnose);
  if (*exp) {
    stpot_config* cfg = nullptr;
    char* rep = nullptr;
    stpot_status s = exp_f.build(&cfg);
    if (s == STPOT_OK) s = stpot_run_experiment(cfg, &rep);
    if (rep) std::printf("%s\n", rep);
    stpot_string_free(rep);
    stpot_config_free(cfg);
    return report(s);
  }
  if (*show) {
    stpot_config* cfg = nullptr;
    char* text = nullptr;
    stpot_status s = cfg_f.build(&cfg);
    if (s == STPOT_OK) s = stpot_config_to_json(cfg, &text);
    if (text) std::printf("%s\n", text);
    stpot_string_free(text);
    stpot_config_free(cfg);
    return report(s);
  }
  if (*cmp) {
    std::vector<const char*> ptrs;
    for (const auto& d : dirs) ptrs.push_back(d.c_str());
    char* ranking = nullptr;
    const stpot_status s = stpot_compare(ptrs.data(), ptrs.size(), criterion.c_str(), split.c_str(),
                                         out_csv.empty() ? nullptr : out_csv.c_str(), &ranking);
    if (ranking) std::printf("%s\n", ranking);
    stpot_string_free(ranking);
    return report(s);
  }
  return 1;
}
