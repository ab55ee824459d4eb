#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stpot/diagnostics.hpp"
#include "stpot/gibbs.hpp"
#include "stpot/io.hpp"

namespace stpot {

// Git-style content hash: sha1("blob <size>\0" + bytes), lowercase hex.
std::string git_blob_hash(const std::string& bytes);
std::string git_blob_hash_file(const std::string& path);

struct Dataset {
  SiteSet sites;       // training sites
  Mat observed;        // n x d, training window
  std::vector<std::string> dates;
  std::optional<SiteSet> test_sites;
  Mat test_observed;
  std::vector<std::string> test_dates;
  std::optional<Vec> truth;  // canonical order, simulated data only
  SiteSet all_sites;         // before the split
  ObservationTable all_observed;
};

// Loads (or simulates) the data and applies the train/test split.
Dataset prepare_data(const ExperimentConfig& cfg);
// Simulated data plus the full site table, written as sites.csv / observations.csv / truth.json.
void write_dataset(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir);

// Stage functions write into `dir` and return the paths they produced (relative to dir).
struct StageFiles {
  std::vector<std::string> deterministic;
  std::vector<std::string> timing;  // wall-clock dependent
};

StageFiles train_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir);
StageFiles gibbs_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir);
StageFiles diagnose_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir);

struct ExperimentResult {
  std::string output_dir;
  StageFiles files;
  nlohmann::json report;
};

// Full pipeline: data, both networks, Gibbs chains, diagnostics and a manifest.
// On failure the outputs of finished stages stay in place, manifest.json records the
// failing stage, and the error is rethrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Runs one stage ("simulate", "train", "gibbs" or "diagnose") against cfg.output_dir, reusing
// earlier stages' files there, and rewrites manifest.json from the directory contents.
void run_stage(const ExperimentConfig& cfg, const std::string& stage);

// Every regular file under dir except manifest.json; wall-clock files are classified by name.
StageFiles scan_outputs(const std::string& dir);

void write_manifest(const ExperimentConfig& cfg, const std::string& dir, const StageFiles& files,
                    const std::string& status, const std::string& failed_stage = "",
                    const std::string& message = "");

struct RankingRow {
  std::string name;
  std::string dir;
  double mqae = 0.0, mqse = 0.0;
};
// Sorts result directories by the criterion ("MQAE" or "MQSE") on a split ("train" or
// "test"); ties fall back to the other criterion, then the name.
std::vector<RankingRow> compare_models(const std::vector<std::string>& dirs, const std::string& criterion,
                                       const std::string& split);
void write_ranking(const std::string& path, const std::vector<RankingRow>& rows);

}  // namespace stpot
