#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stpot/estimator.hpp"
#include "stpot/model.hpp"

namespace stpot {

struct TrainConfig {
  int batch_size = 32;
  long max_batches = 0;  // 0: derived from sims_budget
  long sims_budget = 16384;
  int epochs = 1;  // >1: passes over a fixed pool of sims_budget simulations, reshuffled per pass
  int eval_every = 16;
  int patience = 20;
  double min_delta = 1e-3;
  int heldout_size = 512;
  std::uint64_t seed = 1;
  int scenario = 1;
  int n_lstm = 0, n_dense = 0;  // override the scenario capacity when positive
  std::string variant = "D4";
  std::string covmodel = "M4";
  int n = 100;
  int d1 = 0, d2 = 0;  // 0: most square factorization of d
  double censor_level = 0.75;
  double learning_rate = 5e-4;
  double clip_norm = 5.0;
  bool cosine_decay = true;
  int workers = 1;
  FlowArch flow;

  void validate() const;
  long batches() const;
  std::pair<int, int> capacity() const;
  std::pair<int, int> grid(int d) const;
};

struct TrainLogEntry {
  long batch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;  // NaN when not evaluated at this batch
  double wall_ms = 0.0;
};

struct TrainingExample {
  Mat input;
  Vec theta;
};
using ExampleSimulator = std::function<TrainingExample(Rng&)>;

struct TrainResult {
  Estimator estimator;
  std::vector<TrainLogEntry> log;
  double initial_heldout = 0.0;
  double best_heldout = 0.0;
  long best_batch = 0;
  long batches_run = 0;
  bool early_stopped = false;
  std::string failure;  // set when a numeric failure stopped training; weights are the last good ones
};

using TrainObserver = std::function<void(const TrainLogEntry&)>;

// Online training: every batch draws fresh simulations from per-example substreams of
// `seed`, so results do not depend on the number of workers. The returned estimator
// holds the weights with the lowest held-out loss seen.
TrainResult train_estimator(Estimator est, const ExampleSimulator& simulate, const TrainConfig& cfg,
                            std::uint64_t seed, const TrainObserver& observer = {});

ExampleSimulator ralpha_simulator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg);
ExampleSimulator rx_simulator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg);

Estimator make_ralpha_estimator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg,
                                std::uint64_t seed);
Estimator make_rx_estimator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg,
                            std::uint64_t seed);

TrainResult train_ralpha(const TrainConfig& cfg, const SiteSet& sites, const PriorSpec& prior,
                         const TrainObserver& observer = {});
TrainResult train_rx(const TrainConfig& cfg, const SiteSet& sites, const PriorSpec& prior,
                     const TrainObserver& observer = {});

// Training-phase seeds for the two networks, derived from the configured seed.
std::uint64_t ralpha_seed(std::uint64_t seed);
std::uint64_t rx_seed(std::uint64_t seed);

struct RecoveryResult {
  std::vector<std::string> names;
  Mat truths;  // R x P
  Mat means;   // R x P
  Vec r2;
};

// Conditional recovery of each block: R_alpha is conditioned on the true latent
// block and R_X on the true scale factors.
RecoveryResult validate_recovery(const Estimator& est_alpha, const Estimator& est_x,
                                 const SiteSet& sites, const PriorSpec& prior,
                                 const TrainConfig& cfg, int replicates, int draws, Rng& rng);

void write_training_log(const std::string& path, const std::vector<TrainLogEntry>& log);

}  // namespace stpot
