#include "stpot/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <thread>

#include "stpot/diagnostics.hpp"
#include "stpot/errors.hpp"

namespace stpot {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_batches < 0 || sims_budget < 0) throw ConfigError("train budget must be non-negative");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (epochs > 1 && sims_budget < 1) throw ConfigError("train.epochs > 1 needs a positive sims_budget");
  if (batches() < 1) throw ConfigError("training budget gives zero batches");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (heldout_size < 1) throw ConfigError("train.heldout_size must be >= 1");
  if (n < 2) throw ConfigError("train.n must be >= 2");
  if (!(censor_level > 0.0 && censor_level < 1.0)) throw ConfigError("censor level must lie in (0, 1)");
  if (!(learning_rate >= 0.0) || !(clip_norm >= 0.0)) throw ConfigError("invalid optimizer settings");
  if (workers < 1) throw ConfigError("train.workers must be >= 1");
  capacity();
  FactorVariant::from_name(variant);
  CovariateModel::from_name(covmodel);
}

long TrainConfig::batches() const {
  return max_batches > 0 ? max_batches : epochs * sims_budget / batch_size;
}

std::pair<int, int> TrainConfig::capacity() const {
  auto cap = scenario_capacity(scenario);
  if (n_lstm > 0) cap.first = n_lstm;
  if (n_dense > 0) cap.second = n_dense;
  return cap;
}

std::pair<int, int> TrainConfig::grid(int d) const {
  if (d1 > 0 || d2 > 0) {
    if (d1 * d2 != d) assemble_rx_input(Mat(0, d), d1, d2);  // throws with the valid options
    return {d1, d2};
  }
  return default_grid(d);
}

std::uint64_t ralpha_seed(std::uint64_t seed) { return Rng::substream(seed, stream::init, 1).next(); }
std::uint64_t rx_seed(std::uint64_t seed) { return Rng::substream(seed, stream::init, 2).next(); }

namespace {

std::vector<TrainingExample> simulate_many(const ExampleSimulator& sim, std::uint64_t seed,
                                           std::uint64_t stream_id, const std::vector<std::uint64_t>& idx,
                                           int workers) {
  const int count = static_cast<int>(idx.size());
  std::vector<TrainingExample> out(count);
  const int w = std::max(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(w);
  auto work = [&](int id) {
    try {
      for (int k = id; k < count; k += w) {
        Rng r = Rng::substream(seed, stream_id, idx[k]);
        out[k] = sim(r);
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  if (w == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < w; ++id) pool.emplace_back(work, id);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<std::uint64_t> iota(long first, long count) {
  std::vector<std::uint64_t> v(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = static_cast<std::uint64_t>(first + k);
  return v;
}

// Simulation index for each position in the training stream. One epoch is plain online
// training; with more, position p maps into a pool of sims_budget indices whose order is
// reshuffled for every pass after the first.
class PoolOrder {
 public:
  PoolOrder(const TrainConfig& cfg, std::uint64_t seed) : pool_(cfg.epochs > 1 ? cfg.sims_budget : 0), seed_(seed) {}

  std::uint64_t operator()(long p) {
    if (pool_ == 0) return static_cast<std::uint64_t>(p);
    const long e = p / pool_, j = p % pool_;
    if (e == 0) return static_cast<std::uint64_t>(j);
    if (e != epoch_) {
      perm_ = iota(0, pool_);
      Rng rng = Rng::substream(seed_, stream::shuffle, static_cast<std::uint64_t>(e));
      for (std::size_t i = perm_.size() - 1; i > 0; --i) std::swap(perm_[i], perm_[rng.next() % (i + 1)]);
      epoch_ = e;
    }
    return perm_[static_cast<std::size_t>(j)];
  }

 private:
  long pool_;
  std::uint64_t seed_;
  long epoch_ = 0;
  std::vector<std::uint64_t> perm_;
};

Mat stack_theta(const std::vector<TrainingExample>& ex, std::size_t begin, std::size_t end) {
  Mat theta(ex[begin].theta.size(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) theta.col(static_cast<Eigen::Index>(k - begin)) = ex[k].theta;
  return theta;
}

std::vector<const Mat*> inputs_of(const std::vector<TrainingExample>& ex, std::size_t begin,
                                  std::size_t end) {
  std::vector<const Mat*> out;
  for (std::size_t k = begin; k < end; ++k) out.push_back(&ex[k].input);
  return out;
}

double heldout_loss(const Estimator& est, const std::vector<TrainingExample>& ex) {
  constexpr std::size_t chunk = 64;
  double total = 0.0;
  for (std::size_t b = 0; b < ex.size(); b += chunk) {
    const std::size_t e = std::min(ex.size(), b + chunk);
    total += est.loss(inputs_of(ex, b, e), stack_theta(ex, b, e)) * static_cast<double>(e - b);
  }
  return total / static_cast<double>(ex.size());
}

nlohmann::json log_to_json(const std::vector<TrainLogEntry>& log) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : log) rows.push_back({e.batch, num(e.train_loss), num(e.heldout_loss)});
  return rows;
}

}  // namespace

TrainResult train_estimator(Estimator est, const ExampleSimulator& simulate, const TrainConfig& cfg,
                            std::uint64_t seed, const TrainObserver& observer) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const auto heldout = simulate_many(simulate, seed, stream::heldout, iota(0, cfg.heldout_size), cfg.workers);
  est.summary.fit_scaling(inputs_of(heldout, 0, heldout.size()));

  TrainResult res;
  nn::ParamList ps = est.params();
  nn::Adam opt(ps, nn::AdamConfig{0.9, 0.999, 1e-7, cfg.clip_norm});
  std::vector<Mat> best;
  auto snapshot = [&] {
    best.clear();
    for (const nn::Param* p : ps) best.push_back(p->value);
  };
  auto restore = [&] {
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = best[k];
  };

  res.initial_heldout = heldout_loss(est, heldout);
  res.best_heldout = res.initial_heldout;
  double reference = res.initial_heldout;
  int stale = 0;
  snapshot();
  res.log.push_back({0, nan, res.initial_heldout, elapsed_ms()});
  if (observer) observer(res.log.back());

  const long total = cfg.batches();
  const auto m = static_cast<std::size_t>(cfg.batch_size);
  PoolOrder order(cfg, seed);
  for (long b = 1; b <= total; ++b) {
    TrainLogEntry entry{b, nan, nan, 0.0};
    try {
      std::vector<std::uint64_t> idx(m);
      for (std::size_t k = 0; k < m; ++k) idx[k] = order((b - 1) * cfg.batch_size + static_cast<long>(k));
      const auto batch = simulate_many(simulate, seed, stream::train_batch, idx, cfg.workers);
      nn::zero_grads(ps);
      entry.train_loss = est.loss_and_grad(inputs_of(batch, 0, m), stack_theta(batch, 0, m));
      if (!std::isfinite(entry.train_loss)) throw NumericError("non-finite training loss");
      double lr = cfg.learning_rate;
      if (cfg.cosine_decay)
        lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(b - 1) / static_cast<double>(total)));
      opt.step(lr);
    } catch (const NumericError& e) {
      restore();
      res.failure = "training diverged at batch " + std::to_string(b) + ": " + e.what();
      est.extra["failure"] = res.failure;
      break;
    }
    res.batches_run = b;
    const bool evaluate = b % cfg.eval_every == 0 || b == total;
    bool stop = false;
    if (evaluate) {
      entry.heldout_loss = heldout_loss(est, heldout);
      if (entry.heldout_loss < res.best_heldout) {
        res.best_heldout = entry.heldout_loss;
        res.best_batch = b;
        snapshot();
      }
      if (entry.heldout_loss < reference - cfg.min_delta) {
        reference = entry.heldout_loss;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        stop = true;
      }
    }
    entry.wall_ms = elapsed_ms();
    res.log.push_back(entry);
    if (observer) observer(entry);
    if (stop) {
      res.early_stopped = true;
      break;
    }
  }
  restore();
  est.extra["training_log"] = log_to_json(res.log);
  est.extra["initial_heldout_loss"] = res.initial_heldout;
  est.extra["best_heldout_loss"] = res.best_heldout;
  est.extra["best_batch"] = res.best_batch;
  est.extra["batches_run"] = res.batches_run;
  est.extra["early_stopped"] = res.early_stopped;
  est.extra["train"] = {{"batch_size", cfg.batch_size},
                        {"epochs", cfg.epochs},
                        {"learning_rate", cfg.learning_rate},
                        {"clip_norm", cfg.clip_norm},
                        {"n", cfg.n},
                        {"censor_level", cfg.censor_level},
                        {"heldout_size", cfg.heldout_size},
                        {"seed", cfg.seed}};
  res.estimator = std::move(est);
  return res;
}

ExampleSimulator ralpha_simulator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg) {
  const FactorVariant variant = FactorVariant::from_name(cfg.variant);
  const CovariateModel cov = CovariateModel::from_name(cfg.covmodel);
  const ParameterLayout layout(variant, cov);
  const int n = cfg.n;
  const double level = cfg.censor_level;
  return [=](Rng& rng) {
    const ParameterVector th = sample_prior(prior, variant, cov, rng);
    Rng sim = rng.split();
    const Mat panel = simulate_panel(sites, cov, variant, th, n, sim);
    const CensoredPanel cp = censor(panel, empirical_threshold(panel, level));
    return TrainingExample{assemble_ralpha_input(cp, layout.x_block(th), variant), th.gamma};
  };
}

ExampleSimulator rx_simulator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg) {
  const FactorVariant variant = FactorVariant::from_name(cfg.variant);
  const ParameterLayout layout(variant, CovariateModel::from_name(cfg.covmodel));
  const auto [d1, d2] = cfg.grid(sites.size());
  const int n = cfg.n;
  const double level = cfg.censor_level;
  return [=](Rng& rng) {
    const ParameterVector th = sample_prior_x(prior, variant, rng);
    Rng sim = rng.split();
    const Mat f = simulate_factors(sites, variant, th, n, sim);
    const CensoredPanel cp = censor(f, empirical_threshold(f, level));
    return TrainingExample{assemble_rx_input(cp.values, d1, d2).flatten(), layout.x_block(th)};
  };
}

Estimator make_ralpha_estimator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg,
                                std::uint64_t seed) {
  const FactorVariant variant = FactorVariant::from_name(cfg.variant);
  const CovariateModel cov = CovariateModel::from_name(cfg.covmodel);
  const ParameterLayout layout(variant, cov);
  const auto [n_lstm, n_dense] = cfg.capacity();
  std::vector<SupportTransform> ts(layout.n_alpha(), SupportTransform::from_prior(prior.gamma));
  Estimator e(SummaryArch::ralpha(sites.size(), layout.n_x(), n_lstm, n_dense), cfg.flow, ts,
              layout.alpha_names(), seed);
  e.role = "ralpha";
  e.variant = variant.name;
  e.covmodel = cov.name;
  e.extra["hyper_columns"] = ralpha_hyper_names(variant);
  e.extra["site_ids"] = sites.ids;
  return e;
}

Estimator make_rx_estimator(const SiteSet& sites, const PriorSpec& prior, const TrainConfig& cfg,
                            std::uint64_t seed) {
  const FactorVariant variant = FactorVariant::from_name(cfg.variant);
  const CovariateModel cov = CovariateModel::from_name(cfg.covmodel);
  const ParameterLayout layout(variant, cov);
  const auto [n_lstm, n_dense] = cfg.capacity();
  const auto [d1, d2] = cfg.grid(sites.size());
  std::vector<SupportTransform> ts;
  for (const Prior& p : layout.x_priors(prior)) ts.push_back(SupportTransform::from_prior(p));
  Estimator e(SummaryArch::rx(d1, d2, n_lstm, n_dense), cfg.flow, ts, layout.x_names(), seed);
  e.role = "rx";
  e.variant = variant.name;
  e.covmodel = cov.name;
  e.extra["site_ids"] = sites.ids;
  return e;
}

TrainResult train_ralpha(const TrainConfig& cfg, const SiteSet& sites, const PriorSpec& prior,
                         const TrainObserver& observer) {
  cfg.validate();
  prior.validate();
  const std::uint64_t seed = ralpha_seed(cfg.seed);
  return train_estimator(make_ralpha_estimator(sites, prior, cfg, seed),
                         ralpha_simulator(sites, prior, cfg), cfg, seed, observer);
}

TrainResult train_rx(const TrainConfig& cfg, const SiteSet& sites, const PriorSpec& prior,
                     const TrainObserver& observer) {
  cfg.validate();
  prior.validate();
  const std::uint64_t seed = rx_seed(cfg.seed);
  return train_estimator(make_rx_estimator(sites, prior, cfg, seed), rx_simulator(sites, prior, cfg),
                         cfg, seed, observer);
}

RecoveryResult validate_recovery(const Estimator& est_alpha, const Estimator& est_x,
                                 const SiteSet& sites, const PriorSpec& prior,
                                 const TrainConfig& cfg, int replicates, int draws, Rng& rng) {
  const FactorVariant variant = FactorVariant::from_name(cfg.variant);
  const CovariateModel cov = CovariateModel::from_name(cfg.covmodel);
  const ParameterLayout layout(variant, cov);
  const int na = layout.n_alpha(), nx = layout.n_x();
  const auto [d1, d2] = cfg.grid(sites.size());
  RecoveryResult out;
  out.names = layout.names();
  out.truths.resize(replicates, na + nx);
  out.means.resize(replicates, na + nx);
  for (int r = 0; r < replicates; ++r) {
    Rng rr = rng.split();
    const ParameterVector th = sample_prior(prior, variant, cov, rr);
    Rng sim = rr.split();
    const Mat panel = simulate_panel(sites, cov, variant, th, cfg.n, sim);
    const CensoredPanel cp = censor(panel, empirical_threshold(panel, cfg.censor_level));
    const Vec tx = layout.x_block(th);
    const Mat ga = est_alpha.sample(assemble_ralpha_input(cp, tx, variant), draws, rr);
    const Mat ratio = latent_ratio(cp, alpha(sites, cov, th.gamma));
    const Mat gx = est_x.sample(assemble_rx_input(ratio, d1, d2).flatten(), draws, rr);
    out.truths.row(r) = layout.flatten(th).transpose();
    out.means.row(r).head(na) = ga.rowwise().mean().transpose();
    out.means.row(r).tail(nx) = gx.rowwise().mean().transpose();
  }
  out.r2.resize(na + nx);
  for (int k = 0; k < na + nx; ++k) out.r2(k) = r_squared(out.means.col(k), out.truths.col(k));
  return out;
}

void write_training_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write training log " + path);
  out << "batch_index,train_loss,heldout_loss,wall_ms\n";
  char buf[128];
  auto fmt = [&](double v) -> std::string {
    if (!std::isfinite(v)) return "";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const auto& e : log) {
    out << e.batch << ',' << fmt(e.train_loss) << ',' << fmt(e.heldout_loss) << ',';
    std::snprintf(buf, sizeof buf, "%.3f", e.wall_ms);
    out << buf << '\n';
  }
  if (!out) throw IoError("failed writing training log " + path);
}

}  // namespace stpot
