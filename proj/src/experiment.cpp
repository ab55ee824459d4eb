#include "stpot/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stpot/errors.hpp"
#include "stpot/trainer.hpp"

namespace stpot {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_hash(const std::string& bytes) {
  const std::string head = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw IoError("cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

ParameterLayout layout_of(const ExperimentConfig& cfg) {
  return ParameterLayout(FactorVariant::from_name(cfg.variant), CovariateModel::from_name(cfg.covmodel));
}

std::vector<int> indices_of(const SiteSet& all, const std::vector<std::string>& ids) {
  std::vector<int> rows;
  for (const auto& id : ids) {
    const auto it = std::find(all.ids.begin(), all.ids.end(), id);
    if (it == all.ids.end()) throw ConfigError("split names unknown site '" + id + "'");
    rows.push_back(static_cast<int>(it - all.ids.begin()));
  }
  return rows;
}

void append(StageFiles& to, const StageFiles& from) {
  to.deterministic.insert(to.deterministic.end(), from.deterministic.begin(), from.deterministic.end());
  to.timing.insert(to.timing.end(), from.timing.begin(), from.timing.end());
}

Mat pooled_draws(const std::vector<PosteriorChain>& chains) {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.kept().rows();
  Mat out(rows, chains.front().draws.cols());
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    const Mat k = c.kept();
    out.middleRows(at, k.rows()) = k;
    at += k.rows();
  }
  return out;
}

}  // namespace

std::string git_blob_hash_file(const std::string& path) { return git_blob_hash(read_file(path)); }

// ---- data -------------------------------------------------------------------

Dataset prepare_data(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.simulated()) {
    const auto& s = cfg.simulation;
    const ParameterLayout layout = layout_of(cfg);
    data.all_sites = sim_study_sites(s.d1, s.d2, s.data_seed);
    Vec truth(layout.size());
    const auto names = layout.names();
    for (std::size_t k = 0; k < names.size(); ++k) truth(static_cast<Eigen::Index>(k)) = s.truth.at(names[k]);
    const ParameterVector th = layout.unflatten(truth);
    Rng rng = Rng::substream(s.data_seed, stream::observed, 1);
    data.all_observed.values =
        simulate_panel(data.all_sites, layout.covmodel(), layout.variant(), th, s.n, rng);
    data.all_observed.dates = season_dates(s.start_date, cfg.months, s.n);
    data.truth = truth;
  } else {
    data.all_sites = load_sites(cfg.sites_file);
    data.all_observed = load_observations(cfg.observations_file, data.all_sites, cfg.months);
  }

  const auto& sp = cfg.split;
  const std::vector<std::string> train_ids = sp.train_sites.empty() ? data.all_sites.ids : sp.train_sites;
  data.sites = data.all_sites.subset(indices_of(data.all_sites, train_ids));
  const ObservationTable train =
      select_dates(select_sites(data.all_observed, data.all_sites, train_ids), sp.train_start, sp.train_end);
  data.observed = train.values;
  data.dates = train.dates;
  if (sp.has_test()) {
    const std::vector<std::string> test_ids = sp.test_sites.empty() ? train_ids : sp.test_sites;
    data.test_sites = data.all_sites.subset(indices_of(data.all_sites, test_ids));
    const ObservationTable test =
        select_dates(select_sites(data.all_observed, data.all_sites, test_ids), sp.test_start, sp.test_end);
    data.test_observed = test.values;
    data.test_dates = test.dates;
  }
  if (data.observed.rows() < 2) throw DataError("training window has fewer than two days");
  return data;
}

void write_dataset(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir) {
  fs::create_directories(dir);
  write_sites(join(dir, "sites.csv"), data.all_sites);
  write_observations(join(dir, "observations.csv"), data.all_observed, data.all_sites.ids);
  if (data.truth) {
    const auto names = layout_of(cfg).names();
    json t = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) t[names[k]] = (*data.truth)(static_cast<Eigen::Index>(k));
    write_json(join(dir, "truth.json"), t);
  }
}

// ---- stages -----------------------------------------------------------------

StageFiles train_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir) {
  fs::create_directories(dir);
  const PriorSpec prior = PriorSpec::defaults(data.sites.delta);
  const TrainConfig tc = cfg.train_config(static_cast<int>(data.observed.rows()));
  StageFiles files;
  std::string failure;
  for (const char* role : {"ralpha", "rx"}) {
    const bool is_alpha = std::string(role) == "ralpha";
    const TrainResult r = is_alpha ? train_ralpha(tc, data.sites, prior) : train_rx(tc, data.sites, prior);
    const std::string ckpt = std::string(role) + ".ckpt";
    const std::string log = std::string("train_log_") + role + ".csv";
    r.estimator.save(join(dir, ckpt));
    write_training_log(join(dir, log), r.log);
    files.deterministic.push_back(ckpt);
    files.timing.push_back(log);
    if (!r.failure.empty()) {
      failure = std::string(role) + ": " + r.failure;
      break;
    }
  }
  if (!failure.empty()) throw NumericError(failure);
  return files;
}

StageFiles gibbs_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir) {
  const std::string pa = join(dir, "ralpha.ckpt"), px = join(dir, "rx.ckpt");
  const Estimator ea = Estimator::load(pa);
  const Estimator ex = Estimator::load(px);
  const std::vector<std::string> hashes = {git_blob_hash_file(pa), git_blob_hash_file(px)};
  const ParameterLayout layout = layout_of(cfg);
  const PriorSpec prior = PriorSpec::defaults(data.sites.delta);
  const CensoredPanel cp = censor(data.observed, empirical_threshold(data.observed, cfg.censor_level));

  StageFiles files;
  json timing = json::object();
  for (int c = 0; c < cfg.gibbs.chains; ++c) {
    Rng init = Rng::substream(cfg.seed, stream::init, 100 + static_cast<std::uint64_t>(c));
    const Vec x0 = initialize(prior, layout.variant(), init);
    Rng rng = Rng::substream(cfg.seed, stream::gibbs, static_cast<std::uint64_t>(c));
    PosteriorChain chain = gibbs_run(ea, ex, data.sites, cp, x0, cfg.gibbs.n_iter, rng);
    chain.seed = cfg.seed;
    chain.chain_id = c;
    chain.burn_in = cfg.gibbs.effective_burn_in();
    chain.checkpoint_hashes = hashes;
    const std::string stem = "chain_" + std::to_string(c);
    write_chain_csv(join(dir, stem + ".csv"), chain);
    write_json(join(dir, stem + ".json"), chain.meta());
    files.deterministic.push_back(stem + ".csv");
    files.deterministic.push_back(stem + ".json");
    timing[stem] = {{"wall_minutes", chain.wall_minutes}};
  }
  write_json(join(dir, "gibbs_timing.json"), timing);
  files.timing.push_back("gibbs_timing.json");
  return files;
}

StageFiles diagnose_stage(const ExperimentConfig& cfg, const Dataset& data, const std::string& dir) {
  const ParameterLayout layout = layout_of(cfg);
  const auto names = layout.names();
  std::vector<PosteriorChain> chains;
  double wall = 0.0;
  const std::string tpath = join(dir, "gibbs_timing.json");
  json timing_in = fs::exists(tpath) ? json::parse(read_file(tpath)) : json::object();
  for (int c = 0; c < cfg.gibbs.chains; ++c) {
    const std::string stem = "chain_" + std::to_string(c);
    PosteriorChain ch = read_chain_csv(join(dir, stem + ".csv"));
    if (ch.names != names) throw DataError(stem + ".csv columns do not match " + cfg.variant + "-" + cfg.covmodel);
    ch.burn_in = std::min(cfg.gibbs.effective_burn_in(), ch.n_iter());
    if (timing_in.contains(stem)) wall += timing_in[stem].value("wall_minutes", 0.0);
    chains.push_back(std::move(ch));
  }
  const Mat draws = pooled_draws(chains);
  if (draws.rows() < 4) throw DataError("fewer than four post-burn-in draws; nothing to diagnose");

  MetricReport report = summarize_draws(draws, names, wall, data.truth);
  report.c_u = cfg.diagnostics.c_u;
  const auto& dg = cfg.diagnostics;
  StageFiles files;

  // posterior predictive quantile errors
  std::ostringstream by_site;
  by_site << "split,site_id,mqae,mqse\n";
  auto errors_for = [&](const char* split, const SiteSet& sites, const Mat& obs, std::uint64_t idx) {
    Rng rng = Rng::substream(cfg.seed, stream::diagnostics, idx);
    const auto panels = posterior_predictive(sites, layout, draws, static_cast<int>(obs.rows()), dg.predictive_panels, rng);
    const QuantileErrors qe = quantile_errors(obs, panels, dg.c_u);
    for (int j = 0; j < sites.size(); ++j)
      by_site << split << ',' << sites.ids[j] << ',' << fmt(qe.site_mqae(j)) << ',' << fmt(qe.site_mqse(j)) << '\n';
    return qe;
  };
  const QuantileErrors tr = errors_for("train", data.sites, data.observed, 1);
  report.mqae_train = tr.mqae;
  report.mqse_train = tr.mqse;
  if (data.test_sites) {
    const QuantileErrors te = errors_for("test", *data.test_sites, data.test_observed, 2);
    report.mqae_test = te.mqae;
    report.mqse_test = te.mqse;
  }
  write_text(join(dir, "mqae_by_site.csv"), by_site.str());
  files.deterministic.push_back("mqae_by_site.csv");

  // QQ tables at the posterior mean
  const Vec mean = draws.colwise().mean().transpose();
  const ParameterVector th_mean = layout.unflatten(mean);
  std::vector<double> probs;
  for (int c = dg.c_u; c <= 99; ++c) probs.push_back(c / 100.0);
  std::ostringstream qq;
  qq << "split,site_id,prob,observed,fitted,lower,upper\n";
  auto qq_for = [&](const char* split, const SiteSet& sites, const Mat& obs, std::uint64_t idx) {
    Rng rng = Rng::substream(cfg.seed, stream::diagnostics, idx);
    const auto t = qq_data(obs, sites, layout, th_mean, probs, dg.qq_replicates, rng);
    for (int j = 0; j < sites.size(); ++j)
      for (const QqRow& r : t[j])
        qq << split << ',' << sites.ids[j] << ',' << fmt(r.prob) << ',' << fmt(r.observed) << ',' << fmt(r.fitted)
           << ',' << fmt(r.lower) << ',' << fmt(r.upper) << '\n';
  };
  qq_for("train", data.sites, data.observed, 3);
  if (data.test_sites) qq_for("test", *data.test_sites, data.test_observed, 4);
  write_text(join(dir, "qq.csv"), qq.str());
  files.deterministic.push_back("qq.csv");

  // return levels
  const long length = dg.return_level_length > 0 ? dg.return_level_length
                                                 : return_level_min_length(dg.return_periods, cfg.season_days);
  std::ostringstream rl;
  rl << "split,site_id,period_years,median,lower,upper\n";
  auto rl_for = [&](const char* split, const SiteSet& sites, std::uint64_t idx) {
    Rng rng = Rng::substream(cfg.seed, stream::diagnostics, idx);
    const ReturnLevelTable t = return_levels(sites, layout, draws, dg.return_periods, cfg.season_days,
                                             static_cast<int>(length), dg.return_level_draws, rng);
    for (int j = 0; j < sites.size(); ++j)
      for (std::size_t p = 0; p < t.periods.size(); ++p)
        rl << split << ',' << sites.ids[j] << ',' << fmt(t.periods[p]) << ',' << fmt(t.median(j, p)) << ','
           << fmt(t.lower(j, p)) << ',' << fmt(t.upper(j, p)) << '\n';
  };
  rl_for("train", data.sites, 5);
  if (data.test_sites) rl_for("test", *data.test_sites, 6);
  write_text(join(dir, "return_levels.csv"), rl.str());
  files.deterministic.push_back("return_levels.csv");

  // amortized recovery over prior draws (simulated experiments)
  if (dg.recovery_replicates > 0) {
    const Estimator ea = Estimator::load(join(dir, "ralpha.ckpt"));
    const Estimator ex = Estimator::load(join(dir, "rx.ckpt"));
    Rng rng = Rng::substream(cfg.seed, stream::recovery, 0);
    const RecoveryResult rr =
        validate_recovery(ea, ex, data.sites, PriorSpec::defaults(data.sites.delta),
                          cfg.train_config(static_cast<int>(data.observed.rows())), dg.recovery_replicates,
                          dg.recovery_draws, rng);
    report.r2 = std::vector<double>(rr.r2.data(), rr.r2.data() + rr.r2.size());
    std::ostringstream rec;
    rec << "replicate";
    for (const auto& n : rr.names) rec << ",true_" << n << ",mean_" << n;
    rec << '\n';
    for (Eigen::Index r = 0; r < rr.truths.rows(); ++r) {
      rec << r;
      for (Eigen::Index k = 0; k < rr.truths.cols(); ++k) rec << ',' << fmt(rr.truths(r, k)) << ',' << fmt(rr.means(r, k));
      rec << '\n';
    }
    write_text(join(dir, "recovery.csv"), rec.str());
    files.deterministic.push_back("recovery.csv");
  }

  json rep = report.to_json(false);
  rep["name"] = cfg.name;
  rep["variant"] = cfg.variant;
  rep["covmodel"] = cfg.covmodel;
  rep["d_train"] = data.sites.size();
  rep["n_train"] = data.observed.rows();
  rep["d_test"] = data.test_sites ? data.test_sites->size() : 0;
  rep["n_test"] = data.test_sites ? data.test_observed.rows() : 0;
  rep["split"] = cfg.to_json()["split"];
  rep["chains"] = cfg.gibbs.chains;
  rep["burn_in"] = cfg.gibbs.effective_burn_in();
  write_json(join(dir, "report.json"), rep);
  files.deterministic.push_back("report.json");

  json tj = {{"gibbs_wall_minutes", wall}, {"ess_per_min", json::object()}};
  for (const auto& p : report.parameters) tj["ess_per_min"][p.name] = p.ess_per_min;
  write_json(join(dir, "timing.json"), tj);
  files.timing.push_back("timing.json");
  return files;
}

// ---- runner -----------------------------------------------------------------

void write_manifest(const ExperimentConfig& cfg, const std::string& dir, const StageFiles& files,
                    const std::string& status, const std::string& failed_stage, const std::string& message) {
  std::map<std::string, bool> all;
  for (const auto& f : files.deterministic) all[f] = true;
  for (const auto& f : files.timing) all[f] = false;
  json list = json::array();
  for (const auto& [path, det] : all) {
    const std::string full = join(dir, path);
    if (!fs::exists(full)) continue;
    const std::string bytes = read_file(full);
    list.push_back({{"path", path}, {"sha1", git_blob_hash(bytes)}, {"bytes", bytes.size()}, {"deterministic", det}});
  }
  json m = {{"config", cfg.to_json()}, {"status", status}, {"files", list}};
  if (!failed_stage.empty()) m["failed_stage"] = failed_stage;
  if (!message.empty()) m["error"] = message;
  write_json(join(dir, "manifest.json"), m);
}

StageFiles scan_outputs(const std::string& dir) {
  StageFiles files;
  std::vector<std::string> all;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) all.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(all.begin(), all.end());
  for (const auto& name : all) {
    if (name == "manifest.json") continue;
    const std::string base = fs::path(name).filename().string();
    const bool timed = base.rfind("train_log_", 0) == 0 || base.find("timing") != std::string::npos;
    (timed ? files.timing : files.deterministic).push_back(name);
  }
  return files;
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage) {
  if (stage != "simulate" && stage != "train" && stage != "gibbs" && stage != "diagnose")
    throw ConfigError("unknown stage '" + stage + "'");
  cfg.validate();
  const std::string dir = cfg.output_dir;
  fs::create_directories(dir);
  cfg.save(join(dir, "config.json"));
  std::string current = "data";
  try {
    const Dataset data = prepare_data(cfg);
    current = stage;
    if (stage == "simulate")
      write_dataset(cfg, data, join(dir, "data"));
    else if (stage == "train")
      train_stage(cfg, data, dir);
    else if (stage == "gibbs")
      gibbs_stage(cfg, data, dir);
    else
      diagnose_stage(cfg, data, dir);
  } catch (const std::exception& e) {
    write_manifest(cfg, dir, scan_outputs(dir), "error", current, e.what());
    throw;
  }
  write_manifest(cfg, dir, scan_outputs(dir), "ok");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string dir = cfg.output_dir;
  fs::create_directories(dir);
  ExperimentResult res;
  res.output_dir = dir;
  cfg.save(join(dir, "config.json"));
  res.files.deterministic.push_back("config.json");

  std::string stage = "data";
  try {
    const Dataset data = prepare_data(cfg);
    if (cfg.simulated()) {
      write_dataset(cfg, data, join(dir, "data"));
      for (const char* f : {"data/sites.csv", "data/observations.csv", "data/truth.json"}) res.files.deterministic.push_back(f);
    }
    stage = "train";
    append(res.files, train_stage(cfg, data, dir));
    stage = "gibbs";
    append(res.files, gibbs_stage(cfg, data, dir));
    stage = "diagnose";
    append(res.files, diagnose_stage(cfg, data, dir));
  } catch (const std::exception& e) {
    // whatever the failing stage managed to write is still listed
    res.files = scan_outputs(dir);
    write_manifest(cfg, dir, res.files, "error", stage, e.what());
    throw;
  }
  res.files = scan_outputs(dir);
  write_manifest(cfg, dir, res.files, "ok");
  res.report = json::parse(read_file(join(dir, "report.json")));
  return res;
}

// ---- comparison ---------------------------------------------------------------

std::vector<RankingRow> compare_models(const std::vector<std::string>& dirs, const std::string& criterion,
                                       const std::string& split) {
  if (dirs.size() < 2) throw ConfigError("compare needs at least two result directories");
  if (criterion != "MQAE" && criterion != "MQSE") throw ConfigError("criterion must be MQAE or MQSE");
  if (split != "train" && split != "test") throw ConfigError("split must be train or test");
  std::vector<RankingRow> rows;
  std::optional<json> split_def;
  for (const auto& d : dirs) {
    const std::string path = join(d, "report.json");
    if (!fs::exists(path)) throw DataError("no report.json in " + d);
    json rep;
    try {
      rep = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw DataError(path + " is not valid JSON: " + e.what());
    }
    const std::string ka = "mqae_" + split, ks = "mqse_" + split;
    if (!rep.contains(ka) || !rep.contains(ks))
      throw ConfigError(d + " has no " + split + " metrics; the result directories use mismatched splits");
    const json sd = rep.value("split", json::object());
    if (split_def && *split_def != sd) throw ConfigError(d + " was evaluated on a different train/test split");
    split_def = sd;
    RankingRow r;
    r.name = rep.value("variant", std::string("?")) + "-" + rep.value("covmodel", std::string("?"));
    r.dir = d;
    r.mqae = rep[ka].get<double>();
    r.mqse = rep[ks].get<double>();
    rows.push_back(r);
  }
  const bool by_mqae = criterion == "MQAE";
  std::sort(rows.begin(), rows.end(), [&](const RankingRow& a, const RankingRow& b) {
    const double pa = by_mqae ? a.mqae : a.mqse, pb = by_mqae ? b.mqae : b.mqse;
    if (pa != pb) return pa < pb;
    const double sa = by_mqae ? a.mqse : a.mqae, sb = by_mqae ? b.mqse : b.mqae;
    if (sa != sb) return sa < sb;
    if (a.name != b.name) return a.name < b.name;
    return a.dir < b.dir;
  });
  return rows;
}

void write_ranking(const std::string& path, const std::vector<RankingRow>& rows) {
  std::ostringstream out;
  out << "rank,name,dir,mqae,mqse\n";
  for (std::size_t k = 0; k < rows.size(); ++k)
    out << k + 1 << ',' << rows[k].name << ',' << rows[k].dir << ',' << fmt(rows[k].mqae) << ',' << fmt(rows[k].mqse) << '\n';
  write_text(path, out.str());
}

}  // namespace stpot
