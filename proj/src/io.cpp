#include "stpot/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "stpot/diagnostics.hpp"
#include "stpot/errors.hpp"

namespace stpot {

namespace {

namespace chr = std::chrono;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(split_csv(line));
  }
  if (rows.empty()) throw DataError(path + " is empty");
  return rows;
}

double parse_number(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError("non-numeric value '" + cell + "' at " + where);
  }
}

chr::year_month_day parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || s[4] != '-' ||
      s[7] != '-')
    throw DataError("invalid date '" + s + "' (expected yyyy-mm-dd)");
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw DataError("invalid date '" + s + "'");
  return ymd;
}

std::string format_date(const chr::year_month_day& ymd) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_months(const std::vector<int>& months) {
  if (months.empty()) throw ConfigError("month filter is empty");
  std::set<int> seen;
  for (int m : months) {
    if (m < 1 || m > 12) throw ConfigError("month " + std::to_string(m) + " outside 1-12");
    if (!seen.insert(m).second) throw ConfigError("month " + std::to_string(m) + " listed twice");
  }
}

}  // namespace

// ---- data -------------------------------------------------------------------

SiteSet load_sites(const std::string& path) {
  const auto rows = read_csv(path);
  const auto& head = rows[0];
  if (head.size() < 4 || head[0] != "site_id" || head[1] != "lon" || head[2] != "lat" || head[3] != "alt")
    throw DataError(path + ": header must start with site_id,lon,lat,alt");
  const auto d = static_cast<Eigen::Index>(rows.size() - 1);
  if (d < 1) throw DataError(path + " has no sites");
  const auto p = static_cast<Eigen::Index>(head.size() - 1);
  std::vector<std::string> ids;
  std::set<std::string> seen;
  Mat raw(d, p);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& r = rows[i + 1];
    if (static_cast<Eigen::Index>(r.size()) != p + 1)
      throw DataError(path + " line " + std::to_string(i + 2) + " has " + std::to_string(r.size()) +
                      " cells, expected " + std::to_string(p + 1));
    if (r[0].empty()) throw DataError(path + " line " + std::to_string(i + 2) + ": empty site_id");
    if (!seen.insert(r[0]).second) throw DataError(path + ": duplicate site_id '" + r[0] + "'");
    ids.push_back(r[0]);
    for (Eigen::Index k = 0; k < p; ++k)
      raw(i, k) = parse_number(r[k + 1], path + " line " + std::to_string(i + 2) + " column " + head[k + 1]);
  }
  Mat z = raw;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double mean = raw.col(k).mean();
    const double sd = d > 1 ? std::sqrt((raw.col(k).array() - mean).square().sum() / static_cast<double>(d - 1)) : 0.0;
    if (sd > 0.0)
      z.col(k) = ((raw.col(k).array() - mean) / sd).matrix();
    else
      z.col(k).setZero();
  }
  return SiteSet::from_coordinates(std::move(ids), raw.leftCols(2), std::move(z));
}

void write_sites(const std::string& path, const SiteSet& sites) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "site_id,lon,lat,alt";
  for (Eigen::Index k = 3; k < sites.covariates.cols(); ++k) out << ",z" << k + 1;
  out << '\n';
  for (int i = 0; i < sites.size(); ++i) {
    out << sites.ids[i] << ',' << fmt(sites.coords(i, 0)) << ',' << fmt(sites.coords(i, 1)) << ','
        << fmt(sites.covariates.cols() > 2 ? sites.covariates(i, 2) : 0.0);
    for (Eigen::Index k = 3; k < sites.covariates.cols(); ++k) out << ',' << fmt(sites.covariates(i, k));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

ObservationTable load_observations(const std::string& path, const SiteSet& sites,
                                   const std::vector<int>& months) {
  check_months(months);
  const auto rows = read_csv(path);
  const auto& head = rows[0];
  if (head.empty() || head[0] != "date") throw DataError(path + ": first column must be 'date'");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t k = 1; k < head.size(); ++k)
    if (!column.emplace(head[k], k).second) throw DataError(path + ": duplicate column '" + head[k] + "'");
  std::vector<std::size_t> idx;
  for (const auto& id : sites.ids) {
    const auto it = column.find(id);
    if (it == column.end()) throw DataError(path + ": no column for site '" + id + "'");
    idx.push_back(it->second);
  }
  const std::set<int> keep(months.begin(), months.end());

  ObservationTable t;
  std::vector<std::size_t> kept_rows;
  std::string prev;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != head.size())
      throw DataError(path + " line " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " cells, expected " + std::to_string(head.size()));
    const auto ymd = parse_date(row[0]);
    if (!prev.empty() && row[0] <= prev)
      throw DataError(path + ": dates not strictly increasing at line " + std::to_string(r + 1));
    prev = row[0];
    if (keep.count(static_cast<int>(static_cast<unsigned>(ymd.month())))) {
      t.dates.push_back(row[0]);
      kept_rows.push_back(r);
    }
  }
  if (t.dates.empty()) throw DataError(path + ": no rows fall in the selected months");

  t.values.resize(static_cast<Eigen::Index>(kept_rows.size()), sites.size());
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < kept_rows.size(); ++i) {
    const auto& row = rows[kept_rows[i]];
    for (int j = 0; j < sites.size(); ++j) {
      const std::string& cell = row[idx[j]];
      if (cell.empty() || cell == "NA" || cell == "NaN") {
        missing.push_back(row[0] + "/" + sites.ids[j]);
        t.values(i, j) = 0.0;
        continue;
      }
      t.values(i, j) = parse_number(cell, path + " line " + std::to_string(kept_rows[i] + 1) + " site " + sites.ids[j]);
    }
  }
  if (!missing.empty()) {
    std::string msg = path + ": " + std::to_string(missing.size()) + " missing value(s) in the selected window:";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + missing[k];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return t;
}

void write_observations(const std::string& path, const ObservationTable& obs,
                        const std::vector<std::string>& site_ids) {
  if (static_cast<Eigen::Index>(site_ids.size()) != obs.values.cols() ||
      static_cast<Eigen::Index>(obs.dates.size()) != obs.values.rows())
    throw InvalidInput("observation table shape does not match its labels");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "date";
  for (const auto& id : site_ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index i = 0; i < obs.values.rows(); ++i) {
    out << obs.dates[i];
    for (Eigen::Index j = 0; j < obs.values.cols(); ++j) out << ',' << fmt(obs.values(i, j));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

ObservationTable select_dates(const ObservationTable& obs, const std::string& first, const std::string& last) {
  if (!first.empty()) parse_date(first);
  if (!last.empty()) parse_date(last);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < obs.dates.size(); ++i)
    if ((first.empty() || obs.dates[i] >= first) && (last.empty() || obs.dates[i] <= last))
      rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.empty()) throw DataError("no observations between '" + first + "' and '" + last + "'");
  ObservationTable out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), obs.values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.dates.push_back(obs.dates[rows[k]]);
    out.values.row(static_cast<Eigen::Index>(k)) = obs.values.row(rows[k]);
  }
  return out;
}

ObservationTable select_sites(const ObservationTable& obs, const SiteSet& all, const std::vector<std::string>& ids) {
  ObservationTable out;
  out.dates = obs.dates;
  out.values.resize(obs.values.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto it = std::find(all.ids.begin(), all.ids.end(), ids[k]);
    if (it == all.ids.end()) throw ConfigError("unknown site '" + ids[k] + "'");
    out.values.col(static_cast<Eigen::Index>(k)) = obs.values.col(it - all.ids.begin());
  }
  return out;
}

std::vector<std::string> season_dates(const std::string& first, const std::vector<int>& months, int n) {
  check_months(months);
  const std::set<int> keep(months.begin(), months.end());
  std::vector<std::string> out;
  chr::sys_days day{parse_date(first)};
  while (static_cast<int>(out.size()) < n) {
    const chr::year_month_day ymd{day};
    if (keep.count(static_cast<int>(static_cast<unsigned>(ymd.month())))) out.push_back(format_date(ymd));
    day += chr::days{1};
  }
  return out;
}

int season_length(const std::vector<int>& months) {
  static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  check_months(months);
  int total = 0;
  for (int m : months) total += days[m - 1];
  return total;
}

SiteSet sim_study_sites(int d1, int d2, std::uint64_t seed) {
  SiteSet g = unit_grid(d1, d2);
  Rng rng = Rng::substream(seed, stream::observed, 0);
  Mat z(g.size(), 3);
  z.leftCols(2) = g.covariates.leftCols(2);
  for (int i = 0; i < g.size(); ++i) z(i, 2) = rng.normal();
  return SiteSet::from_coordinates(g.ids, g.coords, std::move(z));
}

// ---- configuration --------------------------------------------------------

namespace {

using nlohmann::json;

// Reads keys from a JSON object, rejecting anything not consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + (where_.empty() ? k : where_ + "." + k) + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json train_to_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"max_batches", t.max_batches},
          {"sims_budget", t.sims_budget},
          {"epochs", t.epochs},
          {"eval_every", t.eval_every},
          {"patience", t.patience},
          {"min_delta", t.min_delta},
          {"heldout_size", t.heldout_size},
          {"scenario", t.scenario},
          {"n_lstm", t.n_lstm},
          {"n_dense", t.n_dense},
          {"d1", t.d1},
          {"d2", t.d2},
          {"learning_rate", t.learning_rate},
          {"clip_norm", t.clip_norm},
          {"cosine_decay", t.cosine_decay},
          {"workers", t.workers},
          {"flow", {{"blocks", t.flow.blocks}, {"hidden", t.flow.hidden}, {"layers", t.flow.layers}, {"clamp", t.flow.clamp}}}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  Reader r(j, "train");
  r.get("batch_size", t.batch_size);
  r.get("max_batches", t.max_batches);
  r.get("sims_budget", t.sims_budget);
  r.get("epochs", t.epochs);
  r.get("eval_every", t.eval_every);
  r.get("patience", t.patience);
  r.get("min_delta", t.min_delta);
  r.get("heldout_size", t.heldout_size);
  r.get("scenario", t.scenario);
  r.get("n_lstm", t.n_lstm);
  r.get("n_dense", t.n_dense);
  r.get("d1", t.d1);
  r.get("d2", t.d2);
  r.get("learning_rate", t.learning_rate);
  r.get("clip_norm", t.clip_norm);
  r.get("cosine_decay", t.cosine_decay);
  r.get("workers", t.workers);
  if (const json* f = r.child("flow")) {
    Reader fr(*f, "train.flow");
    fr.get("blocks", t.flow.blocks);
    fr.get("hidden", t.flow.hidden);
    fr.get("layers", t.flow.layers);
    fr.get("clamp", t.flow.clamp);
    fr.finish();
  }
  r.finish();
  return t;
}

}  // namespace

TrainConfig ExperimentConfig::train_config(int n) const {
  TrainConfig t = train;
  t.variant = variant;
  t.covmodel = covmodel;
  t.censor_level = censor_level;
  t.seed = seed;
  t.n = n;
  return t;
}

void ExperimentConfig::validate(bool check_files) const {
  const FactorVariant v = FactorVariant::from_name(variant);
  const CovariateModel m = CovariateModel::from_name(covmodel);
  if (!(censor_level > 0.0 && censor_level < 1.0)) throw ConfigError("censor_level must lie in (0, 1)");
  check_months(months);
  if (season_days != season_length(months))
    throw ConfigError("season_days = " + std::to_string(season_days) + " but the month filter covers " +
                      std::to_string(season_length(months)) + " days per year");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  if (sites_file.empty() != observations_file.empty())
    throw ConfigError("sites_file and observations_file must be given together");
  if (check_files && !simulated()) {
    for (const auto* f : {&sites_file, &observations_file})
      if (!std::filesystem::exists(*f)) throw ConfigError("data file not found: " + *f);
  }
  train_config(100).validate();
  if (gibbs.n_iter < 0) throw ConfigError("gibbs.n_iter must be non-negative");
  if (gibbs.chains < 1) throw ConfigError("gibbs.chains must be >= 1");
  if (gibbs.effective_burn_in() > gibbs.n_iter) throw ConfigError("gibbs.burn_in exceeds gibbs.n_iter");

  for (const auto* s : {&split.train_start, &split.train_end, &split.test_start, &split.test_end})
    if (!s->empty()) {
      try {
        parse_date(*s);
      } catch (const DataError& e) {
        throw ConfigError(std::string("split: ") + e.what());
      }
    }
  if (split.has_test()) {
    const std::string& a0 = split.train_start;
    const std::string& a1 = split.train_end;
    const std::string& b0 = split.test_start;
    const std::string& b1 = split.test_end;
    const bool overlap = (a1.empty() || b0.empty() || b0 <= a1) && (b1.empty() || a0.empty() || a0 <= b1);
    if (overlap) throw ConfigError("train and test date windows overlap");
  }
  if (!split.train_sites.empty() && !split.test_sites.empty()) {
    const std::set<std::string> tr(split.train_sites.begin(), split.train_sites.end());
    for (const auto& s : split.test_sites)
      if (tr.count(s)) throw ConfigError("site '" + s + "' is in both the train and test split");
  }
  for (const auto* ids : {&split.train_sites, &split.test_sites}) {
    const std::set<std::string> u(ids->begin(), ids->end());
    if (u.size() != ids->size()) throw ConfigError("split lists a site twice");
  }

  if (simulated()) {
    if (simulation.d1 < 1 || simulation.d2 < 1 || simulation.d1 * simulation.d2 < 2)
      throw ConfigError("simulation grid needs at least two sites");
    if (simulation.n < 2) throw ConfigError("simulation.n must be >= 2");
    if (m.max_column() > 2) throw ConfigError("simulated sites carry three covariates");
    const ParameterLayout layout(v, m);
    for (const auto& name : layout.names())
      if (!simulation.truth.count(name)) throw ConfigError("simulation.truth is missing '" + name + "'");
    for (const auto& [k, val] : simulation.truth) {
      const auto names = layout.names();
      if (std::find(names.begin(), names.end(), k) == names.end())
        throw ConfigError("simulation.truth has '" + k + "', not a parameter of " + variant + "-" + covmodel);
    }
    parse_date(simulation.start_date);
  }
  if (diagnostics.c_u < 0 || diagnostics.c_u >= 99) throw ConfigError("diagnostics.c_u must lie in [0, 99)");
  if (diagnostics.predictive_panels < 1 || diagnostics.qq_replicates < 1 || diagnostics.return_level_draws < 1)
    throw ConfigError("diagnostic counts must be positive");
  for (double t : diagnostics.return_periods)
    if (!(t >= 1.0)) throw ConfigError("return periods must be >= 1 year");
  if (diagnostics.return_level_length != 0 &&
      diagnostics.return_level_length < return_level_min_length(diagnostics.return_periods, season_days))
    throw ConfigError("diagnostics.return_level_length is below the minimum " +
                      std::to_string(return_level_min_length(diagnostics.return_periods, season_days)));
  if (diagnostics.recovery_replicates < 0 || diagnostics.recovery_draws < 1)
    throw ConfigError("invalid recovery settings");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"name", name},
          {"sites_file", sites_file},
          {"observations_file", observations_file},
          {"variant", variant},
          {"covmodel", covmodel},
          {"censor_level", censor_level},
          {"months", months},
          {"season_days", season_days},
          {"seed", seed},
          {"output_dir", output_dir},
          {"train", train_to_json(train)},
          {"gibbs", {{"n_iter", gibbs.n_iter}, {"burn_in", gibbs.burn_in}, {"chains", gibbs.chains}}},
          {"split",
           {{"train_sites", split.train_sites},
            {"test_sites", split.test_sites},
            {"train_start", split.train_start},
            {"train_end", split.train_end},
            {"test_start", split.test_start},
            {"test_end", split.test_end}}},
          {"simulation",
           {{"d1", simulation.d1},
            {"d2", simulation.d2},
            {"n", simulation.n},
            {"truth", simulation.truth},
            {"data_seed", simulation.data_seed},
            {"start_date", simulation.start_date}}},
          {"diagnostics",
           {{"c_u", diagnostics.c_u},
            {"predictive_panels", diagnostics.predictive_panels},
            {"qq_replicates", diagnostics.qq_replicates},
            {"return_periods", diagnostics.return_periods},
            {"return_level_draws", diagnostics.return_level_draws},
            {"return_level_length", diagnostics.return_level_length},
            {"recovery_replicates", diagnostics.recovery_replicates},
            {"recovery_draws", diagnostics.recovery_draws}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("name", c.name);
  r.get("sites_file", c.sites_file);
  r.get("observations_file", c.observations_file);
  r.get("variant", c.variant);
  r.get("covmodel", c.covmodel);
  r.get("censor_level", c.censor_level);
  r.get("months", c.months);
  r.get("season_days", c.season_days);
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (const json* t = r.child("train")) c.train = train_from_json(*t);
  if (const json* g = r.child("gibbs")) {
    Reader gr(*g, "gibbs");
    gr.get("n_iter", c.gibbs.n_iter);
    gr.get("burn_in", c.gibbs.burn_in);
    gr.get("chains", c.gibbs.chains);
    gr.finish();
  }
  if (const json* s = r.child("split")) {
    Reader sr(*s, "split");
    sr.get("train_sites", c.split.train_sites);
    sr.get("test_sites", c.split.test_sites);
    sr.get("train_start", c.split.train_start);
    sr.get("train_end", c.split.train_end);
    sr.get("test_start", c.split.test_start);
    sr.get("test_end", c.split.test_end);
    sr.finish();
  }
  if (const json* s = r.child("simulation")) {
    Reader sr(*s, "simulation");
    sr.get("d1", c.simulation.d1);
    sr.get("d2", c.simulation.d2);
    sr.get("n", c.simulation.n);
    sr.get("truth", c.simulation.truth);
    sr.get("data_seed", c.simulation.data_seed);
    sr.get("start_date", c.simulation.start_date);
    sr.finish();
  }
  if (const json* s = r.child("diagnostics")) {
    Reader dr(*s, "diagnostics");
    dr.get("c_u", c.diagnostics.c_u);
    dr.get("predictive_panels", c.diagnostics.predictive_panels);
    dr.get("qq_replicates", c.diagnostics.qq_replicates);
    dr.get("return_periods", c.diagnostics.return_periods);
    dr.get("return_level_draws", c.diagnostics.return_level_draws);
    dr.get("return_level_length", c.diagnostics.return_level_length);
    dr.get("recovery_replicates", c.diagnostics.recovery_replicates);
    dr.get("recovery_draws", c.diagnostics.recovery_draws);
    dr.finish();
  }
  r.finish();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

std::vector<std::string> ExperimentConfig::preset_names() { return {"smoke", "sim-study", "guanacaste-d4m5"}; }

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig c;
  const std::map<std::string, double> sim_truth = {{"gamma0", std::exp(1.0)}, {"gamma1", 1.0}, {"gamma2", 1.0},
                                                   {"gamma3", 1.0},         {"phi", 0.7},    {"sigma", 1.0},
                                                   {"beta3", 5.0},          {"rho", 0.5}};
  if (name == "smoke") {
    c.name = "smoke";
    c.output_dir = "out/smoke";
    c.simulation.d1 = c.simulation.d2 = 4;
    c.simulation.n = 50;
    c.simulation.truth = sim_truth;
    c.train.sims_budget = 4096;
    c.train.heldout_size = 256;
    c.train.eval_every = 16;
    c.gibbs.n_iter = 500;
    c.diagnostics.predictive_panels = 50;
    c.diagnostics.qq_replicates = 100;
    c.diagnostics.return_level_draws = 5;
    return c;
  }
  if (name == "sim-study") {
    c.name = "sim-study";
    c.output_dir = "out/sim-study";
    c.simulation.d1 = c.simulation.d2 = 10;
    c.simulation.n = 200;
    c.simulation.truth = sim_truth;
    c.train.sims_budget = 128000;
    c.gibbs.n_iter = 10000;
    c.diagnostics.recovery_replicates = 50;
    return c;
  }
  if (name == "guanacaste-d4m5") {
    c.name = "guanacaste-d4m5";
    c.output_dir = "out/guanacaste-d4m5";
    c.sites_file = "data/guanacaste_sites.csv";
    c.observations_file = "data/guanacaste_chirps.csv";
    c.covmodel = "M5";
    c.split.train_start = "2015-01-01";
    c.split.train_end = "2019-12-31";
    c.split.test_start = "2020-01-01";
    c.split.test_end = "2022-12-31";
    c.train.sims_budget = 128000;
    c.gibbs.n_iter = 10000;
    return c;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

}  // namespace stpot
