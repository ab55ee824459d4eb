#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stpot/errors.hpp"
#include "stpot/experiment.hpp"
#include "stpot/io.hpp"

using namespace stpot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stpot_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every calendar day from `first` to `last` for `ids`, values from a counter.
void write_daily(const fs::path& p, const std::vector<std::string>& ids, const std::string& first,
                 const std::string& last) {
  using namespace std::chrono;
  std::ofstream out(p);
  out << "date";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  auto parse = [](const std::string& s) {
    return sys_days{year{std::stoi(s.substr(0, 4))} / std::stoi(s.substr(5, 2)) / std::stoi(s.substr(8, 2))};
  };
  int k = 0;
  for (sys_days d = parse(first); d <= parse(last); d += days{1}) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
    out << buf;
    for (std::size_t j = 0; j < ids.size(); ++j) out << ',' << 0.5 + (k++ % 97);
    out << '\n';
  }
}

std::vector<std::string> site_ids(int d) {
  std::vector<std::string> ids;
  for (int j = 0; j < d; ++j) ids.push_back("g" + std::to_string(j + 1));
  return ids;
}

void write_site_table(const fs::path& p, const std::vector<std::string>& ids) {
  std::ofstream out(p);
  out << "site_id,lon,lat,alt\n";
  for (std::size_t j = 0; j < ids.size(); ++j)
    out << ids[j] << ',' << -85.0 + 0.05 * double(j % 5) << ',' << 10.0 + 0.05 * double(j / 5) << ','
        << 100.0 + 37.0 * double((j * 7) % 11) << '\n';
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.name = "tiny";
  c.output_dir = out.string();
  c.covmodel = "M2";
  c.simulation.d1 = c.simulation.d2 = 2;
  c.simulation.n = 30;
  c.simulation.truth = {{"gamma0", 1.0}, {"gamma1", 0.5}, {"phi", 0.5}, {"sigma", 0.5}, {"beta3", 5.0}, {"rho", 0.5}};
  c.train.max_batches = 3;
  c.train.batch_size = 8;
  c.train.heldout_size = 16;
  c.train.eval_every = 2;
  c.train.n_lstm = 8;
  c.train.n_dense = 8;
  c.train.flow = FlowArch{2, 8, 2, 3.0};
  c.gibbs.n_iter = 20;
  c.diagnostics.predictive_panels = 4;
  c.diagnostics.qq_replicates = 10;
  c.diagnostics.return_periods = {1.0};
  c.diagnostics.return_level_draws = 2;
  c.diagnostics.recovery_replicates = 3;
  c.diagnostics.recovery_draws = 10;
  return c;
}

}  // namespace

TEST_CASE("site table loading") {
  const fs::path dir = scratch("sites");
  write(dir / "s.csv", "site_id,lon,lat,alt,soil\na,1,2,100,3\nb,1,2,300,5\nc,4,6,200,4\n");
  const SiteSet s = load_sites((dir / "s.csv").string());
  CHECK(s.size() == 3);
  CHECK(s.dist(0, 1) == 0.0);
  CHECK(s.dist(0, 2) == doctest::Approx(5.0));
  CHECK(s.delta == doctest::Approx(5.0));
  REQUIRE(s.covariates.cols() == 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    CHECK(std::abs(s.covariates.col(k).mean()) < 1e-12);
    const double var = s.covariates.col(k).squaredNorm() / 2.0;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(s.covariates(0, 2) == doctest::Approx(-1.0));

  write(dir / "dup.csv", "site_id,lon,lat,alt\na,1,2,3\na,2,3,4\n");
  CHECK_THROWS_AS(load_sites((dir / "dup.csv").string()), DataError);
  write(dir / "nan.csv", "site_id,lon,lat,alt\na,1,2,x3\n");
  CHECK_THROWS_AS(load_sites((dir / "nan.csv").string()), DataError);
  write(dir / "head.csv", "id,lon,lat,alt\na,1,2,3\n");
  CHECK_THROWS_AS(load_sites((dir / "head.csv").string()), DataError);
  CHECK_THROWS_AS(load_sites((dir / "none.csv").string()), IoError);

  SUBCASE("write and reload keeps ids and coordinates") {
    const SiteSet g = sim_study_sites(3, 3, 5);
    write_sites((dir / "g.csv").string(), g);
    const SiteSet back = load_sites((dir / "g.csv").string());
    CHECK(back.ids == g.ids);
    CHECK(back.coords == g.coords);
    CHECK(back.dist == g.dist);
  }
}

TEST_CASE("observation loading") {
  const fs::path dir = scratch("obs");
  write(dir / "s.csv", "site_id,lon,lat,alt\na,0,0,1\nb,1,0,2\n");
  const SiteSet s = load_sites((dir / "s.csv").string());
  write(dir / "o.csv", "date,b,a,c\n2020-08-31,9,9,9\n2020-09-01,1,2,0\n2020-09-02,3,4,\n2021-01-01,,,\n");
  const ObservationTable t = load_observations((dir / "o.csv").string(), s);
  CHECK(t.dates == std::vector<std::string>{"2020-09-01", "2020-09-02"});
  CHECK(t.values(0, 0) == 2.0);
  CHECK(t.values(0, 1) == 1.0);
  CHECK(t.values(1, 0) == 4.0);

  write(dir / "m.csv", "date,a,b\n2020-09-01,1,\n2020-09-02,,3\n");
  try {
    load_observations((dir / "m.csv").string(), s);
    FAIL("missing cells accepted");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2020-09-01/b") != std::string::npos);
    CHECK(msg.find("2020-09-02/a") != std::string::npos);
  }
  write(dir / "order.csv", "date,a,b\n2020-09-02,1,1\n2020-09-01,1,1\n");
  CHECK_THROWS_AS(load_observations((dir / "order.csv").string(), s), DataError);
  write(dir / "miss.csv", "date,a\n2020-09-02,1\n");
  CHECK_THROWS_AS(load_observations((dir / "miss.csv").string(), s), DataError);
  CHECK_THROWS_AS(load_observations((dir / "o.csv").string(), s, {}), ConfigError);
  CHECK_THROWS_AS(load_observations((dir / "o.csv").string(), s, {5}), DataError);
}

TEST_CASE("season shapes of the 2015-2022 record") {
  const fs::path dir = scratch("season");
  const auto ids = site_ids(83);
  write_site_table(dir / "sites.csv", ids);
  write_daily(dir / "obs.csv", ids, "2015-01-01", "2022-12-31");
  const SiteSet s = load_sites((dir / "sites.csv").string());
  const ObservationTable all = load_observations((dir / "obs.csv").string(), s);
  CHECK(all.values.rows() == 976);
  CHECK(all.values.cols() == 83);
  const std::vector<std::string> train_ids(ids.begin(), ids.begin() + 25);
  const ObservationTable train = select_dates(select_sites(all, s, train_ids), "2015-01-01", "2019-12-31");
  CHECK(train.values.rows() == 610);
  CHECK(train.values.cols() == 25);
  CHECK(select_dates(all, "2020-01-01", "2022-12-31").values.rows() == 366);
  CHECK(season_length({9, 10, 11, 12}) == 122);

  const auto dates = season_dates("2015-09-01", {9, 10, 11, 12}, 124);
  CHECK(dates[121] == "2015-12-31");
  CHECK(dates[122] == "2016-09-01");
  CHECK(dates[123] == "2016-09-02");
}

TEST_CASE("config round trip and strictness") {
  for (const auto& name : ExperimentConfig::preset_names()) {
    const ExperimentConfig c = ExperimentConfig::preset(name);
    CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK_NOTHROW(c.validate(false));
  }
  CHECK_THROWS_AS(ExperimentConfig::preset("guanacaste-d4m5").validate(true), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::preset("nope"), ConfigError);

  const fs::path dir = scratch("cfg");
  ExperimentConfig c = ExperimentConfig::preset("smoke");
  c.seed = 123;
  c.split.train_end = "2015-10-15";
  c.split.test_start = "2015-10-16";
  c.save((dir / "c.json").string());
  CHECK(ExperimentConfig::load((dir / "c.json").string()).to_json() == c.to_json());

  auto j = c.to_json();
  j["extra"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["train"]["flow"]["depth"] = 3;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["gibbs"]["n_iter"] = "many";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  write(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(ExperimentConfig::load((dir / "bad.json").string()), ConfigError);

  ExperimentConfig v = c;
  v.season_days = 120;
  CHECK_THROWS_AS(v.validate(false), ConfigError);
  v = c;
  v.months = {6, 7};
  v.season_days = 61;
  CHECK_NOTHROW(v.validate(false));
  v.months = {};
  CHECK_THROWS_AS(v.validate(false), ConfigError);
  v = c;
  v.split.test_start = "2015-10-01";
  CHECK_THROWS_AS(v.validate(false), ConfigError);
  v = c;
  v.split.train_sites = {"s1", "s2"};
  v.split.test_sites = {"s2", "s3"};
  CHECK_THROWS_AS(v.validate(false), ConfigError);
  v = c;
  v.variant = "D9";
  CHECK_THROWS_AS(v.validate(false), ConfigError);
  v = c;
  v.simulation.truth.erase("rho");
  CHECK_THROWS_AS(v.validate(false), ConfigError);
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("model comparison") {
  const fs::path dir = scratch("cmp");
  auto report = [&](const std::string& name, const std::string& cov, double a, double s, bool test = true) {
    fs::create_directories(dir / name);
    nlohmann::json j = {{"variant", "D4"}, {"covmodel", cov}, {"mqae_train", a}, {"mqse_train", s}, {"split", {{"k", 1}}}};
    if (test) {
      j["mqae_test"] = a;
      j["mqse_test"] = s;
    }
    write(dir / name / "report.json", j.dump());
    return (dir / name).string();
  };
  const auto a = report("a", "M1", 3.0, 10.0);
  const auto b = report("b", "M2", 0.0, 0.0);
  const auto c = report("c", "M3", 3.0, 9.0);
  const auto d = report("d", "M0", 3.0, 9.0);
  const auto rows = compare_models({a, b, c, d}, "MQAE", "train");
  CHECK(rows[0].name == "D4-M2");
  CHECK(rows[1].name == "D4-M0");
  CHECK(rows[2].name == "D4-M3");
  CHECK(rows[3].name == "D4-M1");
  CHECK(compare_models({a, c}, "MQSE", "test")[0].name == "D4-M3");

  const auto e = report("e", "M4", 1.0, 1.0, false);
  CHECK_THROWS_AS(compare_models({a, e}, "MQAE", "test"), ConfigError);
  CHECK_THROWS_AS(compare_models({a}, "MQAE", "train"), ConfigError);
  CHECK_THROWS_AS(compare_models({a, b}, "RMSE", "train"), ConfigError);
  write(dir / "b" / "report.json", nlohmann::json({{"variant", "D4"}, {"covmodel", "M2"}, {"mqae_train", 0.0},
                                                   {"mqse_train", 0.0}, {"split", {{"k", 2}}}}).dump());
  CHECK_THROWS_AS(compare_models({a, b}, "MQAE", "train"), ConfigError);

  write_ranking((dir / "rank.csv").string(), rows);
  std::ifstream in(dir / "rank.csv");
  std::string head, first;
  std::getline(in, head);
  std::getline(in, first);
  CHECK(head == "rank,name,dir,mqae,mqse");
  CHECK(first.rfind("1,D4-M2,", 0) == 0);
}

TEST_CASE("experiment runs end to end and reproduces its files") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  ExperimentConfig ca = tiny_experiment(a), cb = tiny_experiment(b);
  const ExperimentResult ra = run_experiment(ca);
  run_experiment(cb);

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) {
    listed.insert(f["path"].get<std::string>());
    CHECK(f["sha1"] == git_blob_hash(slurp(a / f["path"].get<std::string>())));
    // config.json echoes the output directory, which differs between the two runs
    if (f["deterministic"].get<bool>() && f["path"] != "config.json") {
      const std::string p = f["path"];
      CHECK_MESSAGE(slurp(a / p) == slurp(b / p), p);
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      CHECK_MESSAGE(listed.count(fs::relative(e.path(), a).string()), e.path().string());
  for (const char* f : {"ralpha.ckpt", "rx.ckpt", "chain_0.csv", "report.json", "qq.csv", "mqae_by_site.csv",
                        "return_levels.csv", "recovery.csv", "data/truth.json", "config.json"})
    CHECK_MESSAGE(listed.count(f), f);

  const auto& rep = ra.report;
  CHECK(rep["parameters"].size() == 6);
  CHECK(rep["n_draws"] == 18);
  CHECK(rep.contains("mqae_train"));
  CHECK_FALSE(rep.contains("mqae_test"));
  CHECK(rep["r2"].size() == 6);
  CHECK_FALSE(rep["parameters"][0].contains("ess_per_min"));
  CHECK(nlohmann::json::parse(slurp(a / "timing.json"))["ess_per_min"].contains("phi"));

  SUBCASE("rerun into the same directory is idempotent") {
    const std::string before = slurp(a / "chain_0.csv");
    run_experiment(ca);
    CHECK(slurp(a / "chain_0.csv") == before);
  }
}

TEST_CASE("experiment on data files with a train/test split") {
  const fs::path dir = scratch("files");
  const auto ids = site_ids(6);
  write_site_table(dir / "sites.csv", ids);
  write_daily(dir / "obs.csv", ids, "2015-09-01", "2016-12-31");
  ExperimentConfig c = tiny_experiment(dir / "out");
  c.simulation.truth.clear();
  c.sites_file = (dir / "sites.csv").string();
  c.observations_file = (dir / "obs.csv").string();
  c.split.train_sites = {"g1", "g2", "g3", "g4"};
  c.split.test_sites = {"g5", "g6"};
  c.split.train_end = "2015-12-31";
  c.split.test_start = "2016-01-01";
  c.diagnostics.recovery_replicates = 0;
  const ExperimentResult r = run_experiment(c);
  CHECK(r.report["n_train"] == 122);
  CHECK(r.report["d_train"] == 4);
  CHECK(r.report["n_test"] == 122);
  CHECK(r.report["d_test"] == 2);
  CHECK(r.report.contains("mqae_test"));
  CHECK_FALSE(r.report["parameters"][0].contains("truth"));
  const std::string qq = slurp(dir / "out" / "qq.csv");
  CHECK(qq.find("test,g5,") != std::string::npos);
}

TEST_CASE("a failing stage leaves an error manifest") {
  const fs::path dir = scratch("fail");
  write(dir / "sites.csv", "site_id,lon,lat,alt\na,0,0,1\na,1,1,2\n");
  write(dir / "obs.csv", "date,a\n2015-09-01,1\n");
  ExperimentConfig c = tiny_experiment(dir / "out");
  c.simulation.truth.clear();
  c.sites_file = (dir / "sites.csv").string();
  c.observations_file = (dir / "obs.csv").string();
  CHECK_THROWS_AS(run_experiment(c), DataError);
  const auto m = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m["status"] == "error");
  CHECK(m["failed_stage"] == "data");
  CHECK(m["error"].get<std::string>().find("duplicate") != std::string::npos);
  CHECK(m["files"][0]["path"] == "config.json");
}
