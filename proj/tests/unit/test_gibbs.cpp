#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "stpot/errors.hpp"
#include "stpot/gibbs.hpp"
#include "stpot/trainer.hpp"

using namespace stpot;

namespace {

TrainConfig tiny(const std::string& variant, const std::string& cov) {
  TrainConfig cfg;
  cfg.variant = variant;
  cfg.covmodel = cov;
  cfg.n = 40;
  cfg.n_lstm = 8;
  cfg.n_dense = 8;
  cfg.flow = FlowArch{2, 8, 2, 3.0};
  return cfg;
}

struct Fixture {
  SiteSet sites = unit_grid(3, 3);
  PriorSpec prior = PriorSpec::defaults(sites.delta);
  TrainConfig cfg = tiny("D4", "M2");
  ParameterLayout layout{FactorVariant::from_name("D4"), CovariateModel::from_name("M2")};
  Estimator ea = make_ralpha_estimator(sites, prior, cfg, 11);
  Estimator ex = make_rx_estimator(sites, prior, cfg, 12);
  CensoredPanel cp;

  Fixture() {
    Rng rng(1);
    const ParameterVector th = sample_prior(prior, layout.variant(), layout.covmodel(), rng);
    const Mat y = simulate_panel(sites, layout.covmodel(), layout.variant(), th, cfg.n, rng);
    cp = censor(y, empirical_threshold(y, 0.75));
    // scaling on a few prior predictive datasets so the untrained nets see sane inputs
    std::vector<Mat> a_in, x_in;
    for (int k = 0; k < 8; ++k) {
      Rng r = Rng::substream(3, stream::heldout, k);
      a_in.push_back(ralpha_simulator(sites, prior, cfg)(r).input);
      x_in.push_back(rx_simulator(sites, prior, cfg)(r).input);
    }
    std::vector<const Mat*> pa, px;
    for (auto& m : a_in) pa.push_back(&m);
    for (auto& m : x_in) px.push_back(&m);
    ea.summary.fit_scaling(pa);
    ex.summary.fit_scaling(px);
  }
};

}  // namespace

TEST_CASE("initial values lie in the prior support") {
  const PriorSpec prior = PriorSpec::defaults(2.0);
  for (const char* name : {"D1", "D2", "D4", "D5", "DY"}) {
    const FactorVariant v = FactorVariant::from_name(name);
    const ParameterLayout layout(v, CovariateModel::from_name("M1"));
    const auto priors = layout.x_priors(prior);
    Rng a(9), b(9);
    for (int rep = 0; rep < 50; ++rep) {
      const Vec x = initialize(prior, v, a);
      CHECK(x == initialize(prior, v, b));
      REQUIRE(x.size() == static_cast<Eigen::Index>(priors.size()));
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        CHECK(x(k) >= priors[k].a);
        CHECK(x(k) <= priors[k].b);
      }
    }
  }
}

TEST_CASE("chain shape, support and determinism") {
  Fixture f;
  Rng init(4);
  const Vec x0 = initialize(f.prior, f.layout.variant(), init);

  Rng r1(77), r2(77), r3(78);
  const PosteriorChain c1 = gibbs_run(f.ea, f.ex, f.sites, f.cp, x0, 60, r1);
  const PosteriorChain c2 = gibbs_run(f.ea, f.ex, f.sites, f.cp, x0, 60, r2);
  const PosteriorChain c3 = gibbs_run(f.ea, f.ex, f.sites, f.cp, x0, 60, r3);
  CHECK(c1.draws.rows() == 60);
  CHECK(c1.draws.cols() == 6);
  CHECK(c1.names == f.layout.names());
  CHECK(c1.burn_in == 6);
  CHECK(c1.kept().rows() == 54);
  CHECK(c1.draws == c2.draws);
  CHECK(c1.draws != c3.draws);
  CHECK(c1.meta() == c2.meta());
  CHECK_FALSE(c1.meta().contains("wall_minutes"));

  const auto priors = f.layout.priors(f.prior);
  CHECK(c1.draws.allFinite());
  for (Eigen::Index k = 2; k < 6; ++k) {
    CHECK(c1.draws.col(k).minCoeff() > priors[k].a);
    CHECK(c1.draws.col(k).maxCoeff() < priors[k].b);
  }
  // the latent-factor block changes from one iteration to the next
  CHECK((c1.draws.col(2).tail(59).array() != c1.draws.col(2).head(59).array()).all());
}

TEST_CASE("zero iterations") {
  Fixture f;
  Rng init(4), rng(5);
  const PosteriorChain c = gibbs_run(f.ea, f.ex, f.sites, f.cp, initialize(f.prior, f.layout.variant(), init), 0, rng);
  CHECK(c.n_iter() == 0);
  CHECK(c.kept().rows() == 0);
  CHECK(c.meta()["n_iter"] == 0);
  CHECK(c.meta()["parameters"].size() == 6);
  CHECK_THROWS_AS(gibbs_run(f.ea, f.ex, f.sites, f.cp, Vec::Zero(4), -1, rng), InvalidInput);
}

TEST_CASE("mismatched checkpoints are rejected") {
  Fixture f;
  Rng rng(6);
  const Vec x0 = initialize(f.prior, f.layout.variant(), rng);
  CHECK_THROWS_AS(gibbs_run(f.ex, f.ea, f.sites, f.cp, x0, 1, rng), ConfigError);
  CHECK_THROWS_AS(gibbs_run(f.ea, f.ex, f.sites, f.cp, Vec::Zero(3), 1, rng), ConfigError);

  Estimator other = make_rx_estimator(f.sites, f.prior, tiny("D4", "M3"), 1);
  CHECK_THROWS_AS(gibbs_run(f.ea, other, f.sites, f.cp, x0, 1, rng), ConfigError);

  const SiteSet big = unit_grid(4, 4);
  Estimator wide = make_rx_estimator(big, PriorSpec::defaults(big.delta), f.cfg, 1);
  CHECK_THROWS_AS(gibbs_run(f.ea, wide, f.sites, f.cp, x0, 1, rng), ConfigError);

  SiteSet renamed = f.sites;
  renamed.ids[0] = "elsewhere";
  CHECK_THROWS_AS(gibbs_run(f.ea, f.ex, renamed, f.cp, x0, 1, rng), ConfigError);

  CensoredPanel narrow = f.cp;
  narrow.values = f.cp.values.leftCols(8);
  CHECK_THROWS_AS(gibbs_run(f.ea, f.ex, f.sites, narrow, x0, 1, rng), ConfigError);
}

TEST_CASE("chain csv round trip") {
  Fixture f;
  Rng init(4), rng(8);
  const PosteriorChain c = gibbs_run(f.ea, f.ex, f.sites, f.cp, initialize(f.prior, f.layout.variant(), init), 25, rng);
  const std::string path = (std::filesystem::temp_directory_path() / "stpot_chain.csv").string();
  write_chain_csv(path, c);
  const PosteriorChain back = read_chain_csv(path);
  CHECK(back.names == c.names);
  CHECK(back.draws == c.draws);
  CHECK(back.burn_in == c.burn_in);

  std::ofstream(path) << "iteration,a,b\n0,1.5,x\n";
  CHECK_THROWS_AS(read_chain_csv(path), DataError);
  std::ofstream(path) << "iteration,a,b\n0,1.5\n";
  CHECK_THROWS_AS(read_chain_csv(path), DataError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_chain_csv(path), IoError);
}
