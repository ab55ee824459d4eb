#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "stpot/errors.hpp"
#include "stpot/summary.hpp"

using namespace stpot;

namespace {

Mat positive_panel(int n, int cols, Rng& rng) {
  Mat m(n, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = std::exp(rng.normal());
  return m;
}

SummaryArch tiny_rx() {
  SummaryArch a = SummaryArch::rx(2, 3, 3, 2);
  a.conv1 = 2;
  a.conv2 = 3;
  return a;
}

void randomize(SummaryNet& net, Rng& rng, double scale) {
  nn::ParamList ps;
  net.collect(ps);
  for (auto* p : ps)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value(i) = scale * rng.normal();
}

}  // namespace

TEST_CASE("ralpha input assembly") {
  Rng rng(1);
  const auto d4 = FactorVariant::from_name("D4");
  CensoredPanel cp = censor(positive_panel(610, 25, rng), Vec::Constant(25, 1.0));
  Vec tx(4);
  tx << 0.7, 1.0, 5.0, 0.5;
  const Mat in = assemble_ralpha_input(cp, tx, d4);
  CHECK(in.rows() == 610);
  CHECK(in.cols() == 29);
  CHECK(in.leftCols(25) == cp.values);
  for (int k = 0; k < 4; ++k) CHECK((in.col(25 + k).array() == tx(k)).all());
  CHECK(ralpha_hyper_names(d4) == std::vector<std::string>{"phi", "sigma", "beta3", "rho"});

  const auto d2 = FactorVariant::from_name("D2");
  CHECK(assemble_ralpha_input(cp, tx.head(2), d2).cols() == 27);
  CHECK_THROWS_AS(assemble_ralpha_input(cp, tx.head(3), d4), ConfigError);
}

TEST_CASE("rx input assembly") {
  Rng rng(2);
  CHECK(default_grid(25) == std::pair{5, 5});
  CHECK(default_grid(16) == std::pair{4, 4});
  CHECK(default_grid(12) == std::pair{3, 4});
  CHECK_THROWS_AS(default_grid(83), ConfigError);

  const Mat ratio = positive_panel(30, 16, rng);
  const RxInput g = assemble_rx_input(ratio, 4, 4);
  CHECK(g.flatten() == ratio);
  for (int t = 0; t < 30; ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(g.at(t, i, j) == ratio(t, i * 4 + j));

  const Mat r83 = positive_panel(5, 83, rng);
  try {
    assemble_rx_input(r83, 9, 9);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("valid factorizations") != std::string::npos);
  }
  CHECK_THROWS_AS(assemble_rx_input(ratio, 2, 4), ConfigError);
}

TEST_CASE("scenario capacities") {
  CHECK(scenario_capacity(1) == std::pair{128, 128});
  CHECK(scenario_capacity(2) == std::pair{1024, 128});
  CHECK(scenario_capacity(3) == std::pair{128, 1024});
  CHECK(scenario_capacity(4) == std::pair{1024, 1024});
  CHECK(scenario_capacity(5) == std::pair{1000, 2000});
  CHECK_THROWS_AS(scenario_capacity(6), ConfigError);
}

TEST_CASE("reference layer shapes") {
  SummaryNet ra(SummaryArch::ralpha(25, 4, 1024, 128));
  const auto sa = ra.layer_shapes(610);
  CHECK(sa.front().second == std::vector<int>{610, 29});
  CHECK(sa[1].second == std::vector<int>{610, 1024});
  CHECK(sa[2].second == std::vector<int>{1024});
  CHECK(sa.back().second == std::vector<int>{128});

  SummaryNet rx(SummaryArch::rx(5, 5, 1024, 128));
  const auto sx = rx.layer_shapes(610);
  CHECK(sx[0].second == std::vector<int>{610, 5, 5, 1});
  CHECK(sx[1].second == std::vector<int>{610, 5, 5, 32});
  CHECK(sx[2].second == std::vector<int>{610, 5, 5, 64});
  CHECK(sx[3].second == std::vector<int>{610, 1600});
  CHECK(sx.back().second == std::vector<int>{128});
}

TEST_CASE("summary output length does not depend on n") {
  Rng rng(3);
  for (SummaryArch arch : {SummaryArch::ralpha(4, 2, 8, 5), SummaryArch::rx(2, 2, 8, 5)}) {
    SummaryNet net(arch);
    net.init(rng);
    const Mat a = positive_panel(50, arch.columns, rng);
    const Mat b = positive_panel(200, arch.columns, rng);
    const Mat sa = net.forward(a), sb = net.forward(b);
    CHECK(sa.rows() == 5);
    CHECK(sb.rows() == 5);
    CHECK(sa.cols() == 1);
    CHECK(sa.allFinite());
    CHECK(net.forward(a) == sa);
  }
}

TEST_CASE("zero weights give a zero summary") {
  Rng rng(4);
  for (SummaryArch arch : {SummaryArch::ralpha(4, 2, 8, 5), SummaryArch::rx(2, 3, 8, 5)}) {
    SummaryNet net(arch);
    const Mat s = net.forward(positive_panel(20, arch.columns, rng));
    CHECK((s.array() == 0.0).all());
  }
}

TEST_CASE("time order matters") {
  Rng rng(5);
  SummaryNet net(SummaryArch::ralpha(4, 2, 8, 5));
  net.init(rng);
  Mat a = positive_panel(30, 6, rng);
  Mat b = a;
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[i] = 29 - i;
  for (int i = 0; i < 30; ++i) b.row(i) = a.row(perm[i]);
  CHECK((net.forward(a) - net.forward(b)).norm() > 1e-6);
}

TEST_CASE("batch columns are independent") {
  Rng rng(6);
  for (SummaryArch arch : {SummaryArch::ralpha(3, 1, 6, 4), tiny_rx()}) {
    SummaryNet net(arch);
    net.init(rng);
    const Mat a = positive_panel(12, arch.columns, rng), b = positive_panel(12, arch.columns, rng);
    const Mat both = net.forward(std::vector<const Mat*>{&a, &b});
    CHECK((both.col(1) - net.forward(b)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("input standardization") {
  Rng rng(7);
  SummaryNet net(SummaryArch::ralpha(2, 1, 4, 3));
  CHECK(net.n_stats() == 4);
  std::vector<Mat> data;
  for (int k = 0; k < 10; ++k) {
    Mat m = positive_panel(40, 3, rng);
    m.col(2).setConstant(rng.uniform(2.0, 15.0));
    data.push_back(m);
  }
  std::vector<const Mat*> ptrs;
  for (auto& m : data) ptrs.push_back(&m);
  net.fit_scaling(ptrs);
  // log columns are centred per dataset, so the pooled shift vanishes
  CHECK(std::abs(net.scaling.shift(0)) < 1e-12);
  CHECK(net.scaling.scale(0) == doctest::Approx(1.0).epsilon(1e-12));
  double mean_log = 0.0;
  for (auto& m : data) mean_log += m.col(0).array().log().mean();
  CHECK(net.scaling.stat_shift(0) == doctest::Approx(mean_log / 10.0).epsilon(1e-12));
  CHECK(net.scaling.scale(2) > 0.0);
}

TEST_CASE("per-dataset normalization removes log location and scale") {
  Rng rng(8);
  for (SummaryArch arch : {SummaryArch::ralpha(3, 1, 6, 4), tiny_rx()}) {
    CAPTURE(to_string(arch.kind));
    SummaryNet net(arch);
    net.init(rng);
    nn::ParamList ps;
    net.collect(ps);
    // detach the location/scale features
    for (nn::Param* p : ps)
      if (p->name.find("dense1.kernel") != std::string::npos) p->value.rightCols(net.n_stats()).setZero();
    const Mat a = positive_panel(15, arch.columns, rng);
    Mat b = a;
    for (Eigen::Index t = 0; t < b.rows(); ++t)
      for (Eigen::Index j = 0; j < arch.log_columns; ++j)
        b(t, j) = 3.0 * std::pow(a(t, j), 2.5);
    CHECK((net.forward(a) - net.forward(b)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("summary gradients match finite differences") {
  for (SummaryArch arch : {SummaryArch::ralpha(3, 2, 3, 2), tiny_rx()}) {
    CAPTURE(to_string(arch.kind));
    Rng rng(8);
    SummaryNet net(arch);
    randomize(net, rng, 0.4);
    const Mat a = positive_panel(4, arch.columns, rng), b = positive_panel(4, arch.columns, rng);
    const std::vector<const Mat*> batch{&a, &b};
    Mat w(arch.n_dense, 2);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    auto loss = [&] { return (net.forward(batch).array() * w.array()).sum(); };

    nn::ParamList ps;
    net.collect(ps);
    nn::zero_grads(ps);
    SummaryNet::Trace tr;
    net.forward(batch, &tr);
    net.backward(w, tr);

    double worst = 0.0;
    const double h = 1e-6;
    for (nn::Param* p : ps)
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        const double keep = p->value(i);
        p->value(i) = keep + h;
        const double fp = loss();
        p->value(i) = keep - h;
        const double fm = loss();
        p->value(i) = keep;
        const double num = (fp - fm) / (2 * h);
        worst = std::max(worst, std::abs(num - p->grad(i)) / std::max(1e-3, std::abs(num)));
      }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("summary input errors") {
  SummaryNet net(SummaryArch::ralpha(2, 1, 4, 3));
  Mat bad = Mat::Ones(5, 3);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(net.forward(bad), NumericError);
  CHECK_THROWS_AS(net.forward(Mat::Ones(5, 4)), InvalidInput);
  Mat neg = Mat::Ones(5, 3);
  neg(0, 0) = -1.0;
  CHECK_THROWS_AS(net.forward(neg), NumericError);
}
