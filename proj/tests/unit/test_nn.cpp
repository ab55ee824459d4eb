#include <cmath>
#include <functional>

#include "doctest.h"
#include "stpot/errors.hpp"
#include "stpot/nn.hpp"

using namespace stpot;
using namespace stpot::nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

// Central differences of f with respect to every entry of `x`, compared with `analytic`.
double max_rel_error(const std::function<double()>& f, Mat& x, const Mat& analytic,
                     double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double fp = f();
    x(i) = keep - h;
    const double fm = f();
    x(i) = keep;
    const double num = (fp - fm) / (2 * h);
    const double err = std::abs(num - analytic(i)) / std::max(1.0, std::abs(num));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

TEST_CASE("dense gradients") {
  for (Activation act : {Activation::identity, Activation::relu, Activation::elu, Activation::tanh}) {
    CAPTURE(to_string(act));
    Rng rng(1);
    Dense layer("d", 5, 4, act);
    layer.init(rng);
    layer.bias.value = random_mat(4, 1, rng, 0.3);
    Mat x = random_mat(5, 7, rng);
    const Mat w = random_mat(4, 7, rng);
    auto loss = [&] { return (layer.forward(x).array() * w.array()).sum(); };

    Dense::Trace tr;
    layer.forward(x, tr);
    layer.weight.zero_grad();
    layer.bias.zero_grad();
    const Mat dx = layer.backward(w, tr);
    CHECK(max_rel_error(loss, layer.weight.value, layer.weight.grad) < 1e-6);
    CHECK(max_rel_error(loss, layer.bias.value, layer.bias.grad) < 1e-6);
    CHECK(max_rel_error(loss, x, dx) < 1e-6);
  }
}

TEST_CASE("lstm gradients") {
  for (bool seq : {true, false}) {
    CAPTURE(seq);
    Rng rng(2);
    const int steps = 5, batch = 3, in = 4, hid = 6;
    Lstm layer("l", in, hid);
    layer.init(rng);
    layer.bias.value = random_mat(4 * hid, 1, rng, 0.3);
    Mat x = random_mat(in, steps * batch, rng);
    const Mat w = random_mat(hid, seq ? steps * batch : batch, rng);
    auto loss = [&] { return (layer.forward(x, steps, seq).array() * w.array()).sum(); };

    Lstm::Trace tr;
    layer.forward(x, steps, seq, &tr);
    ParamList ps;
    layer.collect(ps);
    zero_grads(ps);
    const Mat dx = layer.backward(w, tr, seq, true);
    CHECK(max_rel_error(loss, layer.kernel.value, layer.kernel.grad) < 1e-6);
    CHECK(max_rel_error(loss, layer.recurrent.value, layer.recurrent.grad) < 1e-6);
    CHECK(max_rel_error(loss, layer.bias.value, layer.bias.grad) < 1e-6);
    CHECK(max_rel_error(loss, x, dx) < 1e-6);
  }
}

TEST_CASE("lstm hand-computed single step") {
  Lstm layer("l", 1, 1);
  layer.kernel.value << 1.0, 2.0, 3.0, 4.0;
  layer.recurrent.value.setZero();
  layer.bias.value.setZero();
  Mat x(1, 1);
  x << 0.5;
  const Mat h = layer.forward(x, 1, false);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double c = sig(0.5) * std::tanh(1.5);
  CHECK(h(0, 0) == doctest::Approx(sig(2.0) * std::tanh(c)).epsilon(1e-14));
}

TEST_CASE("lstm batch columns are independent") {
  Rng rng(3);
  Lstm layer("l", 2, 3);
  layer.init(rng);
  const int steps = 4;
  const Mat x = random_mat(2, steps * 2, rng);
  const Mat both = layer.forward(x, steps, false);
  Mat first(2, steps);
  for (int t = 0; t < steps; ++t) first.col(t) = x.col(t * 2);
  CHECK(layer.forward(first, steps, false).isApprox(both.col(0), 1e-14));
}

TEST_CASE("conv gradients") {
  Rng rng(4);
  const int h = 3, w = 4, cin = 2, cout = 3, frames = 2;
  Conv2d layer("c", cin, cout, h, w);
  layer.init(rng);
  layer.bias.value = random_mat(cout, 1, rng, 0.2);
  Mat x = random_mat(cin, h * w * frames, rng);
  const Mat wt = random_mat(cout, h * w * frames, rng);
  auto loss = [&] { return (layer.forward(x).array() * wt.array()).sum(); };

  Conv2d::Trace tr;
  layer.forward(x, &tr);
  layer.kernel.zero_grad();
  layer.bias.zero_grad();
  const Mat dx = layer.backward(wt, tr, true);
  CHECK(max_rel_error(loss, layer.kernel.value, layer.kernel.grad) < 1e-6);
  CHECK(max_rel_error(loss, layer.bias.value, layer.bias.grad) < 1e-6);
  CHECK(max_rel_error(loss, x, dx) < 1e-6);
}

TEST_CASE("conv matches a direct loop") {
  Rng rng(5);
  const int h = 4, w = 3, cin = 2, cout = 2;
  Conv2d layer("c", cin, cout, h, w);
  layer.init(rng);
  const Mat x = random_mat(cin, h * w, rng);
  const Mat y = layer.forward(x);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double s = layer.bias.value(o, 0);
        for (int ki = 0; ki < 3; ++ki)
          for (int kj = 0; kj < 3; ++kj) {
            const int si = i + ki - 1, sj = j + kj - 1;
            if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
            for (int c = 0; c < cin; ++c)
              s += layer.kernel.value(o, (ki * 3 + kj) * cin + c) * x(c, si * w + sj);
          }
        CHECK(y(o, i * w + j) == doctest::Approx(std::max(0.0, s)).epsilon(1e-13));
      }
}

TEST_CASE("conv chunking does not change results") {
  Rng rng(6);
  Conv2d layer("c", 1, 4, 16, 16);
  layer.init(rng);
  const Mat x = random_mat(1, 256 * 40, rng);
  const Mat all = layer.forward(x);
  CHECK(layer.forward(x.middleCols(256 * 37, 256)).isApprox(all.middleCols(256 * 37, 256), 1e-14));
}

TEST_CASE("orthogonal init") {
  Rng rng(7);
  Mat tall(12, 3), wide(3, 12);
  orthogonal(tall, rng);
  orthogonal(wide, rng);
  CHECK((tall.transpose() * tall - Mat::Identity(3, 3)).norm() < 1e-12);
  CHECK((wide * wide.transpose() - Mat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("glorot limits") {
  Rng rng(8);
  Mat m(50, 30);
  glorot_uniform(m, 30, 50, rng);
  const double limit = std::sqrt(6.0 / 80.0);
  CHECK(m.cwiseAbs().maxCoeff() <= limit);
  CHECK(m.cwiseAbs().maxCoeff() > 0.9 * limit);
}

TEST_CASE("adam") {
  SUBCASE("first step moves each weight by lr against the gradient sign") {
    Param p("p", 3, 1);
    p.value << 1.0, -2.0, 0.5;
    p.grad << 0.3, -4.0, 0.0;
    Adam opt({&p}, AdamConfig{0.9, 0.999, 1e-7, 0.0});
    opt.step(0.01);
    CHECK(p.value(0) == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(p.value(1) == doctest::Approx(-1.99).epsilon(1e-6));
    CHECK(p.value(2) == 0.5);
  }
  SUBCASE("clipping rescales the global norm") {
    Param a("a", 1, 1), b("b", 1, 1);
    a.grad << 30.0;
    b.grad << 40.0;
    Adam opt({&a, &b}, AdamConfig{});
    CHECK(opt.step(1e-3) == doctest::Approx(50.0));
  }
  SUBCASE("minimizes a quadratic") {
    Param p("p", 2, 1);
    p.value << 3.0, -1.0;
    Adam opt({&p});
    for (int i = 0; i < 3000; ++i) {
      p.grad = 2.0 * (p.value - Vec::Constant(2, 0.5));
      opt.step(0.01);
    }
    CHECK((p.value - Vec::Constant(2, 0.5)).norm() < 1e-3);
  }
  SUBCASE("non-finite gradient") {
    Param p("p", 1, 1);
    p.grad << std::nan("");
    Adam opt({&p});
    CHECK_THROWS_AS(opt.step(0.1), NumericError);
  }
}

TEST_CASE("shape errors") {
  Lstm l("l", 3, 2);
  CHECK_THROWS_AS(l.forward(Mat::Zero(3, 7), 2, false), InvalidInput);
  CHECK_THROWS_AS(l.forward(Mat::Zero(2, 4), 2, false), InvalidInput);
  Conv2d c("c", 1, 2, 3, 3);
  CHECK_THROWS_AS(c.forward(Mat::Zero(1, 10)), InvalidInput);
}
