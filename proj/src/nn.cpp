#include "stpot/nn.hpp"

#include <algorithm>
#include <cmath>

#include "stpot/errors.hpp"

namespace stpot::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "elu") return Activation::elu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

void glorot_uniform(Mat& w, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-limit, limit);
}

void orthogonal(Mat& w, Rng& rng) {
  const bool tall = w.rows() >= w.cols();
  const Eigen::Index r = tall ? w.rows() : w.cols();
  const Eigen::Index c = tall ? w.cols() : w.rows();
  Mat a(r, c);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  const Mat rr = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  w = tall ? q : Mat(q.transpose());
}

namespace {

void apply(Activation act, const Mat& pre, Mat& out) {
  switch (act) {
    case Activation::identity: out = pre; break;
    case Activation::relu: out = pre.cwiseMax(0.0); break;
    case Activation::elu:
      out = (pre.array() > 0.0).select(pre.array(), pre.array().exp() - 1.0);
      break;
    case Activation::tanh: out = pre.array().tanh(); break;
  }
}

// dout * act'(pre), using the cached output where convenient.
Mat derivative(Activation act, const Mat& pre, const Mat& out, const Mat& dout) {
  switch (act) {
    case Activation::identity: return dout;
    case Activation::relu: return (pre.array() > 0.0).select(dout.array(), 0.0);
    case Activation::elu:
      return (pre.array() > 0.0).select(dout.array(), dout.array() * (out.array() + 1.0));
    case Activation::tanh: return dout.array() * (1.0 - out.array().square());
  }
  return dout;
}

inline Mat sigmoid(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse(); }

}  // namespace

// ---- Dense ----

Dense::Dense(const std::string& name, int in, int out, Activation a)
    : weight(name + ".kernel", out, in), bias(name + ".bias", out, 1), act(a) {}

Mat Dense::forward(const Mat& x) const {
  Mat pre = weight.value * x;
  pre.colwise() += bias.value.col(0);
  Mat out;
  apply(act, pre, out);
  return out;
}

Mat Dense::forward(const Mat& x, Trace& tr) const {
  tr.input = x;
  tr.pre.noalias() = weight.value * x;
  tr.pre.colwise() += bias.value.col(0);
  apply(act, tr.pre, tr.out);
  return tr.out;
}

Mat Dense::backward(const Mat& dout, const Trace& tr, bool need_dx) {
  const Mat dpre = derivative(act, tr.pre, tr.out, dout);
  weight.grad.noalias() += dpre * tr.input.transpose();
  bias.grad += dpre.rowwise().sum();
  if (!need_dx) return {};
  return weight.value.transpose() * dpre;
}

void Dense::init(Rng& rng) {
  glorot_uniform(weight.value, in(), out(), rng);
  bias.value.setZero();
}

void Dense::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}
void Dense::collect(ConstParamList& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---- Lstm ----

Lstm::Lstm(const std::string& name, int in, int hidden)
    : kernel(name + ".kernel", 4 * hidden, in),
      recurrent(name + ".recurrent", 4 * hidden, hidden),
      bias(name + ".bias", 4 * hidden, 1) {}

Mat Lstm::forward(const Mat& x, int steps, bool sequences, Trace* tr) const {
  const Eigen::Index h = hidden();
  if (steps <= 0 || x.cols() % steps != 0)
    throw InvalidInput("lstm input has " + std::to_string(x.cols()) +
                       " columns, not a multiple of " + std::to_string(steps) + " steps");
  if (x.rows() != in())
    throw InvalidInput("lstm expects " + std::to_string(in()) + " features, got " +
                       std::to_string(x.rows()));
  const Eigen::Index b = x.cols() / steps;

  Mat z = kernel.value * x;
  z.colwise() += bias.value.col(0);
  Mat hs, cs;
  if (tr || sequences) hs.resize(h, x.cols());
  if (tr) cs.resize(h, x.cols());
  Mat hcur = Mat::Zero(h, b), ccur = Mat::Zero(h, b);

  for (int t = 0; t < steps; ++t) {
    auto zt = z.middleCols(t * b, b);
    zt.noalias() += recurrent.value * hcur;
    zt.topRows(h) = sigmoid(zt.topRows(h));
    zt.middleRows(h, h) = sigmoid(zt.middleRows(h, h));
    zt.middleRows(2 * h, h) = zt.middleRows(2 * h, h).array().tanh();
    zt.bottomRows(h) = sigmoid(zt.bottomRows(h));
    ccur = zt.middleRows(h, h).cwiseProduct(ccur) +
           zt.topRows(h).cwiseProduct(zt.middleRows(2 * h, h));
    hcur = zt.bottomRows(h).cwiseProduct(Mat(ccur.array().tanh()));
    if (hs.size()) hs.middleCols(t * b, b) = hcur;
    if (cs.size()) cs.middleCols(t * b, b) = ccur;
  }
  if (tr) {
    tr->x = x;
    tr->gates = std::move(z);
    tr->cell = std::move(cs);
    tr->hidden = hs;
    tr->steps = steps;
    tr->batch = static_cast<int>(b);
  }
  if (sequences) return hs;
  return hcur;
}

Mat Lstm::backward(const Mat& dout, const Trace& tr, bool sequences, bool need_dx) {
  const Eigen::Index h = hidden();
  const Eigen::Index b = tr.batch;
  const int steps = tr.steps;
  Mat dz(4 * h, steps * b);
  Mat dh_next = Mat::Zero(h, b), dc_next = Mat::Zero(h, b);

  for (int t = steps - 1; t >= 0; --t) {
    Mat dh = dh_next;
    if (sequences)
      dh += dout.middleCols(t * b, b);
    else if (t == steps - 1)
      dh += dout;
    const auto g = tr.gates.middleCols(t * b, b);
    const auto ig = g.topRows(h).array();
    const auto fg = g.middleRows(h, h).array();
    const auto cg = g.middleRows(2 * h, h).array();
    const auto og = g.bottomRows(h).array();
    const Eigen::ArrayXXd tc = tr.cell.middleCols(t * b, b).array().tanh();
    const Eigen::ArrayXXd dc =
        dh.array() * og * (1.0 - tc.square()) + dc_next.array();
    auto dzt = dz.middleCols(t * b, b);
    dzt.bottomRows(h) = (dh.array() * tc * og * (1.0 - og)).matrix();
    dzt.topRows(h) = (dc * cg * ig * (1.0 - ig)).matrix();
    dzt.middleRows(2 * h, h) = (dc * ig * (1.0 - cg.square())).matrix();
    if (t > 0)
      dzt.middleRows(h, h) =
          (dc * tr.cell.middleCols((t - 1) * b, b).array() * fg * (1.0 - fg)).matrix();
    else
      dzt.middleRows(h, h).setZero();
    dc_next = (dc * fg).matrix();
    dh_next.noalias() = recurrent.value.transpose() * dzt;
  }

  if (steps > 1)
    recurrent.grad.noalias() +=
        dz.rightCols((steps - 1) * b) * tr.hidden.leftCols((steps - 1) * b).transpose();
  kernel.grad.noalias() += dz * tr.x.transpose();
  bias.grad += dz.rowwise().sum();
  if (!need_dx) return {};
  return kernel.value.transpose() * dz;
}

void Lstm::init(Rng& rng) {
  glorot_uniform(kernel.value, in(), 4.0 * hidden(), rng);
  orthogonal(recurrent.value, rng);
  bias.value.setZero();
  bias.value.middleRows(hidden(), hidden()).setOnes();
}

void Lstm::collect(ParamList& out) {
  out.push_back(&kernel);
  out.push_back(&recurrent);
  out.push_back(&bias);
}
void Lstm::collect(ConstParamList& out) const {
  out.push_back(&kernel);
  out.push_back(&recurrent);
  out.push_back(&bias);
}

// ---- Conv2d ----

namespace {
constexpr Eigen::Index kChunkColumns = 4096;
}

Conv2d::Conv2d(const std::string& name, int in_ch, int out_ch, int height, int width)
    : kernel(name + ".kernel", out_ch, 9 * in_ch),
      bias(name + ".bias", out_ch, 1),
      in_ch_(in_ch),
      height_(height),
      width_(width) {}

// Patch rows are ordered (ki * 3 + kj) * in_ch + c.
void Conv2d::im2col(const Mat& x, Eigen::Index frame0, Eigen::Index frames, Mat& col) const {
  const Eigen::Index p = pixels();
  col.setZero(9 * in_ch_, p * frames);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index base = (frame0 + f) * p;
    for (int i = 0; i < height_; ++i)
      for (int j = 0; j < width_; ++j) {
        double* dst = col.col(f * p + i * width_ + j).data();
        for (int ki = 0; ki < 3; ++ki) {
          const int si = i + ki - 1;
          if (si < 0 || si >= height_) continue;
          for (int kj = 0; kj < 3; ++kj) {
            const int sj = j + kj - 1;
            if (sj < 0 || sj >= width_) continue;
            const double* src = x.col(base + si * width_ + sj).data();
            double* d = dst + (ki * 3 + kj) * in_ch_;
            for (int c = 0; c < in_ch_; ++c) d[c] = src[c];
          }
        }
      }
  }
}

void Conv2d::col2im_add(const Mat& col, Eigen::Index frame0, Eigen::Index frames, Mat& dx) const {
  const Eigen::Index p = pixels();
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index base = (frame0 + f) * p;
    for (int i = 0; i < height_; ++i)
      for (int j = 0; j < width_; ++j) {
        const double* src = col.col(f * p + i * width_ + j).data();
        for (int ki = 0; ki < 3; ++ki) {
          const int si = i + ki - 1;
          if (si < 0 || si >= height_) continue;
          for (int kj = 0; kj < 3; ++kj) {
            const int sj = j + kj - 1;
            if (sj < 0 || sj >= width_) continue;
            double* d = dx.col(base + si * width_ + sj).data();
            const double* s = src + (ki * 3 + kj) * in_ch_;
            for (int c = 0; c < in_ch_; ++c) d[c] += s[c];
          }
        }
      }
  }
}

Mat Conv2d::forward(const Mat& x, Trace* tr) const {
  const Eigen::Index p = pixels();
  if (x.rows() != in_ch_ || x.cols() % p != 0)
    throw InvalidInput("conv input shape " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + " does not match " + std::to_string(in_ch_) +
                       " channels of " + std::to_string(height_) + "x" + std::to_string(width_));
  const Eigen::Index frames = x.cols() / p;
  const Eigen::Index chunk = std::max<Eigen::Index>(1, kChunkColumns / p);
  Mat pre(out_channels(), x.cols());
  Mat col;
  for (Eigen::Index f0 = 0; f0 < frames; f0 += chunk) {
    const Eigen::Index nf = std::min(chunk, frames - f0);
    im2col(x, f0, nf, col);
    pre.middleCols(f0 * p, nf * p).noalias() = kernel.value * col;
  }
  pre.colwise() += bias.value.col(0);
  Mat out = pre.cwiseMax(0.0);
  if (tr) {
    tr->x = x;
    tr->pre = std::move(pre);
  }
  return out;
}

Mat Conv2d::backward(const Mat& dout, const Trace& tr, bool need_dx) {
  const Eigen::Index p = pixels();
  const Eigen::Index frames = tr.x.cols() / p;
  const Eigen::Index chunk = std::max<Eigen::Index>(1, kChunkColumns / p);
  const Mat dpre = (tr.pre.array() > 0.0).select(dout.array(), 0.0);
  bias.grad += dpre.rowwise().sum();
  Mat dx;
  if (need_dx) dx.setZero(in_ch_, tr.x.cols());
  Mat col, dcol;
  for (Eigen::Index f0 = 0; f0 < frames; f0 += chunk) {
    const Eigen::Index nf = std::min(chunk, frames - f0);
    im2col(tr.x, f0, nf, col);
    const auto dblock = dpre.middleCols(f0 * p, nf * p);
    kernel.grad.noalias() += dblock * col.transpose();
    if (need_dx) {
      dcol.noalias() = kernel.value.transpose() * dblock;
      col2im_add(dcol, f0, nf, dx);
    }
  }
  return dx;
}

void Conv2d::init(Rng& rng) {
  glorot_uniform(kernel.value, 9.0 * in_ch_, 9.0 * out_channels(), rng);
  bias.value.setZero();
}

void Conv2d::collect(ParamList& out) {
  out.push_back(&kernel);
  out.push_back(&bias);
}
void Conv2d::collect(ConstParamList& out) const {
  out.push_back(&kernel);
  out.push_back(&bias);
}

// ---- optimisation ----

double grad_norm(const ParamList& params) {
  double s = 0.0;
  for (const Param* p : params) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

Adam::Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

double Adam::step(double lr) {
  const double norm = grad_norm(params_);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double scale = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step = lr * std::sqrt(c2) / c1;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto g = params_[k]->grad.array() * scale;
    m_[k].array() = cfg_.beta1 * m_[k].array() + (1.0 - cfg_.beta1) * g;
    v_[k].array() = cfg_.beta2 * v_[k].array() + (1.0 - cfg_.beta2) * g.square();
    params_[k]->value.array() -= step * m_[k].array() / (v_[k].array().sqrt() + cfg_.eps);
  }
  return norm;
}

}  // namespace stpot::nn
