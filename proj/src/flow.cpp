#include "stpot/flow.hpp"

#include <cmath>
#include <limits>

#include "stpot/errors.hpp"

namespace stpot {

SupportTransform SupportTransform::bounded(double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("bounded support needs lo < hi");
  return {Kind::bounded, lo, hi};
}

SupportTransform SupportTransform::gaussian(double mean, double sd) {
  if (!(sd > 0)) throw ConfigError("gaussian support needs sd > 0");
  return {Kind::gaussian, mean, sd};
}

SupportTransform SupportTransform::from_prior(const Prior& p) {
  return p.kind == Prior::Kind::uniform ? bounded(p.a, p.b) : gaussian(p.a, p.b);
}

double SupportTransform::forward(double theta) const {
  if (kind == Kind::gaussian) return (theta - a) / b;
  const double v = (theta - a) / (b - a);
  if (!(v > 0.0 && v < 1.0))
    throw InvalidInput("value " + std::to_string(theta) + " outside support (" +
                       std::to_string(a) + ", " + std::to_string(b) + ")");
  return std::log(v) - std::log1p(-v);
}

double SupportTransform::inverse(double u) const {
  if (kind == Kind::gaussian) return a + b * u;
  const double v = u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
  double theta = a + (b - a) * v;
  if (!(theta > a)) theta = std::nextafter(a, b);
  if (!(theta < b)) theta = std::nextafter(b, a);
  return theta;
}

Mat transform_forward(const std::vector<SupportTransform>& ts, const Mat& theta) {
  if (static_cast<Eigen::Index>(ts.size()) != theta.rows())
    throw InvalidInput("transform table size does not match parameter rows");
  Mat u(theta.rows(), theta.cols());
  for (Eigen::Index i = 0; i < theta.rows(); ++i)
    for (Eigen::Index j = 0; j < theta.cols(); ++j) u(i, j) = ts[i].forward(theta(i, j));
  return u;
}

Mat transform_inverse(const std::vector<SupportTransform>& ts, const Mat& u) {
  if (static_cast<Eigen::Index>(ts.size()) != u.rows())
    throw InvalidInput("transform table size does not match parameter rows");
  Mat theta(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    for (Eigen::Index j = 0; j < u.cols(); ++j) theta(i, j) = ts[i].inverse(u(i, j));
  return theta;
}

// ---- conditioner ----

Mat CouplingFlow::Conditioner::forward(const Mat& in, std::vector<nn::Dense::Trace>* tr) const {
  if (tr) tr->resize(layers.size());
  Mat h = in;
  for (std::size_t k = 0; k < layers.size(); ++k)
    h = tr ? layers[k].forward(h, (*tr)[k]) : layers[k].forward(h);
  return h;
}

Mat CouplingFlow::Conditioner::backward(const Mat& dout, const std::vector<nn::Dense::Trace>& tr) {
  Mat d = dout;
  for (std::size_t k = layers.size(); k-- > 0;) d = layers[k].backward(d, tr[k]);
  return d;
}

// ---- flow ----

CouplingFlow::CouplingFlow(int dim, int cond_dim, FlowArch arch)
    : dim_(dim), cond_dim_(cond_dim), arch_(arch) {
  if (dim < 1) throw ConfigError("flow dimension must be positive");
  if (cond_dim < 0) throw ConfigError("condition dimension must be non-negative");
  if (arch.blocks < 1 || arch.hidden < 1 || arch.layers < 1 || !(arch.clamp > 0))
    throw ConfigError("invalid flow architecture");
  const int upper = (dim + 1) / 2;
  for (int k = 0; k < arch.blocks; ++k) {
    Block b;
    for (int i = 0; i < dim; ++i) {
      const bool first_half = i < upper;
      const bool fixed = dim > 1 && ((k % 2 == 0) == first_half);
      (fixed ? b.fixed : b.moved).push_back(i);
    }
    const int in = static_cast<int>(b.fixed.size()) + cond_dim;
    const int out = static_cast<int>(b.moved.size());
    const std::string tag = "flow.block" + std::to_string(k);
    for (auto* net : {&b.scale, &b.shift}) {
      const std::string name = tag + (net == &b.scale ? ".s" : ".t");
      int width = in;
      for (int l = 0; l < arch.layers; ++l) {
        net->layers.emplace_back(name + std::to_string(l), width, arch.hidden, nn::Activation::tanh);
        width = arch.hidden;
      }
      net->layers.emplace_back(name + "out", width, out, nn::Activation::identity);
    }
    blocks_.push_back(std::move(b));
  }
}

void CouplingFlow::init(Rng& rng) {
  for (Block& b : blocks_)
    for (auto* net : {&b.scale, &b.shift}) {
      for (std::size_t l = 0; l + 1 < net->layers.size(); ++l) net->layers[l].init(rng);
      net->layers.back().weight.value.setZero();
      net->layers.back().bias.value.setZero();
    }
}

Mat CouplingFlow::conditioner_input(const Mat& x, const Block& b, const Mat& cond) const {
  Mat in(b.fixed.size() + cond.rows(), x.cols());
  for (std::size_t i = 0; i < b.fixed.size(); ++i) in.row(i) = x.row(b.fixed[i]);
  if (cond.rows()) in.bottomRows(cond.rows()) = cond;
  return in;
}

namespace {
void check_shapes(const Mat& x, const Mat& cond, int dim, int cond_dim) {
  if (x.rows() != dim || cond.rows() != cond_dim || x.cols() != cond.cols())
    throw InvalidInput("flow expects " + std::to_string(dim) + "x B inputs and " +
                       std::to_string(cond_dim) + "x B conditions, got " +
                       std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " and " +
                       std::to_string(cond.rows()) + "x" + std::to_string(cond.cols()));
}
}  // namespace

CouplingFlow::Output CouplingFlow::forward(const Mat& x, const Mat& cond, Trace* tr) const {
  check_shapes(x, cond, dim_, cond_dim_);
  if (!x.allFinite()) throw NumericError("non-finite flow input");
  Output out{x, RowVec::Zero(x.cols())};
  if (tr) tr->blocks.assign(blocks_.size(), {});
  const double c = arch_.clamp;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const Block& b = blocks_[k];
    const Mat in = conditioner_input(out.z, b, cond);
    BlockTrace* bt = tr ? &tr->blocks[k] : nullptr;
    const Mat s_raw = b.scale.forward(in, bt ? &bt->scale : nullptr);
    const Mat t = b.shift.forward(in, bt ? &bt->shift : nullptr);
    const Mat s = c * (s_raw.array() / c).tanh();
    Mat xm(b.moved.size(), x.cols());
    for (std::size_t i = 0; i < b.moved.size(); ++i) xm.row(i) = out.z.row(b.moved[i]);
    const Mat ym = xm.array() * s.array().exp() + t.array();
    for (std::size_t i = 0; i < b.moved.size(); ++i) out.z.row(b.moved[i]) = ym.row(i);
    out.logdet += s.colwise().sum();
    if (!ym.allFinite() || !s.allFinite())
      throw NumericError("non-finite activation in coupling block " + std::to_string(k));
    if (bt) {
      bt->x_moved = std::move(xm);
      bt->s = s;
    }
  }
  return out;
}

Mat CouplingFlow::inverse(const Mat& z, const Mat& cond) const {
  check_shapes(z, cond, dim_, cond_dim_);
  if (!z.allFinite()) throw NumericError("non-finite flow latent input");
  Mat x = z;
  const double c = arch_.clamp;
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    const Block& b = blocks_[k];
    const Mat in = conditioner_input(x, b, cond);
    const Mat s = c * (b.scale.forward(in, nullptr).array() / c).tanh();
    const Mat t = b.shift.forward(in, nullptr);
    for (std::size_t i = 0; i < b.moved.size(); ++i) {
      const int r = b.moved[i];
      x.row(r) = ((x.row(r).array() - t.row(i).array()) * (-s.row(i).array()).exp()).matrix();
    }
    if (!x.allFinite())
      throw NumericError("non-finite activation in coupling block " + std::to_string(k));
  }
  return x;
}

Mat CouplingFlow::backward(const Mat& dz, const RowVec& dlogdet, const Trace& tr) {
  Mat dx = dz;
  Mat dcond = Mat::Zero(cond_dim_, dz.cols());
  const double c = arch_.clamp;
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    Block& b = blocks_[k];
    const BlockTrace& bt = tr.blocks[k];
    const Eigen::Index m = static_cast<Eigen::Index>(b.moved.size());
    Mat dym(m, dz.cols());
    for (Eigen::Index i = 0; i < m; ++i) dym.row(i) = dx.row(b.moved[i]);
    const Eigen::ArrayXXd es = bt.s.array().exp();
    Mat ds = dym.array() * bt.x_moved.array() * es;
    ds.rowwise() += dlogdet;
    const Mat ds_raw = ds.array() * (1.0 - (bt.s.array() / c).square());
    const Mat dxm = dym.array() * es;
    for (Eigen::Index i = 0; i < m; ++i) dx.row(b.moved[i]) = dxm.row(i);
    const Mat din = b.scale.backward(ds_raw, bt.scale) + b.shift.backward(dym, bt.shift);
    for (std::size_t i = 0; i < b.fixed.size(); ++i) dx.row(b.fixed[i]) += din.row(i);
    if (cond_dim_) dcond += din.bottomRows(cond_dim_);
  }
  return dcond;
}

double CouplingFlow::loss(const Output& out) {
  const double n = static_cast<double>(out.z.cols());
  return (0.5 * out.z.colwise().squaredNorm() - out.logdet).sum() / n;
}

double CouplingFlow::loss_and_backward(const Mat& x, const Mat& cond, Mat* dcond) {
  Trace tr;
  const Output out = forward(x, cond, &tr);
  const double n = static_cast<double>(x.cols());
  const Mat dz = out.z / n;
  const RowVec dl = RowVec::Constant(x.cols(), -1.0 / n);
  Mat dc = backward(dz, dl, tr);
  if (dcond) *dcond = std::move(dc);
  return loss(out);
}

void CouplingFlow::collect(nn::ParamList& out) {
  for (Block& b : blocks_)
    for (auto* net : {&b.scale, &b.shift})
      for (auto& l : net->layers) l.collect(out);
}

void CouplingFlow::collect(nn::ConstParamList& out) const {
  for (const Block& b : blocks_)
    for (const auto* net : {&b.scale, &b.shift})
      for (const auto& l : net->layers) l.collect(out);
}

}  // namespace stpot
