#pragma once

#include <vector>

#include "stpot/model.hpp"
#include "stpot/nn.hpp"

namespace stpot {

// Map between a prior support and the real line.
struct SupportTransform {
  enum class Kind { bounded, gaussian };
  Kind kind = Kind::gaussian;
  double a = 0.0;  // lo or mean
  double b = 1.0;  // hi or sd

  static SupportTransform bounded(double lo, double hi);
  static SupportTransform gaussian(double mean, double sd);
  static SupportTransform from_prior(const Prior& p);

  double forward(double theta) const;
  // Bounded images are kept strictly inside (lo, hi).
  double inverse(double u) const;
};

Mat transform_forward(const std::vector<SupportTransform>& ts, const Mat& theta);
Mat transform_inverse(const std::vector<SupportTransform>& ts, const Mat& u);

struct FlowArch {
  int blocks = 6;
  int hidden = 64;
  int layers = 2;
  double clamp = 3.0;
};

// Conditional affine coupling flow. Inputs are D x B, conditions C x B.
class CouplingFlow {
 public:
  struct Output {
    Mat z;
    RowVec logdet;
  };

  struct Conditioner {
    std::vector<nn::Dense> layers;
    Mat forward(const Mat& in, std::vector<nn::Dense::Trace>* tr) const;
    Mat backward(const Mat& dout, const std::vector<nn::Dense::Trace>& tr);
  };

  struct Block {
    std::vector<int> fixed, moved;
    Conditioner scale, shift;
  };

  struct BlockTrace {
    Mat x_moved, s;  // s is the clamped log-scale
    std::vector<nn::Dense::Trace> scale, shift;
  };
  struct Trace {
    std::vector<BlockTrace> blocks;
  };

  CouplingFlow() = default;
  CouplingFlow(int dim, int cond_dim, FlowArch arch = {});

  // Glorot hidden layers; output layers zero so a fresh flow is the identity.
  void init(Rng& rng);

  Output forward(const Mat& x, const Mat& cond, Trace* tr = nullptr) const;
  Mat inverse(const Mat& z, const Mat& cond) const;
  // Accumulates weight gradients; returns d(loss)/d(cond).
  Mat backward(const Mat& dz, const RowVec& dlogdet, const Trace& tr);

  // Mean over columns of 0.5 * |z|^2 - logdet.
  static double loss(const Output& out);
  // Forward, loss and backward in one call.
  double loss_and_backward(const Mat& x, const Mat& cond, Mat* dcond);

  void collect(nn::ParamList& out);
  void collect(nn::ConstParamList& out) const;

  int dim() const { return dim_; }
  int cond_dim() const { return cond_dim_; }
  const FlowArch& arch() const { return arch_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::vector<Block>& blocks() { return blocks_; }

 private:
  Mat conditioner_input(const Mat& x, const Block& b, const Mat& cond) const;
  int dim_ = 0, cond_dim_ = 0;
  FlowArch arch_;
  std::vector<Block> blocks_;
};

}  // namespace stpot
