#pragma once

#include <string>
#include <vector>

#include "stpot/linalg.hpp"
#include "stpot/rng.hpp"

// Minimal layer library with explicit reverse-mode backward passes.
//
// Batched activations are stored feature-major: a matrix with one column per
// example. Sequences of `steps` time points for `batch` examples are stored as
// features x (steps * batch) with column index t * batch + b.
namespace stpot::nn {

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamList = std::vector<Param*>;
using ConstParamList = std::vector<const Param*>;

enum class Activation { identity, relu, elu, tanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

void glorot_uniform(Mat& w, double fan_in, double fan_out, Rng& rng);
// Columns orthonormal (rows when the matrix is wide).
void orthogonal(Mat& w, Rng& rng);

class Dense {
 public:
  struct Trace {
    Mat input, pre, out;
  };

  Dense() = default;
  Dense(const std::string& name, int in, int out, Activation act);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, Trace& tr) const;
  // Accumulates parameter gradients; returns d(loss)/d(input) when need_dx.
  Mat backward(const Mat& dout, const Trace& tr, bool need_dx = true);

  void init(Rng& rng);
  void collect(ParamList& out);
  void collect(ConstParamList& out) const;
  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }

  Param weight, bias;
  Activation act = Activation::identity;
};

// Gate order: input, forget, cell candidate, output.
class Lstm {
 public:
  struct Trace {
    Mat x;       // in x (T*B)
    Mat gates;   // 4H x (T*B), post-activation
    Mat cell;    // H x (T*B)
    Mat hidden;  // H x (T*B)
    int steps = 0, batch = 0;
  };

  Lstm() = default;
  Lstm(const std::string& name, int in, int hidden);

  // Returns H x (T*B) when `sequences`, else the last hidden state H x B.
  Mat forward(const Mat& x, int steps, bool sequences, Trace* tr = nullptr) const;
  Mat backward(const Mat& dout, const Trace& tr, bool sequences, bool need_dx);

  void init(Rng& rng);
  void collect(ParamList& out);
  void collect(ConstParamList& out) const;
  int in() const { return static_cast<int>(kernel.value.cols()); }
  int hidden() const { return static_cast<int>(recurrent.value.cols()); }

  Param kernel, recurrent, bias;
};

// 3x3 convolution, stride 1, "same" zero padding, ReLU, applied independently to
// every frame. Activations are channels x (pixels * frames), column f * P + p with
// pixel p = i * width + j.
class Conv2d {
 public:
  struct Trace {
    Mat x, pre;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int height, int width);

  Mat forward(const Mat& x, Trace* tr = nullptr) const;
  Mat backward(const Mat& dout, const Trace& tr, bool need_dx);

  void init(Rng& rng);
  void collect(ParamList& out);
  void collect(ConstParamList& out) const;
  int in_channels() const { return in_ch_; }
  int out_channels() const { return static_cast<int>(kernel.value.rows()); }
  int pixels() const { return height_ * width_; }

  Param kernel, bias;

 private:
  void im2col(const Mat& x, Eigen::Index frame0, Eigen::Index frames, Mat& col) const;
  void col2im_add(const Mat& col, Eigen::Index frame0, Eigen::Index frames, Mat& dx) const;
  int in_ch_ = 1, height_ = 1, width_ = 1;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  double clip_norm = 5.0;
};

class Adam {
 public:
  Adam(ParamList params, AdamConfig cfg = {});
  // Clips the global gradient norm, applies one update and returns the pre-clip norm.
  double step(double lr);
  long steps() const { return t_; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

double grad_norm(const ParamList& params);
void zero_grads(const ParamList& params);

}  // namespace stpot::nn
