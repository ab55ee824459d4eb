#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stpot/model.hpp"
#include "stpot/nn.hpp"

namespace stpot {

enum class SummaryKind { ralpha, rx };

const char* to_string(SummaryKind k);
SummaryKind summary_kind_from_string(const std::string& s);

struct SummaryArch {
  SummaryKind kind = SummaryKind::ralpha;
  int n_lstm = 128;
  int n_dense = 128;
  int columns = 1;  // features per time step
  int log_columns = 0;  // leading columns that enter on the log scale
  int d1 = 0, d2 = 0;  // rx grid
  int conv1 = 32, conv2 = 64;
  bool mean_pool = true;  // average the last recurrent layer over time instead of taking its final state

  static SummaryArch ralpha(int d, int c, int n_lstm, int n_dense);
  static SummaryArch rx(int d1, int d2, int n_lstm, int n_dense);
};

// Scenario capacities (n_lstm, n_dense), 1-based scenario index.
std::pair<int, int> scenario_capacity(int scenario);

// Per-column affine standardization applied after the log transform (and per-dataset
// normalization); stat_* standardize the per-dataset location/scale features.
struct InputScaling {
  Vec shift, scale;
  Vec stat_shift, stat_scale;
};

// n x d1 x d2 x 1 tensor stored as n x d with site index i * d2 + j.
struct RxInput {
  Mat frames;
  int d1 = 0, d2 = 0;

  double at(int t, int i, int j) const { return frames(t, i * d2 + j); }
  int steps() const { return static_cast<int>(frames.rows()); }
  const Mat& flatten() const { return frames; }
};

// Hyperparameter columns appended to the censored panel, in canonical latent-block order.
std::vector<std::string> ralpha_hyper_names(const FactorVariant& variant);

Mat assemble_ralpha_input(const CensoredPanel& censored, const Vec& theta_x,
                          const FactorVariant& variant);
RxInput assemble_rx_input(const Mat& ratio, int d1, int d2);

std::vector<std::pair<int, int>> grid_factorizations(int d);
// Most square factorization with both sides at least 2.
std::pair<int, int> default_grid(int d);

class SummaryNet {
 public:
  struct Trace {
    int steps = 0, batch = 0;
    Mat features, stats;
    nn::Conv2d::Trace conv1, conv2;
    nn::Lstm::Trace lstm1, lstm2;
    nn::Dense::Trace dense1, dense2;
  };

  SummaryNet() = default;
  explicit SummaryNet(SummaryArch arch);

  void init(Rng& rng);
  // Fits the input standardization on a reference batch (typically the held-out set).
  void fit_scaling(const std::vector<const Mat*>& inputs);

  // Every input is n x columns with the same n. Returns n_dense x B.
  Mat forward(const std::vector<const Mat*>& inputs, Trace* tr = nullptr) const;
  Mat forward(const Mat& input) const { return forward(std::vector<const Mat*>{&input}); }
  void backward(const Mat& dsummary, Trace& tr);

  void collect(nn::ParamList& out);
  void collect(nn::ConstParamList& out) const;

  const SummaryArch& arch() const { return arch_; }
  int output_size() const { return arch_.n_dense; }
  // Log-scale columns are normalized per dataset; each normalization group (all cells for
  // rx, one per log column otherwise) contributes its mean and log sd next to the
  // recurrent summary.
  int stat_groups() const;
  int n_stats() const { return 2 * stat_groups(); }
  InputScaling scaling;

  // Layer shapes as (name, output shape) for a given number of time steps.
  std::vector<std::pair<std::string, std::vector<int>>> layer_shapes(int n) const;

 private:
  Mat features(const std::vector<const Mat*>& inputs, Mat* stats) const;
  SummaryArch arch_;
  nn::Conv2d conv1_, conv2_;
  nn::Lstm lstm1_, lstm2_;
  nn::Dense dense1_, dense2_;
};

}  // namespace stpot
