#include "stpot/summary.hpp"

#include <cmath>

#include "stpot/errors.hpp"

namespace stpot {

const char* to_string(SummaryKind k) { return k == SummaryKind::ralpha ? "ralpha" : "rx"; }

SummaryKind summary_kind_from_string(const std::string& s) {
  if (s == "ralpha") return SummaryKind::ralpha;
  if (s == "rx") return SummaryKind::rx;
  throw ConfigError("unknown summary network kind '" + s + "'");
}

SummaryArch SummaryArch::ralpha(int d, int c, int n_lstm, int n_dense) {
  SummaryArch a;
  a.kind = SummaryKind::ralpha;
  a.columns = d + c;
  a.log_columns = d;
  a.n_lstm = n_lstm;
  a.n_dense = n_dense;
  return a;
}

SummaryArch SummaryArch::rx(int d1, int d2, int n_lstm, int n_dense) {
  SummaryArch a;
  a.kind = SummaryKind::rx;
  a.d1 = d1;
  a.d2 = d2;
  a.columns = d1 * d2;
  a.log_columns = d1 * d2;
  a.n_lstm = n_lstm;
  a.n_dense = n_dense;
  return a;
}

std::pair<int, int> scenario_capacity(int scenario) {
  switch (scenario) {
    case 1: return {128, 128};
    case 2: return {1024, 128};
    case 3: return {128, 1024};
    case 4: return {1024, 1024};
    case 5: return {1000, 2000};
  }
  throw ConfigError("scenario must be 1-5, got " + std::to_string(scenario));
}

std::vector<std::string> ralpha_hyper_names(const FactorVariant& variant) {
  return ParameterLayout(variant, CovariateModel::from_name("M1")).x_names();
}

Mat assemble_ralpha_input(const CensoredPanel& censored, const Vec& theta_x,
                          const FactorVariant& variant) {
  const auto names = ralpha_hyper_names(variant);
  if (theta_x.size() != static_cast<Eigen::Index>(names.size()))
    throw ConfigError("variant " + variant.name + " expects " + std::to_string(names.size()) +
                      " latent-block values, got " + std::to_string(theta_x.size()));
  const Eigen::Index n = censored.values.rows(), d = censored.values.cols();
  Mat out(n, d + theta_x.size());
  out.leftCols(d) = censored.values;
  for (Eigen::Index k = 0; k < theta_x.size(); ++k) out.col(d + k).setConstant(theta_x(k));
  return out;
}

std::vector<std::pair<int, int>> grid_factorizations(int d) {
  std::vector<std::pair<int, int>> out;
  for (int a = 1; a <= d; ++a)
    if (d % a == 0) out.emplace_back(a, d / a);
  return out;
}

namespace {
std::string describe_factorizations(int d) {
  std::string s;
  for (auto [a, b] : grid_factorizations(d)) {
    if (a < 2 || b < 2) continue;
    if (!s.empty()) s += ", ";
    s += std::to_string(a) + "x" + std::to_string(b);
  }
  return s.empty() ? "none with both sides >= 2" : s;
}
}  // namespace

std::pair<int, int> default_grid(int d) {
  std::pair<int, int> best{0, 0};
  for (auto [a, b] : grid_factorizations(d))
    if (a >= 2 && b >= 2 && a <= b) best = {a, b};
  if (best.first == 0)
    throw ConfigError("d = " + std::to_string(d) +
                      " has no grid factorization d1 x d2 with both sides >= 2");
  return best;
}

RxInput assemble_rx_input(const Mat& ratio, int d1, int d2) {
  const int d = static_cast<int>(ratio.cols());
  if (d1 < 1 || d2 < 1 || d1 * d2 != d)
    throw ConfigError("cannot reshape d = " + std::to_string(d) + " sites into " +
                      std::to_string(d1) + "x" + std::to_string(d2) +
                      "; valid factorizations: " + describe_factorizations(d));
  return RxInput{ratio, d1, d2};
}

// ---- SummaryNet ----

SummaryNet::SummaryNet(SummaryArch arch) : arch_(arch) {
  if (arch.n_lstm < 1 || arch.n_dense < 1 || arch.columns < 1 || arch.log_columns < 0 ||
      arch.log_columns > arch.columns)
    throw ConfigError("invalid summary network shape");
  int lstm_in = arch.columns;
  if (arch.kind == SummaryKind::rx) {
    if (arch.d1 * arch.d2 != arch.columns) throw ConfigError("rx grid does not match column count");
    conv1_ = nn::Conv2d("rx.conv1", 1, arch.conv1, arch.d1, arch.d2);
    conv2_ = nn::Conv2d("rx.conv2", arch.conv1, arch.conv2, arch.d1, arch.d2);
    lstm_in = arch.conv2 * arch.d1 * arch.d2;
    scaling = {Vec::Zero(1), Vec::Ones(1), {}, {}};
  } else {
    scaling = {Vec::Zero(arch.columns), Vec::Ones(arch.columns), {}, {}};
  }
  scaling.stat_shift = Vec::Zero(n_stats());
  scaling.stat_scale = Vec::Ones(n_stats());
  const std::string tag = to_string(arch.kind);
  lstm1_ = nn::Lstm(tag + ".lstm1", lstm_in, arch.n_lstm);
  lstm2_ = nn::Lstm(tag + ".lstm2", arch.n_lstm, arch.n_lstm);
  dense1_ = nn::Dense(tag + ".dense1", arch.n_lstm + n_stats(), arch.n_dense, nn::Activation::relu);
  dense2_ = nn::Dense(tag + ".dense2", arch.n_dense, arch.n_dense, nn::Activation::elu);
}

void SummaryNet::init(Rng& rng) {
  if (arch_.kind == SummaryKind::rx) {
    conv1_.init(rng);
    conv2_.init(rng);
  }
  lstm1_.init(rng);
  lstm2_.init(rng);
  dense1_.init(rng);
  dense2_.init(rng);
}

namespace {

void check_batch(const std::vector<const Mat*>& inputs, int columns) {
  if (inputs.empty()) throw InvalidInput("empty summary batch");
  const Eigen::Index n = inputs[0]->rows();
  if (n < 1) throw InvalidInput("summary input has no time steps");
  for (const Mat* m : inputs) {
    if (m->rows() != n || m->cols() != columns)
      throw InvalidInput("summary input shape " + std::to_string(m->rows()) + "x" +
                         std::to_string(m->cols()) + " does not match " + std::to_string(n) + "x" +
                         std::to_string(columns));
    if (!m->allFinite()) throw NumericError("non-finite summary network input");
  }
}

double log_checked(double v) {
  if (!(v > 0.0)) throw NumericError("summary network expects positive data, got " + std::to_string(v));
  return std::log(v);
}

}  // namespace

int SummaryNet::stat_groups() const { return arch_.kind == SummaryKind::rx ? 1 : arch_.log_columns; }

namespace {

constexpr double kMinSd = 1e-6;

// Per-dataset mean and sd of the log values in each normalization group.
void group_moments(const Mat& m, int groups, bool pooled, Vec& mean, Vec& sd) {
  mean = Vec::Zero(groups);
  sd = Vec::Zero(groups);
  if (groups == 0) return;
  const Eigen::Index cols = pooled ? m.cols() : groups;
  const double count = static_cast<double>(pooled ? m.size() : m.rows());
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index t = 0; t < m.rows(); ++t) mean(pooled ? 0 : j) += log_checked(m(t, j));
  mean /= count;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      const Eigen::Index g = pooled ? 0 : j;
      const double dv = std::log(m(t, j)) - mean(g);
      sd(g) += dv * dv;
    }
  sd = (sd / count).cwiseSqrt().cwiseMax(kMinSd);
}

}  // namespace

// Raw features before global standardization; `stats` receives n_stats x B.
Mat SummaryNet::features(const std::vector<const Mat*>& inputs, Mat* stats) const {
  check_batch(inputs, arch_.columns);
  const Eigen::Index n = inputs[0]->rows();
  const Eigen::Index b = static_cast<Eigen::Index>(inputs.size());
  const int groups = stat_groups();
  const bool rx = arch_.kind == SummaryKind::rx;
  if (stats) stats->resize(2 * groups, b);
  Mat f = rx ? Mat(1, arch_.columns * n * b) : Mat(arch_.columns, n * b);
  Vec mean, sd;
  for (Eigen::Index k = 0; k < b; ++k) {
    const Mat& m = *inputs[k];
    group_moments(m, groups, rx, mean, sd);
    if (stats) {
      stats->col(k).head(groups) = mean;
      stats->col(k).tail(groups) = sd.array().log().matrix();
    }
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index j = 0; j < arch_.columns; ++j) {
        if (rx) {
          f(0, (t * b + k) * arch_.columns + j) = (std::log(m(t, j)) - mean(0)) / sd(0);
        } else {
          f(j, t * b + k) = j < arch_.log_columns ? (std::log(m(t, j)) - mean(j)) / sd(j) : m(t, j);
        }
      }
  }
  return f;
}

void SummaryNet::fit_scaling(const std::vector<const Mat*>& inputs) {
  Mat stats;
  const Mat f = features(inputs, &stats);
  auto moments = [](const Mat& rows, Vec& shift, Vec& scale) {
    shift = rows.rowwise().mean();
    scale.resize(rows.rows());
    for (Eigen::Index g = 0; g < rows.rows(); ++g) {
      const double var = (rows.row(g).array() - shift(g)).square().mean();
      scale(g) = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
  };
  moments(f, scaling.shift, scaling.scale);
  moments(stats, scaling.stat_shift, scaling.stat_scale);
}

Mat SummaryNet::forward(const std::vector<const Mat*>& inputs, Trace* tr) const {
  const int n = static_cast<int>(inputs.at(0)->rows());
  const int b = static_cast<int>(inputs.size());
  Mat stats;
  Mat f = features(inputs, &stats);
  if (arch_.kind == SummaryKind::rx) {
    f = ((f.array() - scaling.shift(0)) / scaling.scale(0)).matrix();
  } else {
    f = ((f.colwise() - scaling.shift).array().colwise() / scaling.scale.array()).matrix();
  }
  stats = ((stats.colwise() - scaling.stat_shift).array().colwise() / scaling.stat_scale.array()).matrix();
  Mat seq;
  if (arch_.kind == SummaryKind::rx) {
    const Mat c1 = conv1_.forward(f, tr ? &tr->conv1 : nullptr);
    const Mat c2 = conv2_.forward(c1, tr ? &tr->conv2 : nullptr);
    // channels x (pixels * frames) viewed as (pixels * channels) x frames
    seq = Eigen::Map<const Mat>(c2.data(), c2.rows() * arch_.columns, n * b);
  } else {
    seq = std::move(f);
  }
  const Mat h1 = lstm1_.forward(seq, n, true, tr ? &tr->lstm1 : nullptr);
  Mat h2 = lstm2_.forward(h1, n, arch_.mean_pool, tr ? &tr->lstm2 : nullptr);
  if (arch_.mean_pool) {
    Mat pooled = Mat::Zero(h2.rows(), b);
    for (int t = 0; t < n; ++t) pooled += h2.middleCols(static_cast<Eigen::Index>(t) * b, b);
    h2 = pooled / static_cast<double>(n);
  }
  Mat joint(h2.rows() + stats.rows(), b);
  joint << h2, stats;
  Mat out = tr ? dense2_.forward(dense1_.forward(joint, tr->dense1), tr->dense2)
               : dense2_.forward(dense1_.forward(joint));
  if (tr) {
    tr->steps = n;
    tr->batch = b;
  }
  if (!out.allFinite()) throw NumericError("non-finite summary network output");
  return out;
}

void SummaryNet::backward(const Mat& dsummary, Trace& tr) {
  const Mat d1 = dense2_.backward(dsummary, tr.dense2);
  const Mat dh2 = dense1_.backward(d1, tr.dense1).topRows(arch_.n_lstm);
  Mat dh1;
  if (arch_.mean_pool) {
    const Mat spread = (dh2 / static_cast<double>(tr.steps)).replicate(1, tr.steps);
    dh1 = lstm2_.backward(spread, tr.lstm2, true, true);
  } else {
    dh1 = lstm2_.backward(dh2, tr.lstm2, false, true);
  }
  const bool conv = arch_.kind == SummaryKind::rx;
  const Mat dseq = lstm1_.backward(dh1, tr.lstm1, true, conv);
  if (!conv) return;
  const Mat dc2 = Eigen::Map<const Mat>(dseq.data(), arch_.conv2, dseq.size() / arch_.conv2);
  const Mat dc1 = conv2_.backward(dc2, tr.conv2, true);
  conv1_.backward(dc1, tr.conv1, false);
}

void SummaryNet::collect(nn::ParamList& out) {
  if (arch_.kind == SummaryKind::rx) {
    conv1_.collect(out);
    conv2_.collect(out);
  }
  lstm1_.collect(out);
  lstm2_.collect(out);
  dense1_.collect(out);
  dense2_.collect(out);
}

void SummaryNet::collect(nn::ConstParamList& out) const {
  if (arch_.kind == SummaryKind::rx) {
    conv1_.collect(out);
    conv2_.collect(out);
  }
  lstm1_.collect(out);
  lstm2_.collect(out);
  dense1_.collect(out);
  dense2_.collect(out);
}

std::vector<std::pair<std::string, std::vector<int>>> SummaryNet::layer_shapes(int n) const {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  if (arch_.kind == SummaryKind::rx) {
    out.push_back({"input", {n, arch_.d1, arch_.d2, 1}});
    out.push_back({"conv2d", {n, arch_.d1, arch_.d2, arch_.conv1}});
    out.push_back({"conv2d", {n, arch_.d1, arch_.d2, arch_.conv2}});
    out.push_back({"flatten", {n, arch_.d1 * arch_.d2 * arch_.conv2}});
  } else {
    out.push_back({"input", {n, arch_.columns}});
  }
  out.push_back({"lstm", {n, arch_.n_lstm}});
  out.push_back({arch_.mean_pool ? "lstm_mean_pool" : "lstm", {arch_.n_lstm}});
  out.push_back({"concat_stats", {arch_.n_lstm + n_stats()}});
  out.push_back({"dense_relu", {arch_.n_dense}});
  out.push_back({"dense_elu", {arch_.n_dense}});
  return out;
}

}  // namespace stpot
