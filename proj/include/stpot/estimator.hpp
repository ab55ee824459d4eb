#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "stpot/flow.hpp"
#include "stpot/summary.hpp"

namespace stpot {

// Summary network + conditional flow + support transforms for one parameter block.
class Estimator {
 public:
  Estimator() = default;
  Estimator(SummaryArch summary_arch, FlowArch flow_arch, std::vector<SupportTransform> transforms,
            std::vector<std::string> target_names, std::uint64_t seed);

  // theta: D x B in the constrained space; one input per column.
  double loss(const std::vector<const Mat*>& inputs, const Mat& theta) const;
  // Accumulates gradients into all parameters and returns the batch loss.
  double loss_and_grad(const std::vector<const Mat*>& inputs, const Mat& theta);

  Mat summarize(const Mat& input) const { return summary.forward(input); }
  // Posterior draws (D x L) for one dataset given latent codes z (D x L).
  Mat sample(const Mat& input, const Mat& z) const;
  Mat sample_from_summary(const Vec& cond, const Mat& z) const;
  Mat sample(const Mat& input, int count, Rng& rng) const;

  nn::ParamList params();
  nn::ConstParamList params() const;
  int dim() const { return flow.dim(); }

  // Binary container: magic, JSON header, raw little-endian float64 tensors.
  void save(const std::string& path) const;
  static Estimator load(const std::string& path);
  nlohmann::json header() const;

  SummaryNet summary;
  CouplingFlow flow;
  std::vector<SupportTransform> transforms;
  std::vector<std::string> target_names;
  std::uint64_t seed = 0;
  std::string role, variant, covmodel;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json transform_to_json(const SupportTransform& t);
SupportTransform transform_from_json(const nlohmann::json& j);

}  // namespace stpot
