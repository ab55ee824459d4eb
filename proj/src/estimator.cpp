#include "stpot/estimator.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "stpot/errors.hpp"

namespace stpot {

namespace {
constexpr char kMagic[8] = {'S', 'T', 'P', 'O', 'T', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
}  // namespace

Estimator::Estimator(SummaryArch summary_arch, FlowArch flow_arch,
                     std::vector<SupportTransform> ts, std::vector<std::string> names,
                     std::uint64_t s)
    : summary(summary_arch),
      flow(static_cast<int>(ts.size()), summary_arch.n_dense, flow_arch),
      transforms(std::move(ts)),
      target_names(std::move(names)),
      seed(s) {
  if (target_names.size() != transforms.size())
    throw ConfigError("target names and support transforms differ in length");
  Rng rng = Rng::substream(seed, stream::weights);
  summary.init(rng);
  flow.init(rng);
}

double Estimator::loss(const std::vector<const Mat*>& inputs, const Mat& theta) const {
  const Mat cond = summary.forward(inputs);
  return CouplingFlow::loss(flow.forward(transform_forward(transforms, theta), cond));
}

double Estimator::loss_and_grad(const std::vector<const Mat*>& inputs, const Mat& theta) {
  SummaryNet::Trace st;
  const Mat cond = summary.forward(inputs, &st);
  Mat dcond;
  const double l = flow.loss_and_backward(transform_forward(transforms, theta), cond, &dcond);
  summary.backward(dcond, st);
  return l;
}

Mat Estimator::sample_from_summary(const Vec& cond, const Mat& z) const {
  const Mat c = cond.replicate(1, z.cols());
  return transform_inverse(transforms, flow.inverse(z, c));
}

Mat Estimator::sample(const Mat& input, const Mat& z) const {
  return sample_from_summary(summary.forward(input).col(0), z);
}

Mat Estimator::sample(const Mat& input, int count, Rng& rng) const {
  Mat z(dim(), count);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return sample(input, z);
}

nn::ParamList Estimator::params() {
  nn::ParamList out;
  summary.collect(out);
  flow.collect(out);
  return out;
}

nn::ConstParamList Estimator::params() const {
  nn::ConstParamList out;
  summary.collect(out);
  flow.collect(out);
  return out;
}

nlohmann::json transform_to_json(const SupportTransform& t) {
  if (t.kind == SupportTransform::Kind::bounded) return {{"kind", "bounded"}, {"lo", t.a}, {"hi", t.b}};
  return {{"kind", "gaussian"}, {"mean", t.a}, {"sd", t.b}};
}

SupportTransform transform_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  if (kind == "bounded") return SupportTransform::bounded(j.at("lo"), j.at("hi"));
  if (kind == "gaussian") return SupportTransform::gaussian(j.at("mean"), j.at("sd"));
  throw ConfigError("unknown support transform '" + kind + "'");
}

nlohmann::json Estimator::header() const {
  using nlohmann::json;
  const SummaryArch& a = summary.arch();
  json h;
  h["format_version"] = kFormatVersion;
  h["role"] = role;
  h["variant"] = variant;
  h["covmodel"] = covmodel;
  h["seed"] = seed;
  h["summary"] = {{"kind", to_string(a.kind)}, {"n_lstm", a.n_lstm},   {"n_dense", a.n_dense},
                  {"columns", a.columns},      {"log_columns", a.log_columns},
                  {"d1", a.d1},                {"d2", a.d2},           {"conv1", a.conv1},
                  {"conv2", a.conv2}, {"mean_pool", a.mean_pool}};
  auto as_list = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  h["input_scaling"] = {{"shift", as_list(summary.scaling.shift)},
                        {"scale", as_list(summary.scaling.scale)},
                        {"stat_shift", as_list(summary.scaling.stat_shift)},
                        {"stat_scale", as_list(summary.scaling.stat_scale)}};
  const FlowArch& f = flow.arch();
  h["flow"] = {{"dim", flow.dim()},       {"cond_dim", flow.cond_dim()}, {"blocks", f.blocks},
               {"hidden", f.hidden},      {"layers", f.layers},          {"clamp", f.clamp}};
  json targets = json::array();
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    json t = transform_to_json(transforms[i]);
    t["name"] = target_names[i];
    targets.push_back(t);
  }
  h["targets"] = targets;
  json tensors = json::array();
  for (const nn::Param* p : params())
    tensors.push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}});
  h["tensors"] = tensors;
  h["extra"] = extra;
  return h;
}

void Estimator::save(const std::string& path) const {
  const std::string text = header().dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const nn::Param* p : params())
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Estimator Estimator::load(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError(path + " is not a checkpoint file");
  if (len > (1u << 30)) throw DataError("corrupt checkpoint header in " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header in " + path);

  json h;
  try {
    h = json::parse(text);
    if (h.at("format_version").get<int>() != kFormatVersion)
      throw DataError("unsupported checkpoint version in " + path);
    const json& s = h.at("summary");
    SummaryArch a;
    a.kind = summary_kind_from_string(s.at("kind"));
    a.n_lstm = s.at("n_lstm");
    a.n_dense = s.at("n_dense");
    a.columns = s.at("columns");
    a.log_columns = s.at("log_columns");
    a.d1 = s.at("d1");
    a.d2 = s.at("d2");
    a.conv1 = s.at("conv1");
    a.conv2 = s.at("conv2");
    a.mean_pool = s.at("mean_pool");
    const json& f = h.at("flow");
    FlowArch fa{f.at("blocks"), f.at("hidden"), f.at("layers"), f.at("clamp")};
    std::vector<SupportTransform> ts;
    std::vector<std::string> names;
    for (const json& t : h.at("targets")) {
      ts.push_back(transform_from_json(t));
      names.push_back(t.at("name"));
    }
    Estimator e(a, fa, ts, names, h.at("seed").get<std::uint64_t>());
    if (e.flow.cond_dim() != f.at("cond_dim").get<int>() || e.flow.dim() != f.at("dim").get<int>())
      throw DataError("checkpoint flow shape is inconsistent in " + path);
    const json& sc = h.at("input_scaling");
    auto read_vec = [&](const char* key, const Vec& like) {
      const auto v = sc.at(key).get<std::vector<double>>();
      if (v.size() != static_cast<std::size_t>(like.size()))
        throw DataError(std::string("checkpoint input scaling '") + key + "' has the wrong length in " + path);
      return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    e.summary.scaling.shift = read_vec("shift", e.summary.scaling.shift);
    e.summary.scaling.scale = read_vec("scale", e.summary.scaling.scale);
    e.summary.scaling.stat_shift = read_vec("stat_shift", e.summary.scaling.stat_shift);
    e.summary.scaling.stat_scale = read_vec("stat_scale", e.summary.scaling.stat_scale);
    e.role = h.at("role");
    e.variant = h.at("variant");
    e.covmodel = h.at("covmodel");
    e.extra = h.at("extra");

    const auto ps = e.params();
    const json& tensors = h.at("tensors");
    if (tensors.size() != ps.size()) throw DataError("checkpoint tensor count mismatch in " + path);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const json& t = tensors[k];
      if (t.at("name") != ps[k]->name || t.at("shape")[0].get<Eigen::Index>() != ps[k]->value.rows() ||
          t.at("shape")[1].get<Eigen::Index>() != ps[k]->value.cols())
        throw DataError("checkpoint tensor '" + t.at("name").get<std::string>() +
                        "' does not match the architecture in " + path);
      in.read(reinterpret_cast<char*>(ps[k]->value.data()),
              static_cast<std::streamsize>(ps[k]->value.size() * sizeof(double)));
      if (!in) throw DataError("truncated checkpoint tensor data in " + path);
    }
    return e;
  } catch (const json::exception& ex) {
    throw DataError("malformed checkpoint header in " + path + ": " + ex.what());
  }
}

}  // namespace stpot
