#include "lnn/netcore.hpp"

#include "lnn/random.hpp"

#include <fstream>

namespace lnn {

std::string to_string(Activation a) { return a == Activation::softplus ? "softplus" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  throw InvalidArgument("unknown activation '" + name + "'");
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void NetParams::validate() const {
  if (layers.empty()) throw InvalidArgument("NetParams: no layers");
  if (widths.size() != layers.size() + 1) throw InvalidArgument("NetParams: widths do not match layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.w.cols() != widths[l] || layer.w.rows() != widths[l + 1] || layer.b.size() != widths[l + 1])
      throw InvalidArgument("NetParams: layer " + std::to_string(l) + " shape does not chain");
    if (!layer.w.allFinite() || !layer.b.allFinite())
      throw InvalidArgument("NetParams: layer " + std::to_string(l) + " has non-finite values");
  }
}

NetParams NetParams::zeros_like() const {
  NetParams z = *this;
  for (auto& l : z.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  return z;
}

Vec NetParams::flatten() const {
  Vec flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    flat.segment(k, l.w.size()) = l.w.reshaped();
    k += l.w.size();
    flat.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  }
  return flat;
}

void NetParams::unflatten(const Vec& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
    throw InvalidArgument("NetParams::unflatten: size mismatch");
  Eigen::Index k = 0;
  for (auto& l : layers) {
    l.w.reshaped() = flat.segment(k, l.w.size());
    k += l.w.size();
    l.b = flat.segment(k, l.b.size());
    k += l.b.size();
  }
}

void InitSpec::validate() const {
  if (hidden < 1) throw InvalidArgument("InitSpec: hidden width must be >= 1");
  if (depth < 2) throw InvalidArgument("InitSpec: depth must be >= 2");
  if (input_width < 1 || output_width < 1) throw InvalidArgument("InitSpec: input/output width must be >= 1");
}

double init_stddev(int layer, int depth, int hidden) {
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(hidden));
  if (layer == 0) return 2.2 * inv_sqrt_n;
  if (layer == depth - 1) return hidden * inv_sqrt_n;
  return 0.58 * layer * inv_sqrt_n;
}

NetParams init_params(const InitSpec& spec) {
  spec.validate();
  NetParams p;
  p.seed = spec.seed;
  p.widths.push_back(spec.input_width);
  for (int l = 0; l + 1 < spec.depth; ++l) p.widths.push_back(spec.hidden);
  p.widths.push_back(spec.output_width);

  Rng rng(spec.seed);
  for (int l = 0; l < spec.depth; ++l) {
    const double sd = init_stddev(l, spec.depth, spec.hidden);
    Layer layer;
    layer.w.resize(p.widths[l + 1], p.widths[l]);
    // Row-major fill order so the draw sequence does not depend on storage order.
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = rng.normal(0.0, sd);
    layer.b = Vec::Zero(p.widths[l + 1]);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

double forward(const NetParams& p, const Vec& x) {
  if (p.output_width() != 1) throw InvalidArgument("forward: network output is not scalar");
  return forward_all<double>(p, std::span<const double>(x.data(), x.size()))[0];
}

Vec forward_vec(const NetParams& p, const Vec& x) {
  const auto out = forward_all<double>(p, std::span<const double>(x.data(), x.size()));
  return Eigen::Map<const Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

ScalarFn as_scalar_fn(const NetParams& p, int dof, int aux_dim) {
  p.validate();
  if (dof < 1 || aux_dim < 0) throw InvalidArgument("as_scalar_fn: bad arity");
  if (p.input_width() != 2 * dof + aux_dim)
    throw InvalidArgument("as_scalar_fn: network input width " + std::to_string(p.input_width()) +
                          " != 2*dof + aux_dim = " + std::to_string(2 * dof + aux_dim));
  if (p.output_width() != 1) throw InvalidArgument("as_scalar_fn: network output width must be 1");
  auto shared = std::make_shared<const NetParams>(p);
  return ScalarFn(dof, aux_dim, [shared](auto q, auto qd, auto aux) {
    using T = typename decltype(q)::value_type;
    std::vector<T> x;
    x.reserve(q.size() + qd.size() + aux.size());
    x.insert(x.end(), q.begin(), q.end());
    x.insert(x.end(), qd.begin(), qd.end());
    for (double a : aux) x.push_back(T(a));
    return forward_all<T>(*shared, std::span<const T>(x))[0];
  });
}

nlohmann::json to_json(const NetParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
      std::vector<double> row(l.w.cols());
      for (Eigen::Index j = 0; j < l.w.cols(); ++j) row[j] = l.w(i, j);
      w.push_back(row);
    }
    layers.push_back({{"w", w}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  return {{"widths", p.widths}, {"seed", p.seed}, {"activation", to_string(p.activation)}, {"layers", layers}};
}

NetParams params_from_json(const nlohmann::json& j) {
  NetParams p;
  try {
    p.widths = j.at("widths").get<std::vector<int>>();
    p.seed = j.value("seed", std::uint64_t{0});
    p.activation = parse_activation(j.value("activation", std::string("softplus")));
    for (const auto& jl : j.at("layers")) {
      const auto rows = jl.at("w").get<std::vector<std::vector<double>>>();
      const auto b = jl.at("b").get<std::vector<double>>();
      Layer layer;
      layer.w.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != layer.w.cols())
          throw InvalidArgument("checkpoint: ragged weight matrix");
        for (std::size_t k = 0; k < rows[i].size(); ++k) layer.w(i, k) = rows[i][k];
      }
      layer.b = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
      p.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint: ") + e.what());
  }
  p.validate();
  return p;
}

void save_checkpoint(const std::string& path, const NetParams& p, const nlohmann::json& meta) {
  nlohmann::json j = to_json(p);
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw std::ios_base::failure("failed writing '" + path + "'");
}

NetParams load_checkpoint(const std::string& path, nlohmann::json* meta) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint '" + path + "': " + e.what());
  }
  if (meta) *meta = j.value("meta", nlohmann::json());
  return params_from_json(j);
}

}  // namespace lnn
