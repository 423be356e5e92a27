#pragma once

#include "lnn/diffkit.hpp"
#include "lnn/types.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lnn {

enum class Activation { softplus, relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct Layer {
  Mat w;  // out x in
  Vec b;  // out
};

// Weights and biases of a fully connected network. widths = [d_in, n, ..., d_out].
struct NetParams {
  std::vector<Layer> layers;
  std::vector<int> widths;
  std::uint64_t seed = 0;
  Activation activation = Activation::softplus;

  int input_width() const { return widths.empty() ? 0 : widths.front(); }
  int output_width() const { return widths.empty() ? 0 : widths.back(); }
  std::size_t parameter_count() const;

  // Shapes chain, widths agree with the layers, all values finite.
  void validate() const;

  // Same shapes, all zeros. Used for gradients and optimizer moments.
  NetParams zeros_like() const;

  // Flat views for optimizers and finite-difference checks.
  Vec flatten() const;
  void unflatten(const Vec& flat);
};

struct InitSpec {
  int hidden = 500;       // n
  int depth = 4;          // number of weight layers
  std::uint64_t seed = 0;
  int input_width = 4;
  int output_width = 1;

  void validate() const;
};

// Standard deviation of the Gaussian used for weight layer `layer` (0-based)
// of a `depth`-layer network with hidden width n: 2.2/sqrt(n) for the first
// layer, 0.58*i/sqrt(n) for hidden layer i, sqrt(n) for the output layer.
double init_stddev(int layer, int depth, int hidden);

NetParams init_params(const InitSpec& spec);

template <class T>
T activate(Activation a, const T& z) {
  using std::exp;
  using std::log1p;
  if (a == Activation::relu) return value_of(z) > 0 ? z : T(0.0);
  // softplus, stable for large |z|
  if (value_of(z) > 0) return z + log1p(exp(-z));
  return log1p(exp(z));
}

template <>
inline Dual2 activate<Dual2>(Activation a, const Dual2& z) {
  if (a == Activation::relu) return z.v > 0 ? z : Dual2(0.0);
  const double s = 1.0 / (1.0 + std::exp(-z.v));
  const double sp = z.v > 0 ? z.v + std::log1p(std::exp(-z.v)) : std::log1p(std::exp(z.v));
  return chain(z, sp, s, s * (1.0 - s));
}

// Generic forward pass; all layers but the last are followed by the activation.
template <class T>
std::vector<T> forward_all(const NetParams& p, std::span<const T> x) {
  if (static_cast<int>(x.size()) != p.input_width())
    throw InvalidArgument("forward: expected input of width " + std::to_string(p.input_width()) + ", got " +
                          std::to_string(x.size()));
  std::vector<T> a(x.begin(), x.end());
  std::vector<T> z;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    const Eigen::Index rows = layer.w.rows();
    const Eigen::Index cols = layer.w.cols();
    z.assign(rows, T(0.0));
    for (Eigen::Index i = 0; i < rows; ++i) {
      T acc(layer.b[i]);
      for (Eigen::Index j = 0; j < cols; ++j) acc += layer.w(i, j) * a[j];
      z[i] = acc;
    }
    if (l + 1 < p.layers.size()) {
      for (auto& zi : z) zi = activate(p.activation, zi);
    }
    a.swap(z);
  }
  return a;
}

// Scalar-output forward pass.
double forward(const NetParams& p, const Vec& x);
// Vector-output forward pass (e.g. the direct-acceleration baseline).
Vec forward_vec(const NetParams& p, const Vec& x);

// Packages a scalar network as a ScalarFn over (q, qd, aux) with input layout
// [q | qd | aux]. Requires input width 2*dof + aux_dim and output width 1.
ScalarFn as_scalar_fn(const NetParams& p, int dof, int aux_dim = 0);

nlohmann::json to_json(const NetParams& p);
NetParams params_from_json(const nlohmann::json& j);

// Checkpoint file: {widths, seed, activation, layers: [{w, b}], meta?}.
void save_checkpoint(const std::string& path, const NetParams& p, const nlohmann::json& meta = nullptr);
NetParams load_checkpoint(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace lnn
