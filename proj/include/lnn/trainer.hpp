#pragma once

#include "lnn/eldyn.hpp"
#include "lnn/netcore.hpp"
#include "lnn/physlib.hpp"
#include "lnn/simkit.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lnn {

enum class ModelKind { lnn, baseline, hnn };
// HNN input convention: (q, qd) treated as canonical, or true (q, p).
enum class Coords { arbitrary, canonical };

std::string to_string(ModelKind m);
ModelKind parse_model(const std::string& name);
std::string to_string(Coords c);
Coords parse_coords(const std::string& name);

struct TrainConfig {
  ModelKind model = ModelKind::lnn;
  int hidden = 500;
  int depth = 4;
  double lr0 = 1e-3;
  double decay = 0.99997;  // per-step multiplicative learning-rate decay
  int batch = 32;
  int steps = 10000;
  std::uint64_t seed = 0;
  Coords coords = Coords::arbitrary;
  double val_fraction = 0.1;
  int log_every = 500;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;
  nlohmann::json checkpoint_meta;  // stored with every checkpoint written
  std::string log_path;  // JSON lines {step, lr, train_loss, val_loss}
  double rcond = 1e-10;
  double clip_norm = 10.0;  // global gradient-norm clip; 0 disables

  void validate() const;
};

// Network shape for a model family on a d-dof system with k aux inputs.
InitSpec model_init_spec(const TrainConfig& cfg, int dof, int aux_dim);

struct OptState {
  NetParams m;
  NetParams v;
  long long step = 0;

  static OptState fresh(const NetParams& like);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

std::pair<NetParams, OptState> adam_step(const NetParams& params, const NetParams& grads, const OptState& opt,
                                         double lr);

double learning_rate(const TrainConfig& cfg, long long step);

struct LossGrad {
  double loss = 0.0;
  NetParams grad;
};

// Mean squared error of predicted vs. target time derivatives over every
// component in the batch.
//   lnn:      Euler-Lagrange accelerations of the network Lagrangian
//   baseline: network output read directly as the acceleration
//   hnn:      (dH/dp, -dH/dq) against the 2d targets of to_phase_samples
double loss(ModelKind model, const NetParams& params, std::span<const Sample> batch, const PinvConfig& cfg = {});
LossGrad loss_and_grad(ModelKind model, const NetParams& params, std::span<const Sample> batch,
                       const PinvConfig& cfg = {});
NetParams grad_params(ModelKind model, const NetParams& params, std::span<const Sample> batch,
                      const PinvConfig& cfg = {});

// Same losses for arbitrary ScalarFn models, through the generic solver.
double lnn_loss(const ScalarFn& lagrangian, std::span<const Sample> batch, const PinvConfig& cfg = {});
double hnn_loss(const ScalarFn& hamiltonian, std::span<const Sample> batch);

// HNN training data. The returned samples hold (q, p) in state and the
// concatenated targets (dq/dt, dp/dt) in qdd_true.
//   canonical: p = dL/dqd, dp/dt = dL/dq (Euler-Lagrange)
//   arbitrary: p = qd, dp/dt = qdd
std::vector<Sample> to_phase_samples(const SystemSpec& spec, std::span<const Sample> samples, Coords coords);

struct TrainResult {
  NetParams params;  // final, or last finite parameters on divergence
  std::vector<double> train_loss;  // one entry per step
  std::vector<std::pair<long long, double>> val_loss;
  bool diverged = false;
  long long diverged_step = -1;
};

using BatchObjective = std::function<LossGrad(const NetParams&, std::span<const std::size_t>)>;
using Validation = std::function<double(const NetParams&)>;

// Minibatch Adam loop with seeded per-epoch shuffling over n_train examples.
TrainResult fit(NetParams init, const TrainConfig& cfg, std::size_t n_train, const BatchObjective& objective,
                const Validation& validation = {});

// Splits the dataset 90/10 (seeded), initializes the network and trains it.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& dataset);

// Seeded permutation of [0, n): Fisher-Yates over Rng.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace lnn
