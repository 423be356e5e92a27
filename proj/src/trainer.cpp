#include "lnn/trainer.hpp"

#include "lnn/jet.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

namespace lnn {

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::lnn: return "lnn";
    case ModelKind::baseline: return "baseline";
    case ModelKind::hnn: return "hnn";
  }
  return "?";
}

ModelKind parse_model(const std::string& name) {
  if (name == "lnn") return ModelKind::lnn;
  if (name == "baseline") return ModelKind::baseline;
  if (name == "hnn") return ModelKind::hnn;
  throw InvalidArgument("unknown model '" + name + "'");
}

std::string to_string(Coords c) { return c == Coords::arbitrary ? "arbitrary" : "canonical"; }

Coords parse_coords(const std::string& name) {
  if (name == "arbitrary") return Coords::arbitrary;
  if (name == "canonical") return Coords::canonical;
  throw InvalidArgument("unknown coords '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw InvalidArgument("TrainConfig: lr0 must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("TrainConfig: decay must lie in (0, 1]");
  if (batch < 1) throw InvalidArgument("TrainConfig: batch must be >= 1");
  if (steps < 0) throw InvalidArgument("TrainConfig: steps must be >= 0");
  if (hidden < 1 || depth < 2) throw InvalidArgument("TrainConfig: need hidden >= 1 and depth >= 2");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InvalidArgument("TrainConfig: val_fraction in [0, 1)");
  if (log_every < 1 || checkpoint_every < 0) throw InvalidArgument("TrainConfig: bad log/checkpoint interval");
  if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw InvalidArgument("TrainConfig: clip_norm must be >= 0");
  PinvConfig{rcond}.validate();
}

InitSpec model_init_spec(const TrainConfig& cfg, int dof, int aux_dim) {
  InitSpec spec;
  spec.hidden = cfg.hidden;
  spec.depth = cfg.depth;
  spec.seed = cfg.seed;
  spec.input_width = 2 * dof + aux_dim;
  spec.output_width = cfg.model == ModelKind::baseline ? dof : 1;
  return spec;
}

OptState OptState::fresh(const NetParams& like) { return {like.zeros_like(), like.zeros_like(), 0}; }

std::pair<NetParams, OptState> adam_step(const NetParams& params, const NetParams& grads, const OptState& opt,
                                         double lr) {
  if (params.layers.size() != grads.layers.size() || params.layers.size() != opt.m.layers.size())
    throw InvalidArgument("adam_step: layer count mismatch");
  NetParams out = params;
  OptState next = opt;
  next.step += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(next.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(next.step));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    if (theta.rows() != g.rows() || theta.cols() != g.cols() || m.rows() != g.rows() || m.cols() != g.cols())
      throw InvalidArgument("adam_step: shape mismatch");
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v + ((1.0 - kAdamBeta2) * g.array().square()).matrix();
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
  };
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    update(out.layers[l].w, grads.layers[l].w, next.m.layers[l].w, next.v.layers[l].w);
    update(out.layers[l].b, grads.layers[l].b, next.m.layers[l].b, next.v.layers[l].b);
  }
  return {std::move(out), std::move(next)};
}

double learning_rate(const TrainConfig& cfg, long long step) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(step));
}

namespace {

struct BatchShape {
  int dof = 0;
  int aux = 0;
  int size = 0;
};

BatchShape batch_shape(std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidArgument("loss: empty batch");
  BatchShape s{batch.front().state.dof(), static_cast<int>(batch.front().aux.size()), static_cast<int>(batch.size())};
  for (const auto& x : batch) {
    if (x.state.dof() != s.dof || x.state.qd.size() != s.dof || x.aux.size() != s.aux)
      throw InvalidArgument("loss: inconsistent sample shapes in batch");
  }
  return s;
}

// Columns [q; qd; aux] per sample.
Mat pack_inputs(std::span<const Sample> batch, const BatchShape& s) {
  Mat x(2 * s.dof + s.aux, s.size);
  for (int b = 0; b < s.size; ++b) {
    x.col(b).head(s.dof) = batch[b].state.q;
    x.col(b).segment(s.dof, s.dof) = batch[b].state.qd;
    x.col(b).tail(s.aux) = batch[b].aux;
  }
  return x;
}

Mat unit_direction(int rows, int index, int cols) {
  Mat m = Mat::Zero(rows, cols);
  m.row(index).setOnes();
  return m;
}

void require_width(const NetParams& p, int in, int out, const char* who) {
  if (p.input_width() != in || p.output_width() != out)
    throw InvalidArgument(std::string(who) + ": network shape " + std::to_string(p.input_width()) + "->" +
                          std::to_string(p.output_width()) + " does not match data (" + std::to_string(in) + "->" +
                          std::to_string(out) + ")");
}

LossGrad lnn_objective(const NetParams& params, std::span<const Sample> batch, const PinvConfig& cfg, bool want_grad) {
  const BatchShape s = batch_shape(batch);
  const int d = s.dof;
  const int B = s.size;
  const int width = 2 * d + s.aux;
  require_width(params, width, 1, "lnn loss");

  // Directions: e_q[0..d), e_qd[d..2d), w = (qd, 0, 0) at 2d.
  std::vector<Mat> dirs;
  dirs.reserve(2 * d + 1);
  for (int i = 0; i < 2 * d; ++i) dirs.push_back(unit_direction(width, i, B));
  const Mat x = pack_inputs(batch, s);
  Mat w = Mat::Zero(width, B);
  w.topRows(d) = x.middleRows(d, d);
  dirs.push_back(std::move(w));

  std::vector<std::pair<int, int>> pairs;
  Eigen::MatrixXi hess_pair(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      hess_pair(i, j) = hess_pair(j, i) = static_cast<int>(pairs.size());
      pairs.emplace_back(d + i, d + j);
    }
  std::vector<int> mixed_pair(d);
  for (int i = 0; i < d; ++i) {
    mixed_pair[i] = static_cast<int>(pairs.size());
    pairs.emplace_back(d + i, 2 * d);
  }

  MlpJet jet(params, 2 * d + 1, pairs);
  jet.forward(x, dirs);

  LossGrad out;
  Mat lambda(d, B), qdd(d, B);
  const double scale = 1.0 / (static_cast<double>(B) * d);
  for (int b = 0; b < B; ++b) {
    Mat a(d, d);
    Vec rhs(d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) a(i, j) = jet.second(hess_pair(i, j))(0, b);
      rhs[i] = jet.tangent(i)(0, b) - jet.second(mixed_pair[i])(0, b);
    }
    const PinvSolve sol = pinv_solve(a, rhs, cfg.rcond);
    if (!sol.x.allFinite()) throw NumericError("lnn loss: non-finite acceleration in batch element", b);
    qdd.col(b) = sol.x;
    const Vec err = sol.x - batch[b].qdd_true;
    out.loss += scale * err.squaredNorm();
    if (want_grad) lambda.col(b) = pinv_solve(a, 2.0 * scale * err, cfg.rcond).x;
  }
  if (!std::isfinite(out.loss)) throw NumericError("lnn loss: non-finite loss", -1);
  if (!want_grad) return out;

  // Implicit-function rule on A qdd = b:
  //   dloss = lambda . (d grad_q - d(M qd) - dA qdd),  lambda = pinv(A) dloss/dqdd
  Mat seed = jet.zero_seed();
  for (int i = 0; i < d; ++i) {
    jet.seed_tangent(seed, i) = lambda.row(i);
    jet.seed_second(seed, mixed_pair[i]) = -lambda.row(i);
    for (int j = i; j < d; ++j) {
      if (i == j)
        jet.seed_second(seed, hess_pair(i, j)) = -(lambda.row(i).array() * qdd.row(i).array()).matrix();
      else
        jet.seed_second(seed, hess_pair(i, j)) =
            -(lambda.row(i).array() * qdd.row(j).array() + lambda.row(j).array() * qdd.row(i).array()).matrix();
    }
  }
  out.grad = params.zeros_like();
  jet.backward(seed, out.grad);
  return out;
}

LossGrad baseline_objective(const NetParams& params, std::span<const Sample> batch, bool want_grad) {
  const BatchShape s = batch_shape(batch);
  const int d = s.dof;
  const int B = s.size;
  require_width(params, 2 * d + s.aux, d, "baseline loss");
  MlpJet jet(params, 0, {});
  jet.forward(pack_inputs(batch, s), {});
  Mat err(d, B);
  for (int b = 0; b < B; ++b) {
    err.col(b) = jet.value().col(b) - batch[b].qdd_true;
    if (!err.col(b).allFinite()) throw NumericError("baseline loss: non-finite prediction in batch element", b);
  }
  const double scale = 1.0 / (static_cast<double>(B) * d);
  LossGrad out;
  out.loss = scale * err.squaredNorm();
  if (!want_grad) return out;
  Mat seed = jet.zero_seed();
  jet.seed_value(seed) = 2.0 * scale * err;
  out.grad = params.zeros_like();
  jet.backward(seed, out.grad);
  return out;
}

LossGrad hnn_objective(const NetParams& params, std::span<const Sample> batch, bool want_grad) {
  const BatchShape s = batch_shape(batch);
  const int d = s.dof;
  const int B = s.size;
  const int width = 2 * d + s.aux;
  require_width(params, width, 1, "hnn loss");
  for (const auto& x : batch)
    if (x.qdd_true.size() != 2 * d) throw InvalidArgument("hnn loss: targets must hold (dq/dt, dp/dt)");
  std::vector<Mat> dirs;
  for (int i = 0; i < 2 * d; ++i) dirs.push_back(unit_direction(width, i, B));
  MlpJet jet(params, 2 * d, {});
  jet.forward(pack_inputs(batch, s), dirs);

  const double scale = 1.0 / (static_cast<double>(B) * 2 * d);
  Mat err(2 * d, B);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < d; ++i) {
      err(i, b) = jet.tangent(d + i)(0, b) - batch[b].qdd_true[i];       // dq/dt = dH/dp
      err(d + i, b) = -jet.tangent(i)(0, b) - batch[b].qdd_true[d + i];  // dp/dt = -dH/dq
    }
    if (!err.col(b).allFinite()) throw NumericError("hnn loss: non-finite prediction in batch element", b);
  }
  LossGrad out;
  out.loss = scale * err.squaredNorm();
  if (!want_grad) return out;
  Mat seed = jet.zero_seed();
  for (int i = 0; i < d; ++i) {
    jet.seed_tangent(seed, d + i) = 2.0 * scale * err.row(i);
    jet.seed_tangent(seed, i) = -2.0 * scale * err.row(d + i);
  }
  out.grad = params.zeros_like();
  jet.backward(seed, out.grad);
  return out;
}

LossGrad objective(ModelKind model, const NetParams& params, std::span<const Sample> batch, const PinvConfig& cfg,
                   bool want_grad) {
  switch (model) {
    case ModelKind::lnn: return lnn_objective(params, batch, cfg, want_grad);
    case ModelKind::baseline: return baseline_objective(params, batch, want_grad);
    case ModelKind::hnn: return hnn_objective(params, batch, want_grad);
  }
  throw InvalidArgument("unknown model");
}

}  // namespace

double loss(ModelKind model, const NetParams& params, std::span<const Sample> batch, const PinvConfig& cfg) {
  return objective(model, params, batch, cfg, false).loss;
}

LossGrad loss_and_grad(ModelKind model, const NetParams& params, std::span<const Sample> batch,
                       const PinvConfig& cfg) {
  return objective(model, params, batch, cfg, true);
}

NetParams grad_params(ModelKind model, const NetParams& params, std::span<const Sample> batch,
                      const PinvConfig& cfg) {
  return loss_and_grad(model, params, batch, cfg).grad;
}

double lnn_loss(const ScalarFn& lagrangian, std::span<const Sample> batch, const PinvConfig& cfg) {
  const BatchShape s = batch_shape(batch);
  double total = 0.0;
  for (const auto& x : batch) total += (lnn_accel(lagrangian, x.state, x.aux, cfg).qdd - x.qdd_true).squaredNorm();
  return total / (static_cast<double>(s.size) * s.dof);
}

double hnn_loss(const ScalarFn& hamiltonian, std::span<const Sample> batch) {
  const BatchShape s = batch_shape(batch);
  double total = 0.0;
  for (const auto& x : batch) {
    const auto [dq, dp] = hnn_rhs(hamiltonian, x.state.q, x.state.qd, x.aux);
    total += (dq - x.qdd_true.head(s.dof)).squaredNorm() + (dp - x.qdd_true.tail(s.dof)).squaredNorm();
  }
  return total / (static_cast<double>(s.size) * 2 * s.dof);
}

std::vector<Sample> to_phase_samples(const SystemSpec& spec, std::span<const Sample> samples, Coords coords) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  const ScalarFn lag = coords == Coords::canonical ? lagrangian(spec) : ScalarFn();
  for (const auto& x : samples) {
    const int d = x.state.dof();
    Sample y;
    y.aux = x.aux;
    y.qdd_true.resize(2 * d);
    y.qdd_true.head(d) = x.state.qd;
    if (coords == Coords::canonical) {
      auto [q, p] = to_canonical(spec, x.state, x.aux);
      y.state = State{std::move(q), std::move(p)};
      y.qdd_true.tail(d) = grad_q(lag, x.state.q, x.state.qd, x.aux);
    } else {
      y.state = x.state;
      y.qdd_true.tail(d) = x.qdd_true;
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  return idx;
}

TrainResult fit(NetParams init, const TrainConfig& cfg, std::size_t n_train, const BatchObjective& objective,
                const Validation& validation) {
  cfg.validate();
  if (n_train == 0) throw InvalidArgument("fit: empty training set");
  TrainResult result;
  result.train_loss.reserve(cfg.steps);
  NetParams params = std::move(init);
  OptState opt = OptState::fresh(params);
  Rng rng(cfg.seed, 0x5eed5eedULL);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    if (!log) throw std::ios_base::failure("cannot open '" + cfg.log_path + "' for writing");
  }

  std::vector<std::size_t> order = permutation(n_train, rng);
  std::size_t cursor = 0;
  std::vector<std::size_t> idx;
  for (long long step = 0; step < cfg.steps; ++step) {
    idx.clear();
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        order = permutation(n_train, rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    LossGrad lg;
    bool finite = true;
    try {
      lg = objective(params, idx);
      finite = std::isfinite(lg.loss) && lg.grad.flatten().allFinite();
    } catch (const NumericError&) {
      finite = false;
    }
    if (!finite) {
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    result.train_loss.push_back(lg.loss);
    if (cfg.clip_norm > 0.0) {
      const Vec g = lg.grad.flatten();
      const double norm = g.norm();
      if (norm > cfg.clip_norm) lg.grad.unflatten(g * (cfg.clip_norm / norm));
    }
    const double lr = learning_rate(cfg, step);
    auto [next, next_opt] = adam_step(params, lg.grad, opt, lr);
    if (!next.flatten().allFinite()) {
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    params = std::move(next);
    opt = std::move(next_opt);

    const bool last = step + 1 == cfg.steps;
    if ((step + 1) % cfg.log_every == 0 || last) {
      double val = std::nan("");
      if (validation) {
        try {
          val = validation(params);
        } catch (const NumericError&) {
        }
        result.val_loss.emplace_back(step + 1, val);
      }
      if (log) {
        nlohmann::json j = {{"step", step + 1}, {"lr", lr}, {"train_loss", lg.loss}};
        j["val_loss"] = std::isfinite(val) ? nlohmann::json(val) : nlohmann::json(nullptr);
        log << j.dump() << '\n';
      }
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && (step + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(cfg.checkpoint_path, params, cfg.checkpoint_meta);
  }
  if (result.diverged && !cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, params, cfg.checkpoint_meta);
  result.params = std::move(params);
  return result;
}

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& dataset) {
  cfg.validate();
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  const int dof = dataset.front().state.dof();
  const int aux_dim = static_cast<int>(dataset.front().aux.size());
  const int target = static_cast<int>(dataset.front().qdd_true.size());
  if (cfg.model == ModelKind::hnn ? target != 2 * dof : target != dof)
    throw InvalidArgument("train: target width does not match the model family (hnn needs to_phase_samples)");

  Rng split_rng(cfg.seed, 0x5b1175b1ULL);
  const std::vector<std::size_t> perm = permutation(dataset.size(), split_rng);
  auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(dataset.size())));
  if (n_val >= dataset.size()) n_val = 0;
  const std::size_t n_train = dataset.size() - n_val;
  std::vector<Sample> train_set, val_set;
  train_set.reserve(n_train);
  val_set.reserve(n_val);
  for (std::size_t i = 0; i < perm.size(); ++i) (i < n_train ? train_set : val_set).push_back(dataset[perm[i]]);

  const PinvConfig pinv{cfg.rcond};
  const ModelKind model = cfg.model;
  std::vector<Sample> scratch;
  BatchObjective objective = [&](const NetParams& p, std::span<const std::size_t> idx) {
    scratch.clear();
    for (auto i : idx) scratch.push_back(train_set[i]);
    return loss_and_grad(model, p, scratch, pinv);
  };
  Validation validation;
  if (!val_set.empty()) {
    validation = [&](const NetParams& p) {
      // Chunked to bound the jet's memory.
      double total = 0.0;
      const std::size_t chunk = 256;
      for (std::size_t s = 0; s < val_set.size(); s += chunk) {
        const std::size_t n = std::min(chunk, val_set.size() - s);
        total += loss(model, p, std::span<const Sample>(val_set).subspan(s, n), pinv) * static_cast<double>(n);
      }
      return total / static_cast<double>(val_set.size());
    };
  }
  return fit(init_params(model_init_spec(cfg, dof, aux_dim)), cfg, n_train, objective, validation);
}

}  // namespace lnn
