#include "lnn/fieldlnn.hpp"

#include "lnn/jet.hpp"
#include "lnn/random.hpp"

#include <array>
#include <cmath>
#include <fstream>

namespace lnn {

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

// Local stencil index a in {0, 1, 2} of stencil s maps to grid point s + a - 1.
int global_index(int s, int a, int n) { return wrap(s + a - 1, n); }

std::array<double, 3> gather(const Vec& v, int s) {
  const int n = static_cast<int>(v.size());
  return {v[wrap(s - 1, n)], v[s], v[wrap(s + 1, n)]};
}

Vec to_vec(const std::array<double, 3>& a) { return Vec{{a[0], a[1], a[2]}}; }

// Per-stencil quantities entering the grid Euler-Lagrange system.
struct StencilTerms {
  Mat grad_q;     // 3 x n: dD_s / dphi_a
  Mat mixed;      // 3 x n: sum_b d2D_s / dphid_a dphi_b * phid_b
  std::vector<Eigen::Matrix3d> hess;  // d2D_s / dphid_a dphid_b
};

void check_finite(const StencilTerms& t, int n) {
  for (int s = 0; s < n; ++s) {
    if (!t.grad_q.col(s).allFinite() || !t.mixed.col(s).allFinite() || !t.hess[s].allFinite())
      throw NumericError("flgn: non-finite density derivatives at grid index", s);
  }
}

StencilTerms stencil_terms(const ScalarFn& density, const GridState& g) {
  const int n = g.size();
  StencilTerms t{Mat(3, n), Mat(3, n), std::vector<Eigen::Matrix3d>(n)};
  const Vec aux(0);
  for (int s = 0; s < n; ++s) {
    const Vec q = to_vec(gather(g.phi, s));
    const Vec qd = to_vec(gather(g.phid, s));
    SecondOrderTerms so;
    try {
      so = second_order_terms(density, q, qd, aux);
    } catch (const NumericError&) {
      throw NumericError("flgn: density evaluation failed at grid index", s);
    }
    t.grad_q.col(s) = so.grad_q;
    t.mixed.col(s) = so.jac_q_of_grad_qd * qd;
    t.hess[s] = so.hess_qd_qd;
  }
  check_finite(t, n);
  return t;
}

// Stencil inputs for a batch of grids: 6 x (n * B), column b * n + s.
Mat stencil_inputs(std::span<const GridState* const> grids) {
  const int n = grids.front()->size();
  Mat x(6, n * static_cast<int>(grids.size()));
  for (std::size_t b = 0; b < grids.size(); ++b) {
    const GridState& g = *grids[b];
    for (int s = 0; s < n; ++s) {
      const auto p = gather(g.phi, s);
      const auto v = gather(g.phid, s);
      const int col = static_cast<int>(b) * n + s;
      for (int a = 0; a < 3; ++a) {
        x(a, col) = p[a];
        x(3 + a, col) = v[a];
      }
    }
  }
  return x;
}

// Directions e_phi (0..2), e_phid (3..5), w = (phid, 0) (6); pairs are the
// phid-phid Hessian (a <= b) followed by (phid_a, w).
struct StencilJetLayout {
  std::vector<std::pair<int, int>> pairs;
  std::array<std::array<int, 3>, 3> hess{};
  std::array<int, 3> mixed{};

  StencilJetLayout() {
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        hess[a][b] = hess[b][a] = static_cast<int>(pairs.size());
        pairs.emplace_back(3 + a, 3 + b);
      }
    for (int a = 0; a < 3; ++a) {
      mixed[a] = static_cast<int>(pairs.size());
      pairs.emplace_back(3 + a, 6);
    }
  }
};

std::vector<Mat> stencil_directions(const Mat& x) {
  std::vector<Mat> dirs;
  dirs.reserve(7);
  for (int k = 0; k < 6; ++k) {
    Mat e = Mat::Zero(6, x.cols());
    e.row(k).setOnes();
    dirs.push_back(std::move(e));
  }
  Mat w = Mat::Zero(6, x.cols());
  w.topRows(3) = x.bottomRows(3);
  dirs.push_back(std::move(w));
  return dirs;
}

StencilTerms terms_from_jet(const MlpJet& jet, const StencilJetLayout& lay, int offset, int n) {
  StencilTerms t{Mat(3, n), Mat(3, n), std::vector<Eigen::Matrix3d>(n)};
  for (int s = 0; s < n; ++s) {
    const int col = offset + s;
    for (int a = 0; a < 3; ++a) {
      t.grad_q(a, s) = jet.tangent(a)(0, col);
      t.mixed(a, s) = jet.second(lay.mixed[a])(0, col);
      for (int b = 0; b < 3; ++b) t.hess[s](a, b) = jet.second(lay.hess[a][b])(0, col);
    }
  }
  check_finite(t, n);
  return t;
}

CyclicPentadiagonal assemble_hessian(const StencilTerms& t, int n) {
  CyclicPentadiagonal h(n);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) h.at(global_index(s, a, n), b - a) += t.hess[s](a, b);
  return h;
}

Vec assemble_rhs(const StencilTerms& t, int n) {
  Vec r = Vec::Zero(n);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < 3; ++a) r[global_index(s, a, n)] += t.grad_q(a, s) - t.mixed(a, s);
  return r;
}

FieldAccel solve_terms(const StencilTerms& t, int n, const PinvConfig& cfg) {
  const BandedSolve sol = solve_cyclic_pentadiagonal(assemble_hessian(t, n), assemble_rhs(t, n), cfg.rcond);
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(sol.x[i])) throw NumericError("flgn: non-finite acceleration at grid index", i);
  return {sol.x, sol.dense_fallback};
}

void check_grid_batch(std::span<const FieldSample> batch) {
  if (batch.empty()) throw InvalidArgument("field loss: empty batch");
  const int n = batch.front().state.size();
  for (const auto& x : batch) {
    x.state.validate();
    if (x.state.size() != n || x.phidd_true.size() != n)
      throw InvalidArgument("field loss: inconsistent grid sizes in batch");
  }
}

LossGrad field_objective(const NetParams& density, std::span<const FieldSample> batch, const PinvConfig& cfg,
                         bool want_grad) {
  check_density(density);
  check_grid_batch(batch);
  const int n = batch.front().state.size();
  const int B = static_cast<int>(batch.size());
  std::vector<const GridState*> grids;
  for (const auto& x : batch) grids.push_back(&x.state);
  const Mat x = stencil_inputs(grids);
  static const StencilJetLayout lay;
  MlpJet jet(density, 7, lay.pairs);
  jet.forward(x, stencil_directions(x));

  const double scale = 1.0 / (static_cast<double>(B) * n);
  LossGrad out;
  Mat lambda(n, B), phidd(n, B);
  for (int b = 0; b < B; ++b) {
    StencilTerms t;
    try {
      t = terms_from_jet(jet, lay, b * n, n);
    } catch (const NumericError& e) {
      throw NumericError("field loss: non-finite density derivatives in batch element", b);
    }
    const CyclicPentadiagonal h = assemble_hessian(t, n);
    const BandedSolve sol = solve_cyclic_pentadiagonal(h, assemble_rhs(t, n), cfg.rcond);
    if (!sol.x.allFinite()) throw NumericError("field loss: non-finite acceleration in batch element", b);
    phidd.col(b) = sol.x;
    const Vec err = sol.x - batch[b].phidd_true;
    out.loss += scale * err.squaredNorm();
    // The assembled Hessian is symmetric, so the adjoint solve reuses it.
    if (want_grad) lambda.col(b) = solve_cyclic_pentadiagonal(h, 2.0 * scale * err, cfg.rcond).x;
  }
  if (!std::isfinite(out.loss)) throw NumericError("field loss: non-finite loss", -1);
  if (!want_grad) return out;

  Mat seed = jet.zero_seed();
  for (int b = 0; b < B; ++b) {
    for (int s = 0; s < n; ++s) {
      const int col = b * n + s;
      std::array<int, 3> gi{global_index(s, 0, n), global_index(s, 1, n), global_index(s, 2, n)};
      for (int a = 0; a < 3; ++a) {
        const double la = lambda(gi[a], b);
        jet.seed_tangent(seed, a)(0, col) = la;
        jet.seed_second(seed, lay.mixed[a])(0, col) = -la;
        for (int c = a; c < 3; ++c) {
          const double v = a == c ? -la * phidd(gi[a], b)
                                  : -(la * phidd(gi[c], b) + lambda(gi[c], b) * phidd(gi[a], b));
          jet.seed_second(seed, lay.hess[a][c])(0, col) = v;
        }
      }
    }
  }
  out.grad = density.zeros_like();
  jet.backward(seed, out.grad);
  return out;
}

}  // namespace

void GridState::validate() const {
  if (phi.size() < 3) throw InvalidArgument("GridState: need at least 3 grid points");
  if (phid.size() != phi.size()) throw InvalidArgument("GridState: phi and phid differ in length");
  if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidArgument("GridState: dx must be finite and > 0");
  for (Eigen::Index i = 0; i < phi.size(); ++i)
    if (!std::isfinite(phi[i]) || !std::isfinite(phid[i]))
      throw InvalidArgument("GridState: non-finite value at grid index " + std::to_string(i));
}

void check_density(const ScalarFn& density) {
  if (density.dof() != 3 || density.aux_dim() != 0)
    throw InvalidArgument("density: expected a ScalarFn over 3 stencil values and 3 rates, no aux");
}

void check_density(const NetParams& density) {
  if (density.input_width() != 6 || density.output_width() != 1)
    throw InvalidArgument("density network: expected 6 -> 1, got " + std::to_string(density.input_width()) + " -> " +
                          std::to_string(density.output_width()));
}

ScalarFn wave_density(double dx, double c) {
  if (!(dx > 0.0)) throw InvalidArgument("wave_density: dx must be > 0");
  return ScalarFn(3, 0, [dx, c](auto q, auto qd, auto) {
    const auto grad = (q[2] - q[0]) / (2.0 * dx);
    return qd[1] * qd[1] - c * c * grad * grad;
  });
}

double total_lagrangian(const ScalarFn& density, const GridState& g) {
  check_density(density);
  g.validate();
  double total = 0.0;
  for (int s = 0; s < g.size(); ++s) {
    const auto q = gather(g.phi, s);
    const auto qd = gather(g.phid, s);
    const double v = density.eval(std::span<const double>(q), std::span<const double>(qd), {});
    if (!std::isfinite(v)) throw NumericError("total_lagrangian: non-finite density at grid index", s);
    total += v;
  }
  return total;
}

double total_lagrangian(const NetParams& density, const GridState& g) {
  check_density(density);
  g.validate();
  const GridState* grids[] = {&g};
  MlpJet jet(density, 0, {});
  jet.forward(stencil_inputs(grids), {});
  const auto v = jet.value();
  for (int s = 0; s < g.size(); ++s)
    if (!std::isfinite(v(0, s))) throw NumericError("total_lagrangian: non-finite density at grid index", s);
  return v.sum();
}

ScalarFn total_lagrangian_fn(const ScalarFn& density, int n) {
  check_density(density);
  if (n < 3) throw InvalidArgument("total_lagrangian_fn: need at least 3 grid points");
  return ScalarFn(n, 0, [density, n](auto q, auto qd, auto) {
    using T = typename decltype(q)::value_type;
    T total(0.0);
    for (int s = 0; s < n; ++s) {
      const std::array<T, 3> a{q[wrap(s - 1, n)], q[s], q[wrap(s + 1, n)]};
      const std::array<T, 3> b{qd[wrap(s - 1, n)], qd[s], qd[wrap(s + 1, n)]};
      total += density.eval(std::span<const T>(a), std::span<const T>(b), std::span<const double>());
    }
    return total;
  });
}

CyclicPentadiagonal stencil_hessian(const ScalarFn& density, const GridState& g) {
  check_density(density);
  g.validate();
  return assemble_hessian(stencil_terms(density, g), g.size());
}

CyclicPentadiagonal stencil_hessian(const NetParams& density, const GridState& g) {
  check_density(density);
  g.validate();
  const GridState* grids[] = {&g};
  const Mat x = stencil_inputs(grids);
  static const StencilJetLayout lay;
  MlpJet jet(density, 7, lay.pairs);
  jet.forward(x, stencil_directions(x));
  return assemble_hessian(terms_from_jet(jet, lay, 0, g.size()), g.size());
}

FieldAccel flgn_accel(const ScalarFn& density, const GridState& g, const PinvConfig& cfg) {
  check_density(density);
  g.validate();
  cfg.validate();
  return solve_terms(stencil_terms(density, g), g.size(), cfg);
}

FieldAccel flgn_accel(const NetParams& density, const GridState& g, const PinvConfig& cfg) {
  check_density(density);
  g.validate();
  cfg.validate();
  const GridState* grids[] = {&g};
  const Mat x = stencil_inputs(grids);
  static const StencilJetLayout lay;
  MlpJet jet(density, 7, lay.pairs);
  jet.forward(x, stencil_directions(x));
  return solve_terms(terms_from_jet(jet, lay, 0, g.size()), g.size(), cfg);
}

double grid_energy(const ScalarFn& density, const GridState& g) {
  check_density(density);
  g.validate();
  const Vec aux(0);
  double e = 0.0;
  for (int s = 0; s < g.size(); ++s) {
    const Vec q = to_vec(gather(g.phi, s));
    const Vec qd = to_vec(gather(g.phid, s));
    e += qd.dot(grad_qd(density, q, qd, aux)) - density(q, qd, aux);
  }
  if (!std::isfinite(e)) throw NumericError("grid_energy: non-finite energy", -1);
  return e;
}

double grid_energy(const NetParams& density, const GridState& g) {
  check_density(density);
  g.validate();
  const GridState* grids[] = {&g};
  const Mat x = stencil_inputs(grids);
  std::vector<Mat> dirs;
  for (int a = 0; a < 3; ++a) {
    Mat e = Mat::Zero(6, x.cols());
    e.row(3 + a).setOnes();
    dirs.push_back(std::move(e));
  }
  MlpJet jet(density, 3, {});
  jet.forward(x, dirs);
  double e = 0.0;
  for (int s = 0; s < g.size(); ++s) {
    e -= jet.value()(0, s);
    for (int a = 0; a < 3; ++a) e += x(3 + a, s) * jet.tangent(a)(0, s);
  }
  if (!std::isfinite(e)) throw NumericError("grid_energy: non-finite energy", -1);
  return e;
}

State to_state(const GridState& g) { return State{g.phi, g.phid}; }

GridState to_grid(const State& s, double dx) { return GridState{s.q, s.qd, dx}; }

void FieldDataConfig::validate() const {
  if (n < 3) throw InvalidArgument("FieldDataConfig: need n >= 3");
  if (!(c > 0.0) || !std::isfinite(dx)) throw InvalidArgument("FieldDataConfig: need c > 0 and finite dx");
  if (count < 1 || snapshots_per_rollout < 1 || stride < 0) throw InvalidArgument("FieldDataConfig: bad counts");
  if (!(dt > 0.0)) throw InvalidArgument("FieldDataConfig: dt must be > 0");
}

std::vector<FieldSample> generate_field_dataset(const FieldDataConfig& cfg) {
  cfg.validate();
  const SystemSpec spec = SystemSpec::wave1d(cfg.n, cfg.dx, cfg.c);
  const double dx = spec.params[1];
  const AccelFn accel = [&spec](const State& s) { return closed_form_accel(spec, s); };
  std::vector<FieldSample> out;
  out.reserve(cfg.count);
  for (std::uint64_t r = 0; static_cast<int>(out.size()) < cfg.count; ++r) {
    Rng rng(cfg.seed, r);
    State s = sample_state(spec, rng).first;
    for (int k = 0; k < cfg.snapshots_per_rollout && static_cast<int>(out.size()) < cfg.count; ++k) {
      if (k > 0)
        for (int i = 0; i < cfg.stride; ++i) s = rk4_step(accel, s, cfg.dt);
      out.push_back({to_grid(s, dx), accel(s)});
    }
  }
  return out;
}

double field_loss(const NetParams& density, std::span<const FieldSample> batch, const PinvConfig& cfg) {
  return field_objective(density, batch, cfg, false).loss;
}

LossGrad field_loss_and_grad(const NetParams& density, std::span<const FieldSample> batch, const PinvConfig& cfg) {
  return field_objective(density, batch, cfg, true);
}

TrainResult train_field(const TrainConfig& cfg, const std::vector<FieldSample>& dataset) {
  cfg.validate();
  if (dataset.empty()) throw InvalidArgument("train_field: empty dataset");
  check_grid_batch(dataset);

  Rng split_rng(cfg.seed, 0x5b1175b1ULL);
  const std::vector<std::size_t> perm = permutation(dataset.size(), split_rng);
  auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(dataset.size())));
  if (n_val >= dataset.size()) n_val = 0;
  const std::size_t n_train = dataset.size() - n_val;
  std::vector<FieldSample> train_set, val_set;
  for (std::size_t i = 0; i < perm.size(); ++i) (i < n_train ? train_set : val_set).push_back(dataset[perm[i]]);

  const PinvConfig pinv{cfg.rcond};
  std::vector<FieldSample> scratch;
  BatchObjective objective = [&](const NetParams& p, std::span<const std::size_t> idx) {
    scratch.clear();
    for (auto i : idx) scratch.push_back(train_set[i]);
    return field_loss_and_grad(p, scratch, pinv);
  };
  Validation validation;
  if (!val_set.empty()) {
    validation = [&](const NetParams& p) {
      double total = 0.0;
      const std::size_t chunk = 32;
      for (std::size_t s = 0; s < val_set.size(); s += chunk) {
        const std::size_t k = std::min(chunk, val_set.size() - s);
        total += field_loss(p, std::span<const FieldSample>(val_set).subspan(s, k), pinv) * static_cast<double>(k);
      }
      return total / static_cast<double>(val_set.size());
    };
  }
  InitSpec init{cfg.hidden, cfg.depth, cfg.seed, 6, 1};
  return fit(init_params(init), cfg, n_train, objective, validation);
}

void write_grid_csv(const std::string& phi_path, const std::string& rates_path, const Trajectory& traj) {
  std::ofstream phi(phi_path), rates(rates_path);
  if (!phi) throw std::ios_base::failure("cannot open '" + phi_path + "' for writing");
  if (!rates) throw std::ios_base::failure("cannot open '" + rates_path + "' for writing");
  const int n = traj.states.empty() ? 0 : traj.states.front().dof();
  const bool with_energy = traj.energies.size() == static_cast<Eigen::Index>(traj.size());
  phi << 't';
  rates << 't';
  for (int i = 1; i <= n; ++i) {
    phi << ",phi" << i;
    rates << ",phid" << i;
  }
  if (with_energy) rates << ",E";
  phi << '\n';
  rates << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const std::string t = format_double(traj.times[static_cast<Eigen::Index>(k)]);
    phi << t;
    rates << t;
    for (int i = 0; i < n; ++i) {
      phi << ',' << format_double(traj.states[k].q[i]);
      rates << ',' << format_double(traj.states[k].qd[i]);
    }
    if (with_energy) rates << ',' << format_double(traj.energies[static_cast<Eigen::Index>(k)]);
    phi << '\n';
    rates << '\n';
  }
  if (!phi || !rates) throw std::ios_base::failure("write failed for grid trajectory files");
}

}  // namespace lnn
