#pragma once

#include "lnn/banded.hpp"
#include "lnn/diffkit.hpp"
#include "lnn/eldyn.hpp"
#include "lnn/netcore.hpp"
#include "lnn/physlib.hpp"
#include "lnn/simkit.hpp"
#include "lnn/trainer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lnn {

// Field values and rates on a periodic 1D grid.
struct GridState {
  Vec phi;
  Vec phid;
  double dx = 0.0;

  int size() const { return static_cast<int>(phi.size()); }
  void validate() const;
};

// A density is a ScalarFn with dof 3 and no aux: q = (phi_{i-1}, phi_i, phi_{i+1}),
// qd = (phid_{i-1}, phid_i, phid_{i+1}). A density network is a 6 -> 1 NetParams
// with the same input order.
void check_density(const ScalarFn& density);
void check_density(const NetParams& density);

// L_i = phid_i^2 - c^2 ((phi_{i+1} - phi_{i-1}) / (2 dx))^2
ScalarFn wave_density(double dx, double c = 1.0);

// Sum of the density over all n periodic stencils.
double total_lagrangian(const ScalarFn& density, const GridState& g);
double total_lagrangian(const NetParams& density, const GridState& g);

// The same total as a dense n-dof ScalarFn, for oracle comparisons.
ScalarFn total_lagrangian_fn(const ScalarFn& density, int n);

// d2L / dphid_i dphid_j assembled from per-stencil local Hessians.
CyclicPentadiagonal stencil_hessian(const ScalarFn& density, const GridState& g);
CyclicPentadiagonal stencil_hessian(const NetParams& density, const GridState& g);

struct FieldAccel {
  Vec phidd;
  bool dense_fallback = false;  // the banded solve was bypassed
};

// Euler-Lagrange accelerations of the total Lagrangian via the cyclic banded solve.
// The network overload evaluates all stencils in one batched jet pass.
FieldAccel flgn_accel(const ScalarFn& density, const GridState& g, const PinvConfig& cfg = {});
FieldAccel flgn_accel(const NetParams& density, const GridState& g, const PinvConfig& cfg = {});

// Legendre transform of the total Lagrangian.
double grid_energy(const ScalarFn& density, const GridState& g);
double grid_energy(const NetParams& density, const GridState& g);

// Grid <-> State (q = phi, qd = phid) for the generic integrators.
State to_state(const GridState& g);
GridState to_grid(const State& s, double dx);

// One supervised field snapshot.
struct FieldSample {
  GridState state;
  Vec phidd_true;
};

struct FieldDataConfig {
  int n = 32;
  double dx = 0.0;  // <= 0: unit-length domain, 1/n
  double c = 1.0;
  int count = 5000;
  int snapshots_per_rollout = 10;
  int stride = 20;  // RK4 steps between snapshots
  double dt = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Snapshots of analytic-density rollouts from random smooth initial fields,
// labelled with the analytic accelerations.
std::vector<FieldSample> generate_field_dataset(const FieldDataConfig& cfg);

// Per-gridpoint acceleration MSE of a density network, and its parameter gradient.
double field_loss(const NetParams& density, std::span<const FieldSample> batch, const PinvConfig& cfg = {});
LossGrad field_loss_and_grad(const NetParams& density, std::span<const FieldSample> batch,
                             const PinvConfig& cfg = {});

// Trains a 6 -> 1 density network (cfg.model is ignored) with the trainer's loop.
TrainResult train_field(const TrainConfig& cfg, const std::vector<FieldSample>& dataset);

// Grid trajectory files: phi_path holds rows t,phi1..phin; rates_path holds
// rows t,phid1..phidn,E (E only if energies are present).
void write_grid_csv(const std::string& phi_path, const std::string& rates_path, const Trajectory& traj);

}  // namespace lnn
