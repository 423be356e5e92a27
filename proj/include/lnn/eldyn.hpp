#pragma once

#include "lnn/diffkit.hpp"
#include "lnn/types.hpp"

#include <utility>

namespace lnn {

// Generalized coordinates and velocities.
struct State {
  Vec q;
  Vec qd;

  int dof() const { return static_cast<int>(q.size()); }
  void validate() const;
};

struct PinvConfig {
  double rcond = 1e-10;  // singular values below rcond * sigma_max are dropped

  void validate() const;
};

struct AccelResult {
  Vec qdd;
  bool degenerate = false;  // the velocity Hessian was rank deficient
};

struct PinvSolve {
  Vec x;
  int rank = 0;
};

// Minimum-norm solution of a x = b through the SVD pseudoinverse.
PinvSolve pinv_solve(const Mat& a, const Vec& b, double rcond);

// qdd = pinv(H_qdqd) [grad_q L - J_q(grad_qd L) qd]
AccelResult lnn_accel(const ScalarFn& lagrangian, const State& s, const Vec& aux, const PinvConfig& cfg = {});

// Hamilton's equations: returns (dq/dt, dp/dt) = (dH/dp, -dH/dq). H is a
// ScalarFn whose second slot holds the canonical momenta.
std::pair<Vec, Vec> hnn_rhs(const ScalarFn& hamiltonian, const Vec& q, const Vec& p, const Vec& aux);

// Second time derivative of q along Hamilton's equations.
Vec hnn_accel(const ScalarFn& hamiltonian, const Vec& q, const Vec& p, const Vec& aux);

// Legendre transform E = qd . dL/dqd - L.
double energy(const ScalarFn& lagrangian, const State& s, const Vec& aux);

}  // namespace lnn
