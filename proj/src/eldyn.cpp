#include "lnn/eldyn.hpp"

#include <Eigen/SVD>

namespace lnn {

void State::validate() const {
  if (q.size() != qd.size()) throw InvalidArgument("State: q and qd differ in length");
  if (q.size() == 0) throw InvalidArgument("State: empty");
  if (!q.allFinite() || !qd.allFinite()) throw InvalidArgument("State: non-finite entries");
}

void PinvConfig::validate() const {
  if (!(rcond > 0.0 && rcond < 1.0)) throw InvalidArgument("PinvConfig: rcond must lie in (0, 1)");
}

PinvSolve pinv_solve(const Mat& a, const Vec& b, double rcond) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidArgument("pinv_solve: shape mismatch");
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  PinvSolve out;
  out.x = Vec::Zero(a.cols());
  if (sv.size() == 0 || sv[0] == 0.0) return out;
  const double cutoff = rcond * sv[0];
  Vec utb = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) {
      utb[i] /= sv[i];
      ++out.rank;
    } else {
      utb[i] = 0.0;
    }
  }
  out.x = svd.matrixV() * utb;
  return out;
}

AccelResult lnn_accel(const ScalarFn& lagrangian, const State& s, const Vec& aux, const PinvConfig& cfg) {
  s.validate();
  cfg.validate();
  const SecondOrderTerms t = second_order_terms(lagrangian, s.q, s.qd, aux);
  const Vec rhs = t.grad_q - t.jac_q_of_grad_qd * s.qd;
  const PinvSolve sol = pinv_solve(t.hess_qd_qd, rhs, cfg.rcond);
  AccelResult r;
  r.qdd = sol.x;
  r.degenerate = sol.rank < s.dof();
  for (Eigen::Index i = 0; i < r.qdd.size(); ++i)
    if (!std::isfinite(r.qdd[i])) throw NumericError("lnn_accel: non-finite acceleration", i);
  return r;
}

std::pair<Vec, Vec> hnn_rhs(const ScalarFn& hamiltonian, const Vec& q, const Vec& p, const Vec& aux) {
  Vec dq = grad_qd(hamiltonian, q, p, aux);
  Vec dp = -grad_q(hamiltonian, q, p, aux);
  return {std::move(dq), std::move(dp)};
}

Vec hnn_accel(const ScalarFn& hamiltonian, const Vec& q, const Vec& p, const Vec& aux) {
  const SecondOrderTerms t = second_order_terms(hamiltonian, q, p, aux);
  // d/dt dH/dp = H_pq qdot + H_pp pdot along the Hamiltonian flow.
  return t.jac_q_of_grad_qd * t.grad_qd - t.hess_qd_qd * t.grad_q;
}

double energy(const ScalarFn& lagrangian, const State& s, const Vec& aux) {
  s.validate();
  return s.qd.dot(grad_qd(lagrangian, s.q, s.qd, aux)) - lagrangian(s.q, s.qd, aux);
}

}  // namespace lnn
