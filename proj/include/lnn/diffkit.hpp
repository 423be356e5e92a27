#pragma once

#include "lnn/dual.hpp"
#include "lnn/types.hpp"

#include <functional>
#include <span>
#include <utility>

namespace lnn {

template <class T>
using ScalarEval = std::function<T(std::span<const T>, std::span<const T>, std::span<const double>)>;

// A twice-differentiable scalar function f(q, qd, aux) with q, qd of length
// dof() and a non-dynamical parameter vector aux of length aux_dim().
//
// Built from a generic callable so the same expression can be evaluated on
// doubles, on extended precision (for the finite-difference oracles) and on
// hyper-dual numbers (for exact derivatives):
//
//   ScalarFn free(1, 0, [](auto q, auto qd, auto) { return 0.5 * qd[0] * qd[0]; });
//
// The callable receives std::span<const T> for q and qd and
// std::span<const double> for aux.
class ScalarFn {
 public:
  ScalarFn() = default;

  template <class F>
  ScalarFn(int dof, int aux_dim, F f)
      : dof_(dof),
        aux_dim_(aux_dim),
        eval_d_([f](std::span<const double> q, std::span<const double> qd, std::span<const double> a) {
          return static_cast<double>(f(q, qd, a));
        }),
        eval_ld_([f](std::span<const long double> q, std::span<const long double> qd,
                     std::span<const double> a) { return static_cast<long double>(f(q, qd, a)); }),
        eval_dual_([f](std::span<const Dual2> q, std::span<const Dual2> qd, std::span<const double> a) {
          return Dual2(f(q, qd, a));
        }) {
    if (dof < 1 || aux_dim < 0) throw InvalidArgument("ScalarFn: dof must be >= 1 and aux_dim >= 0");
  }

  int dof() const { return dof_; }
  int aux_dim() const { return aux_dim_; }
  bool valid() const { return dof_ > 0; }

  double eval(std::span<const double> q, std::span<const double> qd, std::span<const double> aux) const {
    return eval_d_(q, qd, aux);
  }
  long double eval(std::span<const long double> q, std::span<const long double> qd,
                   std::span<const double> aux) const {
    return eval_ld_(q, qd, aux);
  }
  Dual2 eval(std::span<const Dual2> q, std::span<const Dual2> qd, std::span<const double> aux) const {
    return eval_dual_(q, qd, aux);
  }

  // Checked evaluation on Eigen vectors.
  double operator()(const Vec& q, const Vec& qd, const Vec& aux) const;

  // Throws InvalidArgument unless shapes match and every entry is finite.
  void check_inputs(const Vec& q, const Vec& qd, const Vec& aux) const;

 private:
  int dof_ = 0;
  int aux_dim_ = 0;
  ScalarEval<double> eval_d_;
  ScalarEval<long double> eval_ld_;
  ScalarEval<Dual2> eval_dual_;
};

// a * f + b, same arity as f.
ScalarFn affine(const ScalarFn& f, double a, double b);
ScalarFn operator+(const ScalarFn& f, const ScalarFn& g);

// Exact derivatives via hyper-dual forward passes.
Vec grad_q(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux);
Vec grad_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux);
// d2f/dqd_i dqd_j, symmetrized.
Mat hess_qd_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux);
// Entry (i, j) is d2f / dq_j dqd_i.
Mat jac_q_of_grad_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux);

// Everything the Euler-Lagrange solve needs, from one batch of passes.
struct SecondOrderTerms {
  double value = 0.0;
  Vec grad_q;
  Vec grad_qd;
  Mat hess_qd_qd;
  Mat jac_q_of_grad_qd;
};
SecondOrderTerms second_order_terms(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux);

// Central finite differences, evaluated in extended precision. Truncation
// error is O(step^2).
inline constexpr double kDefaultFdStep = 1e-5;

enum class Slot { q, qd };

Vec fd_grad(const ScalarFn& f, Slot wrt, const Vec& q, const Vec& qd, const Vec& aux,
            double step = kDefaultFdStep);
// Entry (i, j) is d2f / d(a)_i d(b)_j where a, b are the requested slots.
Mat fd_hessian(const ScalarFn& f, Slot a, Slot b, const Vec& q, const Vec& qd, const Vec& aux,
               double step = kDefaultFdStep);

}  // namespace lnn
