#include "lnn/diffkit.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace lnn {

namespace {

std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::vector<Dual2> lift(const Vec& v) {
  std::vector<Dual2> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = Dual2(v[i]);
  return out;
}

// One hyper-dual pass with d1 seeded on (slot_a, i) and d2 seeded on (slot_b, j).
// A negative index leaves that seed empty.
Dual2 seeded_pass(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux, Slot slot_a, int i,
                  Slot slot_b, int j) {
  std::vector<Dual2> dq = lift(q);
  std::vector<Dual2> dqd = lift(qd);
  if (i >= 0) (slot_a == Slot::q ? dq : dqd)[i].d1 = 1.0;
  if (j >= 0) (slot_b == Slot::q ? dq : dqd)[j].d2 = 1.0;
  return f.eval(std::span<const Dual2>(dq), std::span<const Dual2>(dqd), as_span(aux));
}

void require_finite(double x, const char* what, std::ptrdiff_t index) {
  if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite derivative", index);
}

Vec first_derivatives(const ScalarFn& f, Slot slot, const Vec& q, const Vec& qd, const Vec& aux,
                      const char* what) {
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  Vec g(d);
  for (int i = 0; i < d; ++i) {
    g[i] = seeded_pass(f, q, qd, aux, slot, i, slot, -1).d1;
    require_finite(g[i], what, i);
  }
  return g;
}

}  // namespace

void ScalarFn::check_inputs(const Vec& q, const Vec& qd, const Vec& aux) const {
  if (!valid()) throw InvalidArgument("ScalarFn: evaluating an empty function");
  if (q.size() != dof_ || qd.size() != dof_)
    throw InvalidArgument("ScalarFn: expected q and qd of length " + std::to_string(dof_) + ", got " +
                          std::to_string(q.size()) + " and " + std::to_string(qd.size()));
  if (aux.size() != aux_dim_)
    throw InvalidArgument("ScalarFn: expected aux of length " + std::to_string(aux_dim_) + ", got " +
                          std::to_string(aux.size()));
  if (!q.allFinite() || !qd.allFinite() || !aux.allFinite())
    throw InvalidArgument("ScalarFn: non-finite input");
}

double ScalarFn::operator()(const Vec& q, const Vec& qd, const Vec& aux) const {
  check_inputs(q, qd, aux);
  return eval(as_span(q), as_span(qd), as_span(aux));
}

ScalarFn affine(const ScalarFn& f, double a, double b) {
  return ScalarFn(f.dof(), f.aux_dim(), [f, a, b](auto q, auto qd, auto aux) { return a * f.eval(q, qd, aux) + b; });
}

ScalarFn operator+(const ScalarFn& f, const ScalarFn& g) {
  if (f.dof() != g.dof() || f.aux_dim() != g.aux_dim())
    throw InvalidArgument("ScalarFn sum: arity mismatch");
  return ScalarFn(f.dof(), f.aux_dim(),
                  [f, g](auto q, auto qd, auto aux) { return f.eval(q, qd, aux) + g.eval(q, qd, aux); });
}

Vec grad_q(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux) {
  return first_derivatives(f, Slot::q, q, qd, aux, "grad_q");
}

Vec grad_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux) {
  return first_derivatives(f, Slot::qd, q, qd, aux, "grad_qd");
}

Mat hess_qd_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux) {
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  Mat h(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double hij = seeded_pass(f, q, qd, aux, Slot::qd, i, Slot::qd, j).d12;
      require_finite(hij, "hess_qd_qd", i * d + j);
      h(i, j) = hij;
      h(j, i) = hij;
    }
  }
  return 0.5 * (h + h.transpose());
}

Mat jac_q_of_grad_qd(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux) {
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  Mat m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      m(i, j) = seeded_pass(f, q, qd, aux, Slot::qd, i, Slot::q, j).d12;
      require_finite(m(i, j), "jac_q_of_grad_qd", i * d + j);
    }
  }
  return m;
}

SecondOrderTerms second_order_terms(const ScalarFn& f, const Vec& q, const Vec& qd, const Vec& aux) {
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  SecondOrderTerms t;
  t.grad_q.resize(d);
  t.grad_qd.resize(d);
  t.hess_qd_qd.resize(d, d);
  t.jac_q_of_grad_qd.resize(d, d);
  // Velocity-Hessian passes also deliver grad_qd (d1) and the mixed passes
  // deliver grad_q (d2), so the first derivatives come for free.
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const Dual2 r = seeded_pass(f, q, qd, aux, Slot::qd, i, Slot::qd, j);
      require_finite(r.d12, "hess_qd_qd", i * d + j);
      t.hess_qd_qd(i, j) = r.d12;
      t.hess_qd_qd(j, i) = r.d12;
      if (j == i) {
        t.grad_qd[i] = r.d1;
        t.value = r.v;
      }
    }
    for (int j = 0; j < d; ++j) {
      const Dual2 r = seeded_pass(f, q, qd, aux, Slot::qd, i, Slot::q, j);
      require_finite(r.d12, "jac_q_of_grad_qd", i * d + j);
      t.jac_q_of_grad_qd(i, j) = r.d12;
      if (i == 0) t.grad_q[j] = r.d2;
    }
  }
  for (int i = 0; i < d; ++i) {
    require_finite(t.grad_q[i], "grad_q", i);
    require_finite(t.grad_qd[i], "grad_qd", i);
  }
  t.hess_qd_qd = 0.5 * (t.hess_qd_qd + t.hess_qd_qd.transpose());
  return t;
}

namespace {

struct LongPoint {
  std::vector<long double> q;
  std::vector<long double> qd;

  std::vector<long double>& slot(Slot s) { return s == Slot::q ? q : qd; }
};

LongPoint widen(const Vec& q, const Vec& qd) {
  LongPoint p;
  p.q.assign(q.data(), q.data() + q.size());
  p.qd.assign(qd.data(), qd.data() + qd.size());
  return p;
}

long double eval_at(const ScalarFn& f, const LongPoint& p, const Vec& aux) {
  return f.eval(std::span<const long double>(p.q), std::span<const long double>(p.qd), as_span(aux));
}

}  // namespace

Vec fd_grad(const ScalarFn& f, Slot wrt, const Vec& q, const Vec& qd, const Vec& aux, double step) {
  if (!(step > 0.0)) throw InvalidArgument("fd_grad: step must be positive");
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  const long double h = step;
  Vec g(d);
  for (int i = 0; i < d; ++i) {
    LongPoint plus = widen(q, qd);
    LongPoint minus = plus;
    plus.slot(wrt)[i] += h;
    minus.slot(wrt)[i] -= h;
    g[i] = static_cast<double>((eval_at(f, plus, aux) - eval_at(f, minus, aux)) / (2.0L * h));
  }
  return g;
}

Mat fd_hessian(const ScalarFn& f, Slot a, Slot b, const Vec& q, const Vec& qd, const Vec& aux, double step) {
  if (!(step > 0.0)) throw InvalidArgument("fd_hessian: step must be positive");
  f.check_inputs(q, qd, aux);
  const int d = f.dof();
  const long double h = step;
  Mat out(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      // Four-point mixed stencil; reduces to the standard second difference
      // with step 2h when (a, i) == (b, j).
      long double acc = 0.0L;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          LongPoint p = widen(q, qd);
          p.slot(a)[i] += si * h;
          p.slot(b)[j] += sj * h;
          acc += si * sj * eval_at(f, p, aux);
        }
      }
      out(i, j) = static_cast<double>(acc / (4.0L * h * h));
    }
  }
  return out;
}

}  // namespace lnn
