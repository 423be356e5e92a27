#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lnn/diffkit.hpp"
#include "lnn/netcore.hpp"
#include "lnn/physlib.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace lnn;
using oracle::rel_err;

namespace {

const Vec kNone(0);

ScalarFn half_qd_sq(int d) {
  return ScalarFn(d, 0, [](auto, auto qd, auto) {
    using T = typename decltype(qd)::value_type;
    T s(0.0);
    for (const auto& v : qd) s += 0.5 * v * v;
    return s;
  });
}

// Random states for each analytic system, inside its valid domain.
State random_state(const SystemSpec& spec, Rng& rng) { return sample_state(spec, rng).first; }

}  // namespace

TEST_CASE("grad_q examples") {
  CHECK(grad_q(half_qd_sq(1), Vec{{0.3}}, Vec{{0.7}}, kNone)[0] == 0.0);
  const ScalarFn ball = lagrangian(SystemSpec::ball(1.0, 9.8));
  const Vec g = grad_q(ball, Vec{{0.4, -2.0}}, Vec{{1.5, 0.2}}, kNone);
  CHECK(g[0] == doctest::Approx(-9.8).epsilon(1e-15));
  CHECK(g[1] == 0.0);

  const ScalarFn dp = lagrangian(SystemSpec::double_pendulum());
  const Vec q{{0.1, 0.2}}, qd{{0.0, 0.0}};
  CHECK(rel_err(grad_q(dp, q, qd, kNone), fd_grad(dp, Slot::q, q, qd, kNone)) < 1e-6);
}

TEST_CASE("grad_qd examples") {
  CHECK(grad_qd(half_qd_sq(1), Vec{{0.0}}, Vec{{0.7}}, kNone)[0] == doctest::Approx(0.7));
  const ScalarFn rel = lagrangian(SystemSpec::relativistic(1.0));
  const double p = grad_qd(rel, Vec{{0.0}}, Vec{{0.5}}, Vec{{1.0}})[0];
  CHECK(p == doctest::Approx(0.5 * std::pow(0.75, -1.5)).epsilon(1e-14));
  CHECK(p == doctest::Approx(0.7698).epsilon(1e-4));
  const Vec pb = grad_qd(lagrangian(SystemSpec::ball(1.0)), Vec{{0.0, 0.0}}, Vec{{1.0, 2.0}}, kNone);
  CHECK(pb[0] == doctest::Approx(1.0));
  CHECK(pb[1] == doctest::Approx(2.0));
}

TEST_CASE("hess_qd_qd examples") {
  const Mat hb = hess_qd_qd(lagrangian(SystemSpec::ball(1.0)), Vec{{0.3, 0.1}}, Vec{{1.0, -1.0}}, kNone);
  CHECK((hb - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  const Mat h3 = hess_qd_qd(half_qd_sq(3), Vec{{1.0, 2.0, 3.0}}, Vec{{-1.0, 0.5, 4.0}}, kNone);
  CHECK((h3 - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);

  const ScalarFn rel = lagrangian(SystemSpec::relativistic(1.0));
  const Mat hr = hess_qd_qd(rel, Vec{{0.2}}, Vec{{0.5}}, Vec{{1.0}});
  CHECK(hr(0, 0) == doctest::Approx(1.5 * std::pow(0.75, -2.5)).epsilon(1e-13));
  CHECK(hr(0, 0) == doctest::Approx(3.0792).epsilon(1e-4));
  CHECK(std::abs(fd_hessian(rel, Slot::qd, Slot::qd, Vec{{0.2}}, Vec{{0.5}}, Vec{{1.0}})(0, 0) - hr(0, 0)) < 1e-4);
}

TEST_CASE("jac_q_of_grad_qd examples") {
  const ScalarFn ball = lagrangian(SystemSpec::ball(1.0));
  CHECK(jac_q_of_grad_qd(ball, Vec{{0.3, 0.1}}, Vec{{1.0, -1.0}}, kNone).cwiseAbs().maxCoeff() == 0.0);
  const ScalarFn separable(2, 0, [](auto q, auto qd, auto) {
    using std::cos;
    using std::exp;
    return qd[0] * qd[0] * qd[1] + exp(qd[1]) + cos(q[0]) * q[1];
  });
  CHECK(jac_q_of_grad_qd(separable, Vec{{0.3, 0.1}}, Vec{{1.0, -1.0}}, kNone).cwiseAbs().maxCoeff() == 0.0);

  const ScalarFn dp = lagrangian(SystemSpec::double_pendulum());
  const Vec q{{0.3, -0.2}}, qd{{0.5, 0.1}};
  const Mat j = jac_q_of_grad_qd(dp, q, qd, kNone);
  // fd_hessian(qd, q) has entry (i, j) = d2f/dqd_i dq_j, the same layout.
  CHECK(rel_err(j, fd_hessian(dp, Slot::qd, Slot::q, q, qd, kNone)) < 1e-5);
  CHECK(j.cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("finite-difference oracle") {
  const ScalarFn sq(1, 0, [](auto q, auto, auto) { return q[0] * q[0]; });
  CHECK(std::abs(fd_grad(sq, Slot::q, Vec{{1.0}}, Vec{{0.0}}, kNone, 1e-4)[0] - 2.0) < 1e-7);
  CHECK_THROWS_AS(fd_grad(sq, Slot::q, Vec{{1.0}}, Vec{{0.0}}, kNone, 0.0), InvalidArgument);
  CHECK_THROWS_AS(fd_hessian(sq, Slot::q, Slot::q, Vec{{1.0}}, Vec{{0.0}}, kNone, -1e-3), InvalidArgument);
  const ScalarFn ball = lagrangian(SystemSpec::ball(1.0, 9.8));
  const Vec q{{0.2, 0.7}}, qd{{-0.1, 0.4}};
  CHECK((fd_grad(ball, Slot::q, q, qd, kNone) - grad_q(ball, q, qd, kNone)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("errors") {
  const ScalarFn ball = lagrangian(SystemSpec::ball());
  CHECK_THROWS_AS(grad_q(ball, Vec{{1.0}}, Vec{{1.0, 2.0}}, kNone), InvalidArgument);
  CHECK_THROWS_AS(grad_qd(ball, Vec{{1.0, 2.0}}, Vec{{1.0, 2.0}}, Vec{{1.0}}), InvalidArgument);
  CHECK_THROWS_AS(grad_q(ball, Vec{{1.0, NAN}}, Vec{{1.0, 2.0}}, kNone), InvalidArgument);

  // sqrt has an infinite derivative at 0: the second coordinate is reported.
  const ScalarFn kink(2, 0, [](auto q, auto, auto) {
    using std::sqrt;
    return q[0] + sqrt(q[1]);
  });
  try {
    grad_q(kink, Vec{{1.0, 0.0}}, Vec{{0.0, 0.0}}, kNone);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("derivatives agree with finite differences on every analytic system") {
  Rng rng(7);
  for (const SystemSpec& spec : {SystemSpec::ball(), SystemSpec::double_pendulum(), SystemSpec::relativistic()}) {
    const ScalarFn f = lagrangian(spec);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      auto [s, aux] = sample_state(spec, rng);
      worst = std::max(worst, rel_err(grad_q(f, s.q, s.qd, aux), fd_grad(f, Slot::q, s.q, s.qd, aux)));
      worst = std::max(worst, rel_err(grad_qd(f, s.q, s.qd, aux), fd_grad(f, Slot::qd, s.q, s.qd, aux)));
      worst = std::max(worst, rel_err(hess_qd_qd(f, s.q, s.qd, aux),
                                      fd_hessian(f, Slot::qd, Slot::qd, s.q, s.qd, aux)));
      worst = std::max(worst, rel_err(jac_q_of_grad_qd(f, s.q, s.qd, aux),
                                      fd_hessian(f, Slot::qd, Slot::q, s.q, s.qd, aux)));
    }
    INFO(to_string(spec.name));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("derivatives agree with finite differences on random networks") {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetParams net = oracle::small_net(4, 16, seed, 4);
    const ScalarFn f = as_scalar_fn(net, 2);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Vec q = oracle::random_vec(rng, 2, -1.0, 1.0);
      const Vec qd = oracle::random_vec(rng, 2, -1.0, 1.0);
      worst = std::max(worst, rel_err(grad_q(f, q, qd, kNone), fd_grad(f, Slot::q, q, qd, kNone)));
      worst = std::max(worst, rel_err(grad_qd(f, q, qd, kNone), fd_grad(f, Slot::qd, q, qd, kNone)));
      worst = std::max(worst, rel_err(hess_qd_qd(f, q, qd, kNone), fd_hessian(f, Slot::qd, Slot::qd, q, qd, kNone)));
      worst = std::max(worst,
                       rel_err(jac_q_of_grad_qd(f, q, qd, kNone), fd_hessian(f, Slot::qd, Slot::q, q, qd, kNone)));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("hessian is exactly symmetric") {
  const ScalarFn dp = lagrangian(SystemSpec::double_pendulum());
  const ScalarFn net = as_scalar_fn(oracle::small_net(4, 16, 3), 2);
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Vec q = oracle::random_vec(rng, 2, -3.0, 3.0), qd = oracle::random_vec(rng, 2, -2.0, 2.0);
    for (const ScalarFn* f : {&dp, &net}) {
      const Mat h = hess_qd_qd(*f, q, qd, kNone);
      CHECK(h(0, 1) == h(1, 0));
    }
  }
}

TEST_CASE("linearity: derivative of a sum is the sum of derivatives") {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScalarFn f = as_scalar_fn(oracle::small_net(4, 8, seed), 2);
    const ScalarFn g = as_scalar_fn(oracle::small_net(4, 8, seed + 100), 2);
    const ScalarFn h = f + g;
    const Vec q = oracle::random_vec(rng, 2, -1.0, 1.0), qd = oracle::random_vec(rng, 2, -1.0, 1.0);
    CHECK(rel_err(grad_q(h, q, qd, kNone), grad_q(f, q, qd, kNone) + grad_q(g, q, qd, kNone)) < 1e-12);
    CHECK(rel_err(hess_qd_qd(h, q, qd, kNone), hess_qd_qd(f, q, qd, kNone) + hess_qd_qd(g, q, qd, kNone)) < 1e-12);
    CHECK(rel_err(jac_q_of_grad_qd(h, q, qd, kNone),
                  jac_q_of_grad_qd(f, q, qd, kNone) + jac_q_of_grad_qd(g, q, qd, kNone)) < 1e-12);
  }
}

TEST_CASE("second_order_terms matches the individual helpers") {
  const ScalarFn dp = lagrangian(SystemSpec::double_pendulum());
  const Vec q{{0.3, -1.2}}, qd{{0.4, 0.9}};
  const SecondOrderTerms t = second_order_terms(dp, q, qd, kNone);
  CHECK(t.value == doctest::Approx(dp(q, qd, kNone)).epsilon(1e-15));
  CHECK((t.grad_q - grad_q(dp, q, qd, kNone)).norm() == 0.0);
  CHECK((t.grad_qd - grad_qd(dp, q, qd, kNone)).norm() == 0.0);
  CHECK((t.hess_qd_qd - hess_qd_qd(dp, q, qd, kNone)).norm() == 0.0);
  CHECK((t.jac_q_of_grad_qd - jac_q_of_grad_qd(dp, q, qd, kNone)).norm() == 0.0);
}

TEST_CASE("evaluation is deterministic") {
  const ScalarFn f = as_scalar_fn(oracle::small_net(4, 16, 9), 2);
  const Vec q{{0.1, 0.2}}, qd{{0.3, 0.4}};
  CHECK(f(q, qd, kNone) == f(q, qd, kNone));
  CHECK((hess_qd_qd(f, q, qd, kNone) - hess_qd_qd(f, q, qd, kNone)).norm() == 0.0);
}
