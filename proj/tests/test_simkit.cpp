#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lnn/eldyn.hpp"
#include "lnn/simkit.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace lnn;

namespace {
const AccelFn kOscillator = [](const State& s) { return Vec(-s.q); };

double oscillator_error(double dt, double t_end) {
  const int steps = static_cast<int>(std::lround(t_end / dt));
  State s{Vec{{1.0}}, Vec{{0.0}}};
  for (int k = 0; k < steps; ++k) s = rk4_step(kOscillator, s, dt);
  return std::hypot(s.q[0] - std::cos(t_end), s.qd[0] + std::sin(t_end));
}
}  // namespace

TEST_CASE("rk4 examples") {
  const AccelFn zero = [](const State& s) { return Vec(Vec::Zero(s.dof())); };
  const State d = rk4_step(zero, State{Vec{{0.0}}, Vec{{1.0}}}, 0.1);
  CHECK(d.q[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(d.qd[0] == 1.0);

  const SystemSpec ball = SystemSpec::ball(1.0, 9.8);
  const State b = rk4_step([&](const State& s) { return closed_form_accel(ball, s); },
                           State{Vec{{0.0, 0.0}}, Vec{{0.0, 0.0}}}, 0.1);
  CHECK(b.qd[0] == doctest::Approx(-0.98).epsilon(1e-14));
  CHECK(b.q[0] == doctest::Approx(-0.049).epsilon(1e-14));
  CHECK(b.q[1] == 0.0);

  const double period = 2.0 * std::numbers::pi;
  const int steps = static_cast<int>(std::lround(period / 1e-3));
  State s{Vec{{1.0}}, Vec{{0.0}}};
  const double dt = period / steps;
  for (int k = 0; k < steps; ++k) s = rk4_step(kOscillator, s, dt);
  CHECK(std::abs(s.q[0] - 1.0) < 1e-9);
  CHECK(std::abs(s.qd[0]) < 1e-9);

  CHECK_THROWS_AS(rk4_step(zero, State{Vec{{0.0}}, Vec{{1.0}}}, 0.0), InvalidArgument);
}

TEST_CASE("rk4 global error is fourth order") {
  const double e1 = oscillator_error(0.1, 10.0);
  const double e2 = oscillator_error(0.05, 10.0);
  const double ratio = e1 / e2;
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("first-order rk4 matches the second-order form") {
  const RhsFn f = [](const Vec& y) { return Vec{{y[1], -y[0]}}; };
  Vec y{{0.3, -0.2}};
  State s{Vec{{0.3}}, Vec{{-0.2}}};
  for (int k = 0; k < 50; ++k) {
    y = rk4_step(f, y, 0.05);
    s = rk4_step(kOscillator, s, 0.05);
  }
  CHECK(std::abs(y[0] - s.q[0]) < 1e-14);
  CHECK(std::abs(y[1] - s.qd[0]) < 1e-14);
}

TEST_CASE("rollout") {
  const State s0{Vec{{1.0, 2.0}}, Vec{{0.5, -0.5}}};
  const State copy = s0;
  const Trajectory t = rollout([](const State& s) { return Vec(-s.q); }, s0, 0.01, 25);
  CHECK(t.size() == 26);
  CHECK(t.times.size() == 26);
  CHECK(t.times[25] == doctest::Approx(0.25));
  CHECK((t.states[0].q - s0.q).norm() == 0.0);
  CHECK((copy.q - s0.q).norm() == 0.0);
  for (int k = 1; k < 26; ++k) CHECK(t.times[k] > t.times[k - 1]);

  // A blow-up on the fourth step reports that step.
  int calls = 0;
  const AccelFn blowup = [&](const State& s) {
    ++calls;
    return calls > 12 ? Vec(Vec::Constant(s.dof(), NAN)) : Vec(-s.q);
  };
  try {
    rollout(blowup, s0, 0.01, 10);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 4);
  }
  CHECK_THROWS_AS(rollout(blowup, s0, 0.01, 0), InvalidArgument);
}

TEST_CASE("analytic double pendulum rollout conserves energy") {
  const SystemSpec spec = SystemSpec::double_pendulum();
  const State s0{Vec{{2.0, -1.0}}, Vec{{0.5, 0.9}}};
  const Trajectory t = rollout([&](const State& s) { return closed_form_accel(spec, s); }, s0, 1e-3, 100);
  const double e0 = true_energy(spec, s0);
  for (const auto& s : t.states) CHECK(std::abs(true_energy(spec, s) - e0) < 1e-6 * std::abs(e0));
}

TEST_CASE("dataset generation") {
  const SystemSpec spec = SystemSpec::double_pendulum();
  const auto a = generate_dataset(spec, 200, 3);
  const auto b = generate_dataset(spec, 200, 3);
  REQUIRE(a.size() == 200);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].state.q - b[i].state.q).norm() == 0.0);
    CHECK((a[i].qdd_true - b[i].qdd_true).norm() == 0.0);
  }
  const Sample one = generate_sample(spec, 3, 17);
  CHECK((one.state.qd - a[17].state.qd).norm() == 0.0);
  CHECK((generate_dataset(spec, 1, 3)[0].state.q - a[0].state.q).norm() == 0.0);
  CHECK((generate_dataset(spec, 1, 4)[0].state.q - a[0].state.q).norm() > 0.0);
  CHECK_THROWS_AS(generate_dataset(spec, 0, 3), InvalidArgument);

  for (const SystemSpec& sys : {spec, SystemSpec::relativistic()}) {
    for (const auto& s : generate_dataset(sys, 100, 8)) {
      const Vec qdd = lnn_accel(lagrangian(sys), s.state, s.aux).qdd;
      CHECK(oracle::rel_err(qdd, s.qdd_true) < 1e-8);
    }
  }
}

TEST_CASE("dataset marginals match the configured ranges") {
  const auto dp = generate_dataset(SystemSpec::double_pendulum(), 3000, 123);
  std::vector<double> th, thd;
  for (const auto& s : dp) {
    th.push_back(s.state.q[0]);
    thd.push_back(s.state.qd[1]);
  }
  CHECK(oracle::ks_uniform_pvalue(th, -std::numbers::pi, std::numbers::pi) > 0.01);
  CHECK(oracle::ks_uniform_pvalue(thd, -1.0, 1.0) > 0.01);

  const auto rel = generate_dataset(SystemSpec::relativistic(), 3000, 124);
  std::vector<double> q, v, g;
  for (const auto& s : rel) {
    q.push_back(s.state.q[0]);
    v.push_back(s.state.qd[0]);
    g.push_back(s.aux[0]);
  }
  CHECK(oracle::ks_uniform_pvalue(q, -1.0, 1.0) > 0.01);
  CHECK(oracle::ks_uniform_pvalue(v, -0.9, 0.9) > 0.01);
  CHECK(oracle::ks_uniform_pvalue(g, 0.5, 2.0) > 0.01);
  // The test has power: a shifted range is rejected.
  CHECK(oracle::ks_uniform_pvalue(v, -0.8, 1.0) < 0.01);
}

TEST_CASE("JSON-lines round trip is bit exact") {
  const auto data = generate_dataset(SystemSpec::relativistic(), 50, 9);
  std::stringstream buf;
  write_jsonl(buf, data);
  const auto back = read_jsonl(buf);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK((back[i].state.q - data[i].state.q).norm() == 0.0);
    CHECK((back[i].state.qd - data[i].state.qd).norm() == 0.0);
    CHECK((back[i].qdd_true - data[i].qdd_true).norm() == 0.0);
    CHECK((back[i].aux - data[i].aux).norm() == 0.0);
  }
  std::stringstream bad("{\"q\":[1],\"qd\":[1,2],\"qdd\":[0]}\n");
  CHECK_THROWS_AS(read_jsonl(bad), InvalidArgument);
  std::stringstream broken("{\"q\":[1]\n");
  CHECK_THROWS_AS(read_jsonl(broken), InvalidArgument);
}

TEST_CASE("trajectory CSV") {
  Trajectory t = rollout([](const State& s) { return Vec(-s.q); }, State{Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}}, 0.1, 2);
  std::stringstream out;
  write_trajectory_csv(out, t);
  std::string header;
  std::getline(out, header);
  CHECK(header == "t,q1,q2,qd1,qd2");
  t.energies = Vec::Ones(3);
  std::stringstream out2;
  write_trajectory_csv(out2, t);
  std::getline(out2, header);
  CHECK(header == "t,q1,q2,qd1,qd2,E");
  std::string row;
  std::getline(out2, row);
  CHECK(row == "0,1,0,0,1,1");
}

TEST_CASE("format_double round trips") {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-30.0, 30.0));
    CHECK(std::stod(format_double(x)) == x);
  }
}
