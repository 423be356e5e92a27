#include "lnn/physlib.hpp"

#include <cmath>
#include <numbers>

namespace lnn {

namespace {

constexpr double kPi = std::numbers::pi;

void require_dof(const SystemSpec& spec, const State& s) {
  s.validate();
  if (s.dof() != spec.dof)
    throw InvalidArgument(to_string(spec.name) + ": expected " + std::to_string(spec.dof) + " coordinates, got " +
                          std::to_string(s.dof()));
}

double rel_g(const SystemSpec& spec, const Vec& aux) {
  if (aux.size() != 1) throw InvalidArgument("relativistic: aux must hold g");
  (void)spec;
  return aux[0];
}

void require_subluminal(double v) {
  if (!(std::abs(v) < 1.0)) throw DomainError("relativistic: |qd| >= 1 (superluminal)");
}

std::ptrdiff_t wrap(std::ptrdiff_t i, std::ptrdiff_t n) { return ((i % n) + n) % n; }

}  // namespace

std::string to_string(System s) {
  switch (s) {
    case System::ball: return "ball";
    case System::double_pendulum: return "double_pendulum";
    case System::relativistic: return "relativistic";
    case System::wave1d: return "wave1d";
  }
  return "?";
}

System parse_system(const std::string& name) {
  if (name == "ball") return System::ball;
  if (name == "double_pendulum") return System::double_pendulum;
  if (name == "relativistic") return System::relativistic;
  if (name == "wave1d") return System::wave1d;
  throw InvalidArgument("unknown system '" + name + "'");
}

SystemSpec SystemSpec::ball(double m, double g) {
  SystemSpec s;
  s.name = System::ball;
  s.params = Vec{{m, g}};
  s.dof = 2;
  return s;
}

SystemSpec SystemSpec::double_pendulum(double g, double m1, double m2, double l1, double l2) {
  SystemSpec s;
  s.name = System::double_pendulum;
  s.params = Vec{{m1, m2, l1, l2, g}};
  s.dof = 2;
  return s;
}

SystemSpec SystemSpec::relativistic(double g) {
  SystemSpec s;
  s.name = System::relativistic;
  s.params = Vec{{g}};
  s.dof = 1;
  return s;
}

SystemSpec SystemSpec::wave1d(int n, double dx, double c) {
  SystemSpec s;
  s.name = System::wave1d;
  s.params = Vec{{c, dx > 0.0 ? dx : 1.0 / n}};
  s.dof = n;
  return s;
}

SystemSpec SystemSpec::by_name(System name, int grid_points) {
  switch (name) {
    case System::ball: return ball();
    case System::double_pendulum: return double_pendulum();
    case System::relativistic: return relativistic();
    case System::wave1d: return wave1d(grid_points);
  }
  throw InvalidArgument("unknown system");
}

void SystemSpec::validate() const {
  if (!params.allFinite()) throw InvalidArgument(to_string(name) + ": non-finite parameters");
  switch (name) {
    case System::ball:
      if (params.size() != 2 || dof != 2 || params[0] <= 0) throw InvalidArgument("ball: params (m > 0, g), dof 2");
      break;
    case System::double_pendulum:
      if (params.size() != 5 || dof != 2 || (params.head(4).array() <= 0).any())
        throw InvalidArgument("double_pendulum: params (m1, m2, l1, l2 > 0, g), dof 2");
      break;
    case System::relativistic:
      if (params.size() != 1 || dof != 1) throw InvalidArgument("relativistic: params (g), dof 1");
      break;
    case System::wave1d:
      if (params.size() != 2 || dof < 3 || params[1] <= 0)
        throw InvalidArgument("wave1d: params (c, dx > 0), at least 3 grid points");
      break;
  }
}

ScalarFn lagrangian(const SystemSpec& spec) {
  spec.validate();
  const Vec& p = spec.params;
  switch (spec.name) {
    case System::ball: {
      const double m = p[0], g = p[1];
      return ScalarFn(2, 0, [m, g](auto q, auto qd, auto) {
        return 0.5 * m * (qd[0] * qd[0] + qd[1] * qd[1]) - m * g * q[0];
      });
    }
    case System::double_pendulum: {
      const double m1 = p[0], m2 = p[1], l1 = p[2], l2 = p[3], g = p[4];
      return ScalarFn(2, 0, [=](auto q, auto qd, auto) {
        using std::cos;
        const auto t = 0.5 * (m1 + m2) * l1 * l1 * qd[0] * qd[0] + 0.5 * m2 * l2 * l2 * qd[1] * qd[1] +
                       m2 * l1 * l2 * qd[0] * qd[1] * cos(q[0] - q[1]);
        const auto v = -(m1 + m2) * g * l1 * cos(q[0]) - m2 * g * l2 * cos(q[1]);
        return t - v;
      });
    }
    case System::relativistic:
      return ScalarFn(1, 1, [](auto q, auto qd, auto aux) {
        using std::pow;
        return (pow(1.0 - qd[0] * qd[0], -0.5) - 1.0) + aux[0] * q[0];
      });
    case System::wave1d: {
      const double c = p[0], dx = p[1];
      const int n = spec.dof;
      return ScalarFn(n, 0, [c, dx, n](auto q, auto qd, auto) {
        using T = typename decltype(q)::value_type;
        T total(0.0);
        for (int i = 0; i < n; ++i) {
          const auto grad = (q[wrap(i + 1, n)] - q[wrap(i - 1, n)]) / (2.0 * dx);
          total += qd[i] * qd[i] - c * c * grad * grad;
        }
        return total;
      });
    }
  }
  throw InvalidArgument("lagrangian: unknown system");
}

Vec default_aux(const SystemSpec& spec) {
  if (spec.name == System::relativistic) return Vec{{spec.params[0]}};
  return Vec(0);
}

Vec closed_form_accel(const SystemSpec& spec, const State& s, const Vec& aux) {
  spec.validate();
  require_dof(spec, s);
  const Vec& p = spec.params;
  switch (spec.name) {
    case System::ball: return Vec{{-p[1], 0.0}};
    case System::double_pendulum: {
      const double m1 = p[0], m2 = p[1], l1 = p[2], l2 = p[3], g = p[4];
      const double t1 = s.q[0], t2 = s.q[1], w1 = s.qd[0], w2 = s.qd[1];
      const double delta = t1 - t2;
      // Mass matrix [[a11, a12], [a12, a22]] and generalized forces f.
      const double a11 = (m1 + m2) * l1 * l1;
      const double a12 = m2 * l1 * l2 * std::cos(delta);
      const double a22 = m2 * l2 * l2;
      const double f1 = -m2 * l1 * l2 * w2 * w2 * std::sin(delta) - (m1 + m2) * g * l1 * std::sin(t1);
      const double f2 = m2 * l1 * l2 * w1 * w1 * std::sin(delta) - m2 * g * l2 * std::sin(t2);
      const double det = a11 * a22 - a12 * a12;
      return Vec{{(a22 * f1 - a12 * f2) / det, (a11 * f2 - a12 * f1) / det}};
    }
    case System::relativistic: {
      const double g = rel_g(spec, aux);
      const double v = s.qd[0];
      require_subluminal(v);
      return Vec{{g * std::pow(1.0 - v * v, 2.5) / (1.0 + 2.0 * v * v)}};
    }
    case System::wave1d: {
      const double c = p[0], dx = p[1];
      const Eigen::Index n = s.q.size();
      Vec a(n);
      for (Eigen::Index i = 0; i < n; ++i)
        a[i] = c * c * (s.q[wrap(i + 2, n)] - 2.0 * s.q[i] + s.q[wrap(i - 2, n)]) / (4.0 * dx * dx);
      return a;
    }
  }
  throw InvalidArgument("closed_form_accel: unknown system");
}

double true_energy(const SystemSpec& spec, const State& s, const Vec& aux) {
  spec.validate();
  require_dof(spec, s);
  const Vec& p = spec.params;
  switch (spec.name) {
    case System::ball: return 0.5 * p[0] * s.qd.squaredNorm() + p[0] * p[1] * s.q[0];
    case System::double_pendulum: {
      const double m1 = p[0], m2 = p[1], l1 = p[2], l2 = p[3], g = p[4];
      const double t = 0.5 * (m1 + m2) * l1 * l1 * s.qd[0] * s.qd[0] + 0.5 * m2 * l2 * l2 * s.qd[1] * s.qd[1] +
                       m2 * l1 * l2 * s.qd[0] * s.qd[1] * std::cos(s.q[0] - s.q[1]);
      const double v = -(m1 + m2) * g * l1 * std::cos(s.q[0]) - m2 * g * l2 * std::cos(s.q[1]);
      return t + v;
    }
    case System::relativistic: {
      // Legendre transform of the Lagrangian: the quantity conserved by its flow.
      const double g = rel_g(spec, aux);
      const double v = s.qd[0];
      require_subluminal(v);
      const double w = 1.0 - v * v;
      return v * v * std::pow(w, -1.5) - std::pow(w, -0.5) + 1.0 - g * s.q[0];
    }
    case System::wave1d: {
      const double c = p[0], dx = p[1];
      const Eigen::Index n = s.q.size();
      double e = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double grad = (s.q[wrap(i + 1, n)] - s.q[wrap(i - 1, n)]) / (2.0 * dx);
        e += s.qd[i] * s.qd[i] + c * c * grad * grad;
      }
      return e;
    }
  }
  throw InvalidArgument("true_energy: unknown system");
}

double max_potential_energy(const SystemSpec& spec) {
  spec.validate();
  const Vec& p = spec.params;
  switch (spec.name) {
    case System::ball: return p[0] * std::abs(p[1]);
    case System::double_pendulum: {
      const double m1 = p[0], m2 = p[1], l1 = p[2], l2 = p[3], g = p[4];
      return 2.0 * (m1 + m2) * g * l1 + 2.0 * m2 * g * l2;
    }
    case System::relativistic: return 2.0 * std::abs(p[0]);
    case System::wave1d: break;
  }
  throw InvalidArgument("max_potential_energy: not defined for " + to_string(spec.name));
}

std::pair<Vec, Vec> to_canonical(const SystemSpec& spec, const State& s, const Vec& aux) {
  spec.validate();
  require_dof(spec, s);
  if (spec.name == System::relativistic) require_subluminal(s.qd[0]);
  return {s.q, grad_qd(lagrangian(spec), s.q, s.qd, aux)};
}

State from_canonical(const SystemSpec& spec, const Vec& q, const Vec& p, const Vec& aux) {
  spec.validate();
  if (q.size() != spec.dof || p.size() != spec.dof) throw InvalidArgument("from_canonical: dimension mismatch");
  if (spec.name == System::relativistic) {
    // p(v) = v (1 - v^2)^(-3/2) is strictly increasing on (-1, 1) and unbounded.
    const double target = p[0];
    if (!std::isfinite(target)) throw InvalidArgument("from_canonical: non-finite momentum");
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      const double pm = mid * std::pow(1.0 - mid * mid, -1.5);
      (pm < target ? lo : hi) = mid;
    }
    (void)aux;
    return State{q, Vec{{0.5 * (lo + hi)}}};
  }
  // Quadratic kinetic energy: p = M(q) qd with M the velocity Hessian.
  const ScalarFn l = lagrangian(spec);
  const Vec zero = Vec::Zero(spec.dof);
  const Mat m = hess_qd_qd(l, q, zero, aux);
  const Vec offset = grad_qd(l, q, zero, aux);
  return State{q, m.ldlt().solve(p - offset)};
}

std::pair<State, Vec> sample_state(const SystemSpec& spec, Rng& rng) {
  spec.validate();
  State s;
  Vec aux = default_aux(spec);
  const int d = spec.dof;
  s.q.resize(d);
  s.qd.resize(d);
  switch (spec.name) {
    case System::ball:
      for (int i = 0; i < d; ++i) s.q[i] = rng.uniform(-1.0, 1.0);
      for (int i = 0; i < d; ++i) s.qd[i] = rng.uniform(-1.0, 1.0);
      break;
    case System::double_pendulum:
      for (int i = 0; i < d; ++i) s.q[i] = rng.uniform(-kPi, kPi);
      for (int i = 0; i < d; ++i) s.qd[i] = rng.uniform(-1.0, 1.0);
      break;
    case System::relativistic:
      s.q[0] = rng.uniform(-1.0, 1.0);
      s.qd[0] = rng.uniform(-kRelativisticMaxSpeed, kRelativisticMaxSpeed);
      aux[0] = rng.uniform(kRelativisticGMin, kRelativisticGMax);
      break;
    case System::wave1d: {
      const double c = spec.params[0], dx = spec.params[1];
      const double length = d * dx;
      s.q.setZero();
      s.qd.setZero();
      const int modes = 1 + static_cast<int>(rng.uniform() * 3.0);
      for (int m = 0; m < modes; ++m) {
        const int k = 1 + static_cast<int>(rng.uniform() * 3.0);
        const double amp = rng.normal();
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        const double omega = c * 2.0 * kPi * k / length;
        // Each mode is a random mixture of left- and right-moving waves.
        const double dir = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < d; ++i) {
          const double arg = 2.0 * kPi * k * i * dx / length + phase;
          s.q[i] += amp * std::sin(arg);
          s.qd[i] += dir * amp * omega * std::cos(arg);
        }
      }
      const double peak = s.q.cwiseAbs().maxCoeff();
      if (peak > 0.0) {
        s.q /= peak;
        s.qd /= peak;
      }
      break;
    }
  }
  return {std::move(s), std::move(aux)};
}

}  // namespace lnn
