#pragma once

#include "lnn/diffkit.hpp"
#include "lnn/eldyn.hpp"
#include "lnn/random.hpp"
#include "lnn/types.hpp"

#include <string>
#include <utility>

namespace lnn {

enum class System { ball, double_pendulum, relativistic, wave1d };

std::string to_string(System s);
System parse_system(const std::string& name);

// Benchmark system and its physical parameters.
//   ball:            params = (m, g),             dof 2
//   double_pendulum: params = (m1, m2, l1, l2, g), dof 2, angles from the downward vertical
//   relativistic:    params = (g),                dof 1, g is also the per-sample aux
//   wave1d:          params = (c, dx),            dof n, periodic grid
struct SystemSpec {
  System name = System::ball;
  Vec params;
  int dof = 0;

  static SystemSpec ball(double m = 1.0, double g = 9.8);
  static SystemSpec double_pendulum(double g = 9.8, double m1 = 1.0, double m2 = 1.0, double l1 = 1.0,
                                    double l2 = 1.0);
  static SystemSpec relativistic(double g = 1.0);
  // dx <= 0 selects the unit-length domain, dx = 1/n.
  static SystemSpec wave1d(int n, double dx = 0.0, double c = 1.0);
  static SystemSpec by_name(System name, int grid_points = 100);

  int aux_dim() const { return name == System::relativistic ? 1 : 0; }
  void validate() const;
};

ScalarFn lagrangian(const SystemSpec& spec);

// The aux vector implied by spec.params (g for the relativistic particle, empty otherwise).
Vec default_aux(const SystemSpec& spec);

// Hand-derived accelerations, independent of the Euler-Lagrange solver.
Vec closed_form_accel(const SystemSpec& spec, const State& s, const Vec& aux);
inline Vec closed_form_accel(const SystemSpec& spec, const State& s) {
  return closed_form_accel(spec, s, default_aux(spec));
}

double true_energy(const SystemSpec& spec, const State& s, const Vec& aux);
inline double true_energy(const SystemSpec& spec, const State& s) { return true_energy(spec, s, default_aux(spec)); }

// Normalizer for energy-discrepancy metrics. Double pendulum: V(pi, pi) - V(0, 0).
// Ball: m*g (unit height). Relativistic: 2g, the potential span over q in [-1, 1].
double max_potential_energy(const SystemSpec& spec);

// (q, qd) -> (q, p) with p = dL/dqd.
std::pair<Vec, Vec> to_canonical(const SystemSpec& spec, const State& s, const Vec& aux);
// Inverse map. Relativistic: bisection on the monotone momentum map; others: linear solve.
State from_canonical(const SystemSpec& spec, const Vec& q, const Vec& p, const Vec& aux);

// Draws a random initial condition and its aux vector.
//   double pendulum: theta ~ U(-pi, pi), theta_dot ~ U(-1, 1)
//   relativistic:    q ~ U(-1, 1), qd ~ U(-0.9, 0.9), g ~ U(0.5, 2)
//   ball:            q, qd ~ U(-1, 1)
//   wave1d:          sum of up to three random Fourier modes, unit peak amplitude
std::pair<State, Vec> sample_state(const SystemSpec& spec, Rng& rng);

// Relativistic sampling ranges, exported for range checks.
inline constexpr double kRelativisticMaxSpeed = 0.9;
inline constexpr double kRelativisticGMin = 0.5;
inline constexpr double kRelativisticGMax = 2.0;

}  // namespace lnn
