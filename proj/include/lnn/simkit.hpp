#pragma once

#include "lnn/eldyn.hpp"
#include "lnn/physlib.hpp"
#include "lnn/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace lnn {

using AccelFn = std::function<Vec(const State&)>;
using RhsFn = std::function<Vec(const Vec&)>;

struct Trajectory {
  Vec times;
  std::vector<State> states;
  Vec energies;  // optional; empty until filled

  std::size_t size() const { return states.size(); }
};

// One supervised example: a state, its true acceleration and the aux vector.
struct Sample {
  State state;
  Vec qdd_true;
  Vec aux;
};

// Classical RK4 on (q, qd)' = (qd, accel(q, qd)).
State rk4_step(const AccelFn& accel, const State& s, double dt);
// Classical RK4 on a first-order system y' = f(y).
Vec rk4_step(const RhsFn& f, const Vec& y, double dt);

// steps + 1 states starting with s0. NumericError from a step carries the step index.
Trajectory rollout(const AccelFn& accel, const State& s0, double dt, int steps);

// i.i.d. states from physlib's distributions, labelled with closed-form
// accelerations. Sample i depends only on (seed, i).
std::vector<Sample> generate_dataset(const SystemSpec& spec, int count, std::uint64_t seed);
Sample generate_sample(const SystemSpec& spec, std::uint64_t seed, std::uint64_t index);

// JSON lines: {"q":[...],"qd":[...],"qdd":[...],"aux":[...]}
void write_jsonl(std::ostream& out, const std::vector<Sample>& samples);
void write_jsonl(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_jsonl(std::istream& in);
std::vector<Sample> read_jsonl(const std::string& path);

// CSV header t,q1..qd,qd1..qdd,E; E is written only if energies are present.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

}  // namespace lnn
