#include "lnn/simkit.hpp"

#include "json.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace lnn {

namespace {

void require_finite_accel(const Vec& a, std::ptrdiff_t step) {
  if (!a.allFinite()) throw NumericError("rk4: non-finite acceleration", step);
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_json_array(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

State rk4_step(const AccelFn& accel, const State& s, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be positive");
  const Vec a1 = accel(s);
  require_finite_accel(a1, 0);
  const State s2{s.q + 0.5 * dt * s.qd, s.qd + 0.5 * dt * a1};
  const Vec a2 = accel(s2);
  require_finite_accel(a2, 0);
  const State s3{s.q + 0.5 * dt * s2.qd, s.qd + 0.5 * dt * a2};
  const Vec a3 = accel(s3);
  require_finite_accel(a3, 0);
  const State s4{s.q + dt * s3.qd, s.qd + dt * a3};
  const Vec a4 = accel(s4);
  require_finite_accel(a4, 0);
  State out;
  out.q = s.q + dt / 6.0 * (s.qd + 2.0 * s2.qd + 2.0 * s3.qd + s4.qd);
  out.qd = s.qd + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  return out;
}

Vec rk4_step(const RhsFn& f, const Vec& y, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("rk4_step: dt must be positive");
  const Vec k1 = f(y);
  const Vec k2 = f(y + 0.5 * dt * k1);
  const Vec k3 = f(y + 0.5 * dt * k2);
  const Vec k4 = f(y + dt * k3);
  Vec out = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw NumericError("rk4: non-finite state", 0);
  return out;
}

Trajectory rollout(const AccelFn& accel, const State& s0, double dt, int steps) {
  if (steps < 1) throw InvalidArgument("rollout: steps must be >= 1");
  s0.validate();
  Trajectory traj;
  traj.times.resize(steps + 1);
  traj.states.reserve(steps + 1);
  traj.states.push_back(s0);
  traj.times[0] = 0.0;
  for (int k = 1; k <= steps; ++k) {
    try {
      traj.states.push_back(rk4_step(accel, traj.states.back(), dt));
    } catch (const NumericError& e) {
      throw NumericError(std::string("rollout step failed: ") + e.what(), k);
    }
    traj.times[k] = k * dt;
  }
  return traj;
}

Sample generate_sample(const SystemSpec& spec, std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, index);
  auto [state, aux] = sample_state(spec, rng);
  Sample s;
  s.qdd_true = closed_form_accel(spec, state, aux);
  s.state = std::move(state);
  s.aux = std::move(aux);
  return s;
}

std::vector<Sample> generate_dataset(const SystemSpec& spec, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("generate_dataset: count must be >= 1");
  spec.validate();
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(generate_sample(spec, seed, static_cast<std::uint64_t>(i)));
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    nlohmann::json j = {{"q", to_std(s.state.q)},
                        {"qd", to_std(s.state.qd)},
                        {"qdd", to_std(s.qdd_true)},
                        {"aux", to_std(s.aux)}};
    out << j.dump() << '\n';
  }
}

void write_jsonl(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  write_jsonl(out, samples);
  if (!out) throw std::ios_base::failure("failed writing '" + path + "'");
}

std::vector<Sample> read_jsonl(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.state.q = from_json_array(j.at("q"));
      s.state.qd = from_json_array(j.at("qd"));
      s.qdd_true = from_json_array(j.at("qdd"));
      s.aux = j.contains("aux") ? from_json_array(j.at("aux")) : Vec(0);
      if (s.state.q.size() == 0 || s.state.qd.size() != s.state.q.size())
        throw InvalidArgument("dataset line " + std::to_string(lineno) + ": q and qd must be non-empty and equal length");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sample> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  return read_jsonl(in);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.states.empty()) return;
  const int d = traj.states.front().dof();
  const bool with_energy = traj.energies.size() == static_cast<Eigen::Index>(traj.states.size());
  out << 't';
  for (int i = 1; i <= d; ++i) out << ",q" << i;
  for (int i = 1; i <= d; ++i) out << ",qd" << i;
  if (with_energy) out << ",E";
  out << '\n';
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    out << format_double(traj.times[k]);
    for (int i = 0; i < d; ++i) out << ',' << format_double(traj.states[k].q[i]);
    for (int i = 0; i < d; ++i) out << ',' << format_double(traj.states[k].qd[i]);
    if (with_energy) out << ',' << format_double(traj.energies[k]);
    out << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  write_trajectory_csv(out, traj);
  if (!out) throw std::ios_base::failure("failed writing '" + path + "'");
}

}  // namespace lnn
