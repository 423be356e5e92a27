#pragma once

#include "lnn/fieldlnn.hpp"
#include "lnn/netcore.hpp"
#include "lnn/physlib.hpp"
#include "lnn/simkit.hpp"
#include "lnn/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lnn {

// A dynamics model for one system: either the analytic reference or a trained
// network of the given family. For wave1d the network is a 6 -> 1 density.
struct Model {
  SystemSpec spec;
  bool analytic = true;
  ModelKind kind = ModelKind::lnn;
  Coords coords = Coords::arbitrary;
  NetParams params;
  PinvConfig pinv;

  static Model reference(const SystemSpec& spec);
  static Model learned(const SystemSpec& spec, ModelKind kind, NetParams params, Coords coords = Coords::arbitrary);

  // Shapes agree with the system.
  void validate() const;
};

// Predicted acceleration at a (q, qd) state.
//   hnn canonical: d2q/dt2 along the flow of H(q, p), p from the true momentum map
//   hnn arbitrary: dp/dt with p := qd
Vec predict_accel(const Model& m, const State& s, const Vec& aux);

// Mean squared acceleration error over every component.
double accel_mse(const Model& m, std::span<const Sample> samples);

// RK4 rollout in the model's own coordinates, reported in (q, qd) with the
// true energy of every state. HNN models integrate Hamilton's equations.
Trajectory model_rollout(const Model& m, const State& s0, const Vec& aux, double dt, int steps);

struct EvalConfig {
  int n_traj = 10;
  int steps = 100;
  double dt = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrajectoryEval {
  int index = 0;
  bool ok = true;
  int failed_step = -1;
  std::string error;
  Vec t;
  Vec coord_error;         // wrapped angle error for the pendulum, abs error otherwise; mean over coordinates
  Vec pred_energy;         // true energy along the model rollout
  Vec true_energy;         // true energy along the reference rollout
  Vec energy_discrepancy;  // |pred_E - true_E| / normalizer
};

struct EvalReport {
  std::string system;
  std::string model;
  std::string coords;
  EvalConfig config;
  double normalizer = 0.0;  // max potential energy; initial energy for wave1d
  std::vector<TrajectoryEval> trajectories;
  std::optional<double> mean_energy_discrepancy;  // over successful trajectories
  std::optional<double> mean_coord_error;
  int successes = 0;
  int failures = 0;
};

inline constexpr const char* kReportSchema = "lnn.eval_report/1";

// Rollouts of model and reference from identical seeded initial conditions,
// spread over `threads` workers. The report is independent of the thread count.
EvalReport evaluate(const Model& m, const EvalConfig& cfg, int threads = 1);

nlohmann::json to_json(const EvalReport& r);
// Empty when the document conforms to the report schema.
std::vector<std::string> validate_report(const nlohmann::json& j);

// Long-format CSV, columns series,t,value. Series pred_E, true_E, coord_error
// and energy_discrepancy are means over successful trajectories at each time;
// per_trajectory adds "<series>/<index>" rows. A non-empty label prefixes
// every series as "<label>:<series>".
void export_report_csv(std::ostream& out, const nlohmann::json& report, bool per_trajectory = false,
                       const std::string& label = "", bool header = true);

// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv_table(std::istream& in);
CsvTable read_csv_table(const std::string& path);

// Long-format export of trajectory tables: every non-t column becomes the
// series "<label>:<column>".
void export_trajectories_csv(std::ostream& out, const std::vector<std::pair<std::string, CsvTable>>& tables,
                             bool header = true);

}  // namespace lnn
