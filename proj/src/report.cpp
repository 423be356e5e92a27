#include "lnn/report.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

namespace lnn {

namespace {

using nlohmann::json;

Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec x(a.size() + b.size() + c.size());
  x << a, b, c;
  return x;
}

double wave_dx(const SystemSpec& spec) { return spec.params[1]; }

ScalarFn network_fn(const Model& m) { return as_scalar_fn(m.params, m.spec.dof, m.spec.aux_dim()); }

double coord_error(const SystemSpec& spec, const State& a, const State& b) {
  const Vec d = a.q - b.q;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double e = spec.name == System::double_pendulum ? std::remainder(d[i], 2.0 * std::numbers::pi) : d[i];
    total += std::abs(e);
  }
  return total / static_cast<double>(d.size());
}

Trajectory hnn_rollout(const Model& m, const State& s0, const Vec& aux, double dt, int steps) {
  const ScalarFn h = network_fn(m);
  const int d = s0.dof();
  Vec y(2 * d);
  if (m.coords == Coords::canonical) {
    auto [q, p] = to_canonical(m.spec, s0, aux);
    y << q, p;
  } else {
    y << s0.q, s0.qd;
  }
  const RhsFn f = [&](const Vec& z) {
    auto [dq, dp] = hnn_rhs(h, z.head(d), z.tail(d), aux);
    Vec out(2 * d);
    out << dq, dp;
    return out;
  };
  auto to_qqd = [&](const Vec& z) {
    if (m.coords == Coords::canonical) return from_canonical(m.spec, z.head(d), z.tail(d), aux);
    return State{z.head(d), z.tail(d)};
  };
  Trajectory traj;
  traj.times.resize(steps + 1);
  traj.states.reserve(steps + 1);
  traj.times[0] = 0.0;
  traj.states.push_back(to_qqd(y));
  for (int k = 1; k <= steps; ++k) {
    y = rk4_step(f, y, dt);
    if (!y.allFinite()) throw NumericError("hnn rollout: non-finite state at step", k);
    traj.times[k] = k * dt;
    traj.states.push_back(to_qqd(y));
  }
  return traj;
}

const char* kSeries[] = {"pred_E", "true_E", "coord_error", "energy_discrepancy"};

json series_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw InvalidArgument("csv: not a number: '" + s + "'");
  return x;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Model Model::reference(const SystemSpec& spec) {
  spec.validate();
  Model m;
  m.spec = spec;
  return m;
}

Model Model::learned(const SystemSpec& spec, ModelKind kind, NetParams params, Coords coords) {
  Model m;
  m.spec = spec;
  m.analytic = false;
  m.kind = kind;
  m.coords = coords;
  m.params = std::move(params);
  m.validate();
  return m;
}

void Model::validate() const {
  spec.validate();
  pinv.validate();
  if (analytic) return;
  params.validate();
  if (spec.name == System::wave1d) {
    if (kind != ModelKind::lnn) throw InvalidArgument("model: wave1d supports only lnn density networks");
    check_density(params);
    return;
  }
  const int in = 2 * spec.dof + spec.aux_dim();
  const int out = kind == ModelKind::baseline ? spec.dof : 1;
  if (params.input_width() != in || params.output_width() != out)
    throw InvalidArgument("model: " + to_string(kind) + " network for " + to_string(spec.name) + " must be " +
                          std::to_string(in) + " -> " + std::to_string(out) + ", got " +
                          std::to_string(params.input_width()) + " -> " + std::to_string(params.output_width()));
  if (kind == ModelKind::hnn && coords == Coords::canonical && spec.name == System::wave1d)
    throw InvalidArgument("model: canonical hnn not available for wave1d");
}

Vec predict_accel(const Model& m, const State& s, const Vec& aux) {
  if (m.analytic) return closed_form_accel(m.spec, s, aux);
  if (m.spec.name == System::wave1d) return flgn_accel(m.params, to_grid(s, wave_dx(m.spec)), m.pinv).phidd;
  switch (m.kind) {
    case ModelKind::lnn: return lnn_accel(network_fn(m), s, aux, m.pinv).qdd;
    case ModelKind::baseline: return forward_vec(m.params, concat(s.q, s.qd, aux));
    case ModelKind::hnn: {
      const ScalarFn h = network_fn(m);
      if (m.coords == Coords::canonical) return hnn_accel(h, s.q, to_canonical(m.spec, s, aux).second, aux);
      return -grad_q(h, s.q, s.qd, aux);
    }
  }
  throw InvalidArgument("predict_accel: unknown model");
}

double accel_mse(const Model& m, std::span<const Sample> samples) {
  if (samples.empty()) throw InvalidArgument("accel_mse: no samples");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& x : samples) {
    total += (predict_accel(m, x.state, x.aux) - x.qdd_true).squaredNorm();
    count += x.qdd_true.size();
  }
  return total / static_cast<double>(count);
}

Trajectory model_rollout(const Model& m, const State& s0, const Vec& aux, double dt, int steps) {
  m.validate();
  Trajectory traj;
  if (!m.analytic && m.kind == ModelKind::hnn) {
    traj = hnn_rollout(m, s0, aux, dt, steps);
  } else if (m.analytic || m.kind != ModelKind::lnn || m.spec.name == System::wave1d) {
    traj = rollout([&](const State& s) { return predict_accel(m, s, aux); }, s0, dt, steps);
  } else {
    const ScalarFn lag = network_fn(m);
    traj = rollout([&](const State& s) { return lnn_accel(lag, s, aux, m.pinv).qdd; }, s0, dt, steps);
  }
  traj.energies.resize(static_cast<Eigen::Index>(traj.size()));
  for (std::size_t k = 0; k < traj.size(); ++k)
    traj.energies[static_cast<Eigen::Index>(k)] = true_energy(m.spec, traj.states[k], aux);
  return traj;
}

void EvalConfig::validate() const {
  if (n_traj < 1) throw InvalidArgument("eval: n_traj must be >= 1");
  if (steps < 0) throw InvalidArgument("eval: steps must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("eval: dt must be finite and > 0");
}

EvalReport evaluate(const Model& m, const EvalConfig& cfg, int threads) {
  m.validate();
  cfg.validate();
  if (threads < 1) throw InvalidArgument("eval: threads must be >= 1");
  EvalReport r;
  r.system = to_string(m.spec.name);
  r.model = m.analytic ? "analytic" : to_string(m.kind);
  r.coords = to_string(m.coords);
  r.config = cfg;
  const bool wave = m.spec.name == System::wave1d;
  if (!wave) r.normalizer = max_potential_energy(m.spec);
  const Model ref = Model::reference(m.spec);

  auto run_one = [&](int k) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(k));
    const auto [s0, aux] = sample_state(m.spec, rng);
    TrajectoryEval te;
    te.index = k;
    try {
      const Trajectory truth = model_rollout(ref, s0, aux, cfg.dt, cfg.steps);
      const Trajectory pred = model_rollout(m, s0, aux, cfg.dt, cfg.steps);
      const double norm = wave ? std::abs(truth.energies[0]) : r.normalizer;
      const Eigen::Index len = static_cast<Eigen::Index>(truth.size());
      te.t = truth.times;
      te.coord_error.resize(len);
      for (Eigen::Index i = 0; i < len; ++i)
        te.coord_error[i] = coord_error(m.spec, pred.states[i], truth.states[i]);
      te.pred_energy = pred.energies;
      te.true_energy = truth.energies;
      te.energy_discrepancy = (pred.energies - truth.energies).cwiseAbs() / norm;
      if (!te.energy_discrepancy.allFinite() || !te.coord_error.allFinite())
        throw NumericError("eval: non-finite metric", -1);
    } catch (const NumericError& e) {
      te = TrajectoryEval{};
      te.index = k;
      te.ok = false;
      te.failed_step = static_cast<int>(e.index());
      te.error = e.what();
    } catch (const DomainError& e) {
      te = TrajectoryEval{};
      te.index = k;
      te.ok = false;
      te.error = e.what();
    }
    return te;
  };

  r.trajectories.resize(cfg.n_traj);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < cfg.n_traj; k = next++) r.trajectories[k] = run_one(k);
  };
  const int pool = std::min(threads, cfg.n_traj);
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    for (int i = 0; i < pool; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }

  // Aggregate in index order so the summary does not depend on scheduling.
  double disc_total = 0.0, coord_total = 0.0;
  for (const auto& te : r.trajectories) {
    if (!te.ok) {
      ++r.failures;
      continue;
    }
    disc_total += te.energy_discrepancy.mean();
    coord_total += te.coord_error.mean();
    ++r.successes;
  }
  if (r.successes > 0) {
    r.mean_energy_discrepancy = disc_total / r.successes;
    r.mean_coord_error = coord_total / r.successes;
  }
  return r;
}

json to_json(const EvalReport& r) {
  json j;
  j["schema"] = kReportSchema;
  j["system"] = r.system;
  j["model"] = r.model;
  j["coords"] = r.coords;
  j["config"] = {{"n_traj", r.config.n_traj}, {"steps", r.config.steps}, {"dt", r.config.dt}, {"seed", r.config.seed}};
  j["normalizer_kind"] = r.system == "wave1d" ? "initial_energy" : "max_potential_energy";
  json trajs = json::array();
  for (const auto& t : r.trajectories) {
    json x;
    x["index"] = t.index;
    x["ok"] = t.ok;
    x["failed_step"] = t.failed_step >= 0 ? json(t.failed_step) : json(nullptr);
    x["error"] = t.error.empty() ? json(nullptr) : json(t.error);
    x["t"] = series_json(t.t);
    x["coord_error"] = series_json(t.coord_error);
    x["pred_E"] = series_json(t.pred_energy);
    x["true_E"] = series_json(t.true_energy);
    x["energy_discrepancy"] = series_json(t.energy_discrepancy);
    trajs.push_back(std::move(x));
  }
  j["trajectories"] = std::move(trajs);
  json s;
  s["mean_energy_discrepancy"] = r.mean_energy_discrepancy ? json(*r.mean_energy_discrepancy) : json(nullptr);
  s["mean_coord_error"] = r.mean_coord_error ? json(*r.mean_coord_error) : json(nullptr);
  s["successes"] = r.successes;
  s["failures"] = r.failures;
  j["summary"] = std::move(s);
  return j;
}

std::vector<std::string> validate_report(const json& j) {
  std::vector<std::string> errs;
  auto fail = [&](const std::string& m) { errs.push_back(m); };
  if (!j.is_object()) return {"report: not an object"};
  const char* top[] = {"schema", "system", "model", "coords", "config", "normalizer_kind", "trajectories", "summary"};
  for (const char* k : top)
    if (!j.contains(k)) fail(std::string("report: missing key '") + k + "'");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* t : top) known = known || k == t;
    if (!known) fail("report: unknown key '" + k + "'");
  }
  if (!errs.empty()) return errs;
  if (j["schema"] != kReportSchema) fail("report: schema must be " + std::string(kReportSchema));
  for (const char* k : {"system", "model", "coords", "normalizer_kind"})
    if (!j[k].is_string()) fail(std::string("report: '") + k + "' must be a string");

  const json& c = j["config"];
  int n_traj = -1, steps = -1;
  if (!c.is_object() || !c.contains("n_traj") || !c.contains("steps") || !c.contains("dt") || !c.contains("seed")) {
    fail("report: config needs n_traj, steps, dt, seed");
  } else {
    if (!c["n_traj"].is_number_integer() || c["n_traj"].get<long long>() < 1) fail("report: config.n_traj >= 1");
    else n_traj = c["n_traj"].get<int>();
    if (!c["steps"].is_number_integer() || c["steps"].get<long long>() < 0) fail("report: config.steps >= 0");
    else steps = c["steps"].get<int>();
    if (!c["dt"].is_number() || !(c["dt"].get<double>() > 0.0)) fail("report: config.dt > 0");
    if (!c["seed"].is_number_unsigned() && !(c["seed"].is_number_integer() && c["seed"].get<long long>() >= 0))
      fail("report: config.seed must be a non-negative integer");
  }

  const json& trajs = j["trajectories"];
  int ok_count = 0;
  if (!trajs.is_array()) {
    fail("report: trajectories must be an array");
  } else {
    if (n_traj >= 0 && static_cast<int>(trajs.size()) != n_traj) fail("report: trajectories length != n_traj");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      const json& t = trajs[i];
      const std::string at = "report: trajectories[" + std::to_string(i) + "]";
      if (!t.is_object()) {
        fail(at + " must be an object");
        continue;
      }
      if (!t.contains("index") || !t["index"].is_number_integer()) fail(at + ".index must be an integer");
      if (!t.contains("ok") || !t["ok"].is_boolean()) {
        fail(at + ".ok must be a boolean");
        continue;
      }
      const bool ok = t["ok"].get<bool>();
      ok_count += ok;
      if (!t.contains("failed_step") || !(t["failed_step"].is_null() || t["failed_step"].is_number_integer()))
        fail(at + ".failed_step must be an integer or null");
      if (!t.contains("error") || !(t["error"].is_null() || t["error"].is_string()))
        fail(at + ".error must be a string or null");
      std::size_t len = 0;
      bool first = true;
      for (const char* k : {"t", "coord_error", "pred_E", "true_E", "energy_discrepancy"}) {
        if (!t.contains(k) || !t[k].is_array()) {
          fail(at + "." + k + " must be an array");
          continue;
        }
        const json& a = t[k];
        if (first) len = a.size();
        else if (a.size() != len) fail(at + "." + k + " length differs from t");
        first = false;
        const bool nonneg = std::string(k) == "coord_error" || std::string(k) == "energy_discrepancy";
        for (const auto& v : a)
          if (!v.is_number() || (nonneg && v.get<double>() < 0.0)) {
            fail(at + "." + k + " entries must be " + (nonneg ? "non-negative numbers" : "numbers"));
            break;
          }
      }
      if (ok && steps >= 0 && len != static_cast<std::size_t>(steps) + 1)
        fail(at + ": series length must be steps + 1");
    }
  }

  const json& s = j["summary"];
  if (!s.is_object()) {
    fail("report: summary must be an object");
  } else {
    for (const char* k : {"mean_energy_discrepancy", "mean_coord_error"})
      if (!s.contains(k) || !(s[k].is_null() || (s[k].is_number() && s[k].get<double>() >= 0.0)))
        fail(std::string("report: summary.") + k + " must be a non-negative number or null");
    if (!s.contains("successes") || !s["successes"].is_number_integer() || !s.contains("failures") ||
        !s["failures"].is_number_integer()) {
      fail("report: summary needs integer successes and failures");
    } else if (trajs.is_array()) {
      if (s["successes"].get<int>() != ok_count) fail("report: summary.successes disagrees with trajectories");
      if (s["successes"].get<int>() + s["failures"].get<int>() != static_cast<int>(trajs.size()))
        fail("report: successes + failures != number of trajectories");
    }
  }
  return errs;
}

void export_report_csv(std::ostream& out, const json& report, bool per_trajectory, const std::string& label,
                       bool header) {
  const auto errs = validate_report(report);
  if (!errs.empty()) throw InvalidArgument(errs.front());
  if (header) out << "series,t,value\n";
  const std::string prefix = label.empty() ? "" : label + ":";
  std::vector<const json*> ok;
  for (const auto& t : report["trajectories"])
    if (t["ok"].get<bool>()) ok.push_back(&t);
  if (!ok.empty()) {
    const json& times = (*ok.front())["t"];
    for (const char* name : kSeries) {
      for (std::size_t i = 0; i < times.size(); ++i) {
        double sum = 0.0;
        for (const json* t : ok) sum += (*t)[name][i].get<double>();
        out << prefix << name << ',' << format_double(times[i].get<double>()) << ',' << format_double(sum / ok.size())
            << '\n';
      }
    }
  }
  if (!per_trajectory) return;
  for (const auto& t : report["trajectories"]) {
    const std::string idx = std::to_string(t["index"].get<int>());
    for (const char* name : kSeries)
      for (std::size_t i = 0; i < t["t"].size(); ++i)
        out << prefix << name << '/' << idx << ',' << format_double(t["t"][i].get<double>()) << ','
            << format_double(t[name][i].get<double>()) << '\n';
  }
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: missing header");
  table.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size())
      throw InvalidArgument("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(table.header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  return read_csv_table(in);
}

void export_trajectories_csv(std::ostream& out, const std::vector<std::pair<std::string, CsvTable>>& tables,
                             bool header) {
  if (header) out << "series,t,value\n";
  for (const auto& [label, table] : tables) {
    if (table.header.empty() || table.header.front() != "t")
      throw InvalidArgument("export: trajectory table '" + label + "' must start with a t column");
    for (std::size_t c = 1; c < table.header.size(); ++c)
      for (const auto& row : table.rows)
        out << label << ':' << table.header[c] << ',' << format_double(row[0]) << ',' << format_double(row[c])
            << '\n';
  }
}

}  // namespace lnn
