#include "cli.hpp"

#include "lnn/fieldlnn.hpp"
#include "lnn/report.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace lnn::cli {

namespace {

using nlohmann::json;

// Bad configuration or usage; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { text, integer, uinteger, real, flag, reals, texts };

struct Opt {
  std::string key;
  Kind kind;
  json def;  // null: unset unless given
  std::string help;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Opt> opts;
  std::function<int(const json&, std::ostream&, std::ostream&)> run;
};

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  for (char& c : f)
    if (c == '_') c = '-';
  return f;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::text: return "a string";
    case Kind::integer: return "an integer";
    case Kind::uinteger: return "a non-negative integer";
    case Kind::real: return "a number";
    case Kind::flag: return "a boolean";
    case Kind::reals: return "an array of numbers";
    case Kind::texts: return "an array of strings";
  }
  return "?";
}

bool has_kind(const json& v, Kind k) {
  switch (k) {
    case Kind::text: return v.is_string();
    case Kind::integer: return v.is_number_integer();
    case Kind::uinteger: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::real: return v.is_number();
    case Kind::flag: return v.is_boolean();
    case Kind::reals:
      if (!v.is_array()) return false;
      for (const auto& x : v)
        if (!x.is_number()) return false;
      return true;
    case Kind::texts:
      if (!v.is_array()) return false;
      for (const auto& x : v)
        if (!x.is_string()) return false;
      return true;
  }
  return false;
}

double parse_real(const std::string& key, const std::string& s) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw UsageError(flag_name(key) + ": not a number: '" + s + "'");
  return x;
}

json parse_value(const Opt& o, const std::string& s) {
  switch (o.kind) {
    case Kind::text: return s;
    case Kind::integer:
    case Kind::uinteger: {
      long long x = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw UsageError(flag_name(o.key) + ": not an integer: '" + s + "'");
      if (o.kind == Kind::uinteger) {
        if (x < 0) throw UsageError(flag_name(o.key) + " must be non-negative");
        return static_cast<std::uint64_t>(x);
      }
      return x;
    }
    case Kind::real: return parse_real(o.key, s);
    default: break;
  }
  throw UsageError("internal: bad option kind");
}

json read_config(const std::string& path, const std::string& command, const std::vector<Opt>& opts) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + path + "': top level must be an object");
  std::vector<std::string> problems;
  for (const auto& [k, v] : j.items()) {
    if (k == "command") {
      if (v != command) problems.push_back("'command' is '" + v.dump() + "', expected '" + command + "'");
      continue;
    }
    const auto it = std::find_if(opts.begin(), opts.end(), [&](const Opt& o) { return o.key == k; });
    if (it == opts.end()) {
      problems.push_back("unknown key '" + k + "'");
    } else if (!v.is_null() && !has_kind(v, it->kind)) {
      problems.push_back("'" + k + "' must be " + kind_name(it->kind));
    }
  }
  if (!problems.empty()) {
    std::string msg = "config '" + path + "' is invalid:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw UsageError(msg);
  }
  j.erase("command");
  return j;
}

// Required option lookups on a resolved config.
const json& need(const json& c, const std::string& key) {
  if (!c.contains(key) || c[key].is_null()) throw UsageError("missing required option " + flag_name(key));
  return c[key];
}
bool given(const json& c, const std::string& key) { return c.contains(key) && !c[key].is_null(); }

Vec to_vec(const json& a) {
  const auto v = a.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

void echo_config(const std::string& command, const json& c, const std::string& out_path) {
  json e = c;
  e["command"] = command;
  const std::string path = out_path + ".config.json";
  std::ofstream f(path);
  if (!f) throw std::ios_base::failure("cannot write '" + path + "'");
  f << e.dump(2) << '\n';
}

// -- systems and checkpoints ------------------------------------------------

std::vector<Opt> system_opts(json system_default = "double_pendulum") {
  return {{"system", Kind::text, std::move(system_default), "ball | double_pendulum | relativistic | wave1d"},
          {"grid_points", Kind::integer, 32, "wave1d grid points"},
          {"dx", Kind::real, 0.0, "wave1d grid spacing; 0 means 1/grid_points"},
          {"c", Kind::real, 1.0, "wave1d wave speed"}};
}

SystemSpec system_from(const json& c) {
  System name;
  try {
    name = parse_system(need(c, "system").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  SystemSpec spec = name == System::wave1d
                        ? SystemSpec::wave1d(c["grid_points"].get<int>(), c["dx"].get<double>(), c["c"].get<double>())
                        : SystemSpec::by_name(name);
  spec.validate();
  return spec;
}

json checkpoint_meta(const SystemSpec& spec, ModelKind model, Coords coords) {
  return {{"model", to_string(model)}, {"coords", to_string(coords)},    {"system", to_string(spec.name)},
          {"system_params", to_std(spec.params)}, {"dof", spec.dof}, {"aux_dim", spec.aux_dim()}};
}

Model model_from_checkpoint(const std::string& path) {
  json meta;
  NetParams params = load_checkpoint(path, &meta);
  if (!meta.is_object()) throw UsageError("checkpoint '" + path + "' has no model metadata");
  try {
    SystemSpec spec;
    spec.name = parse_system(meta.at("system").get<std::string>());
    spec.params = to_vec(meta.at("system_params"));
    spec.dof = meta.at("dof").get<int>();
    if (meta.at("aux_dim").get<int>() != spec.aux_dim()) throw UsageError("checkpoint aux_dim disagrees with system");
    return Model::learned(spec, parse_model(meta.at("model").get<std::string>()), std::move(params),
                          parse_coords(meta.value("coords", std::string("arbitrary"))));
  } catch (const json::exception& e) {
    throw UsageError("checkpoint '" + path + "' metadata: " + e.what());
  }
}

// Model for rollout/eval: --analytic with --system, or a checkpoint whose
// system must agree with --system when both are given.
Model resolve_model(const json& c) {
  const bool analytic = c["analytic"].get<bool>();
  if (analytic == given(c, "checkpoint"))
    throw UsageError("give exactly one of --checkpoint or --analytic");
  Model m;
  if (analytic) {
    m = Model::reference(system_from(c));
  } else {
    m = model_from_checkpoint(c["checkpoint"].get<std::string>());
    if (given(c, "system")) {
      const SystemSpec asked = system_from(c);
      if (asked.name != m.spec.name || asked.dof != m.spec.dof)
        throw UsageError("dimension mismatch: checkpoint models " + to_string(m.spec.name) + " with " +
                         std::to_string(m.spec.dof) + " dof, --system asks for " + to_string(asked.name) + " with " +
                         std::to_string(asked.dof));
    }
  }
  m.pinv.rcond = c["rcond"].get<double>();
  m.validate();
  return m;
}

// -- commands -----------------------------------------------------------------

int cmd_gen(const json& c, std::ostream& out, std::ostream&) {
  const SystemSpec spec = system_from(c);
  const std::string path = need(c, "out").get<std::string>();
  const int count = c["count"].get<int>();
  const std::uint64_t seed = c["seed"].get<std::uint64_t>();
  if (count < 1) throw UsageError("--count must be >= 1");
  std::vector<Sample> samples;
  if (spec.name == System::wave1d) {
    FieldDataConfig fc;
    fc.n = spec.dof;
    fc.dx = spec.params[1];
    fc.c = spec.params[0];
    fc.count = count;
    fc.seed = seed;
    fc.snapshots_per_rollout = c["snapshots_per_rollout"].get<int>();
    fc.stride = c["stride"].get<int>();
    fc.dt = c["field_dt"].get<double>();
    for (auto& f : generate_field_dataset(fc)) samples.push_back({to_state(f.state), f.phidd_true, Vec(0)});
  } else {
    samples = generate_dataset(spec, count, seed);
  }
  write_jsonl(path, samples);
  echo_config("gen", c, path);
  out << "wrote " << samples.size() << " " << to_string(spec.name) << " samples (seed " << seed << ") to " << path
      << '\n';
  return kExitOk;
}

int cmd_train(const json& c, std::ostream& out, std::ostream& err) {
  const SystemSpec spec = system_from(c);
  const std::string ckpt = need(c, "out").get<std::string>();
  TrainConfig cfg;
  try {
    cfg.model = parse_model(c["model"].get<std::string>());
    cfg.coords = parse_coords(c["coords"].get<std::string>());
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  cfg.hidden = c["hidden"].get<int>();
  cfg.depth = c["depth"].get<int>();
  cfg.lr0 = c["lr0"].get<double>();
  cfg.decay = c["decay"].get<double>();
  cfg.batch = c["batch"].get<int>();
  cfg.steps = c["steps"].get<int>();
  cfg.seed = c["seed"].get<std::uint64_t>();
  cfg.val_fraction = c["val_fraction"].get<double>();
  cfg.log_every = c["log_every"].get<int>();
  cfg.checkpoint_every = c["checkpoint_every"].get<int>();
  cfg.rcond = c["rcond"].get<double>();
  cfg.clip_norm = c["clip_norm"].get<double>();
  cfg.checkpoint_path = ckpt;
  cfg.log_path = given(c, "log") ? c["log"].get<std::string>() : ckpt + ".log.jsonl";
  cfg.checkpoint_meta = checkpoint_meta(spec, cfg.model, cfg.coords);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const std::string data_path = need(c, "data").get<std::string>();
  const std::vector<Sample> data = read_jsonl(data_path);
  if (data.empty()) throw UsageError("dataset '" + data_path + "' is empty");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].state.dof() != spec.dof || data[i].aux.size() != spec.aux_dim() ||
        data[i].qdd_true.size() != spec.dof)
      throw UsageError("dataset line " + std::to_string(i + 1) + " does not match " + to_string(spec.name) +
                       " (dof " + std::to_string(spec.dof) + ", aux " + std::to_string(spec.aux_dim()) + ")");
  echo_config("train", c, ckpt);

  TrainResult r;
  if (spec.name == System::wave1d) {
    if (cfg.model != ModelKind::lnn) throw UsageError("wave1d trains only lnn density networks");
    std::vector<FieldSample> fields;
    fields.reserve(data.size());
    for (const auto& s : data) fields.push_back({to_grid(s.state, spec.params[1]), s.qdd_true});
    r = train_field(cfg, fields);
  } else if (cfg.model == ModelKind::hnn) {
    r = train(cfg, to_phase_samples(spec, data, cfg.coords));
  } else {
    r = train(cfg, data);
  }
  if (r.diverged) {
    err << "training diverged at step " << r.diverged_step << "; last good checkpoint: " << ckpt << '\n';
    return kExitDiverged;
  }
  save_checkpoint(ckpt, r.params, cfg.checkpoint_meta);
  out << "trained " << to_string(cfg.model) << " on " << data.size() << " samples for " << cfg.steps
      << " steps; final train loss " << r.train_loss.back();
  if (!r.val_loss.empty()) out << ", val loss " << r.val_loss.back().second;
  out << "\ncheckpoint: " << ckpt << "\nlog: " << cfg.log_path << '\n';
  return kExitOk;
}

std::string sibling(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

int cmd_rollout(const json& c, std::ostream& out, std::ostream& err) {
  const Model m = resolve_model(c);
  const std::string path = need(c, "out").get<std::string>();
  const int steps = c["steps"].get<int>();
  const double dt = c["dt"].get<double>();
  if (steps < 1 || !(dt > 0.0)) throw UsageError("--steps must be >= 1 and --dt > 0");

  State s0;
  Vec aux = default_aux(m.spec);
  if (given(c, "q") || given(c, "qd")) {
    s0 = State{to_vec(need(c, "q")), to_vec(need(c, "qd"))};
    if (s0.dof() != m.spec.dof || s0.qd.size() != m.spec.dof)
      throw UsageError("dimension mismatch: initial state needs " + std::to_string(m.spec.dof) + " coordinates");
    if (given(c, "aux")) aux = to_vec(c["aux"]);
    if (aux.size() != m.spec.aux_dim())
      throw UsageError("dimension mismatch: aux needs " + std::to_string(m.spec.aux_dim()) + " entries");
    try {
      s0.validate();
      true_energy(m.spec, s0, aux);
    } catch (const std::exception& e) {
      throw UsageError(std::string("initial state: ") + e.what());
    }
  } else {
    Rng rng(c["seed"].get<std::uint64_t>(), c["index"].get<std::uint64_t>());
    std::tie(s0, aux) = sample_state(m.spec, rng);
  }

  Trajectory t;
  try {
    t = model_rollout(m, s0, aux, dt, steps);
  } catch (const NumericError& e) {
    err << "rollout diverged at step " << e.index() << ": " << e.what() << '\n';
    return kExitDiverged;
  } catch (const DomainError& e) {
    err << "rollout left the system's domain: " << e.what() << '\n';
    return kExitDiverged;
  }
  if (m.spec.name == System::wave1d) {
    const std::string rates = given(c, "rates_out") ? c["rates_out"].get<std::string>() : sibling(path, "_rates");
    write_grid_csv(path, rates, t);
    out << "wrote " << t.size() << " grid rows to " << path << " and " << rates << '\n';
  } else {
    write_trajectory_csv(path, t);
    out << "wrote " << t.size() << " rows to " << path << '\n';
  }
  echo_config("rollout", c, path);
  const double e0 = t.energies[0];
  const double drift = (t.energies.array() - e0).abs().maxCoeff() / std::max(std::abs(e0), 1e-300);
  out << "true energy: initial " << e0 << ", max relative drift " << drift << '\n';
  return kExitOk;
}

int thread_count() {
  const char* v = std::getenv(kThreadsEnv);
  if (!v || !*v) return 1;
  int n = 0;
  const auto [ptr, ec] = std::from_chars(v, v + std::strlen(v), n);
  if (ec != std::errc() || *ptr != '\0' || n < 1)
    throw UsageError(std::string(kThreadsEnv) + " must be a positive integer");
  return n;
}

int cmd_eval(const json& c, std::ostream& out, std::ostream& err) {
  const Model m = resolve_model(c);
  const std::string path = need(c, "out").get<std::string>();
  EvalConfig ec;
  ec.n_traj = c["n_traj"].get<int>();
  ec.steps = c["steps"].get<int>();
  ec.dt = c["dt"].get<double>();
  ec.seed = c["seed"].get<std::uint64_t>();
  try {
    ec.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const EvalReport r = evaluate(m, ec, thread_count());
  const json j = to_json(r);
  const auto problems = validate_report(j);
  if (!problems.empty()) throw std::logic_error("eval produced an invalid report: " + problems.front());
  std::ofstream f(path);
  if (!f) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  f << j.dump(1) << '\n';
  if (!f) throw std::ios_base::failure("failed writing '" + path + "'");
  echo_config("eval", c, path);
  out << "evaluated " << r.model << " on " << r.system << ": " << r.successes << " ok, " << r.failures << " failed\n";
  if (r.mean_energy_discrepancy)
    out << "mean energy discrepancy " << *r.mean_energy_discrepancy << " (" << j["normalizer_kind"].get<std::string>()
        << " " << r.normalizer << "), mean coordinate error " << *r.mean_coord_error << '\n';
  out << "report: " << path << '\n';
  if (r.successes == 0) {
    err << "every trajectory failed\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_export(const json& c, std::ostream& out, std::ostream&) {
  const std::string format = c["format"].get<std::string>();
  if (format != "csv") throw UsageError("unknown export format '" + format + "' (supported: csv)");
  const auto inputs = need(c, "input").get<std::vector<std::string>>();
  if (inputs.empty()) throw UsageError("--input needs at least one file");
  std::vector<std::string> labels;
  if (given(c, "labels")) {
    labels = c["labels"].get<std::vector<std::string>>();
    if (labels.size() != inputs.size()) throw UsageError("--labels needs one label per input");
  }
  const bool per_traj = c["per_trajectory"].get<bool>();

  std::ostringstream buf;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string& in = inputs[i];
    const std::string stem = std::filesystem::path(in).stem().string();
    const bool header = i == 0;
    if (std::filesystem::path(in).extension() == ".json") {
      std::ifstream f(in);
      if (!f) throw std::ios_base::failure("cannot open '" + in + "'");
      json j;
      try {
        f >> j;
      } catch (const json::exception& e) {
        throw UsageError("'" + in + "': " + e.what());
      }
      const auto problems = validate_report(j);
      if (!problems.empty()) throw UsageError("'" + in + "' is not an eval report: " + problems.front());
      const std::string label = !labels.empty() ? labels[i] : inputs.size() > 1 ? stem : "";
      export_report_csv(buf, j, per_traj, label, header);
    } else {
      export_trajectories_csv(buf, {{labels.empty() ? stem : labels[i], read_csv_table(in)}}, header);
    }
  }
  const std::string dest = c["out"].get<std::string>();
  if (dest == "-") {
    out << buf.str();
  } else {
    std::ofstream f(dest);
    if (!f) throw std::ios_base::failure("cannot open '" + dest + "' for writing");
    f << buf.str();
    if (!f) throw std::ios_base::failure("failed writing '" + dest + "'");
  }
  return kExitOk;
}

std::vector<Opt> model_source_opts() {
  std::vector<Opt> o = system_opts(nullptr);
  o.push_back({"checkpoint", Kind::text, nullptr, "trained checkpoint"});
  o.push_back({"analytic", Kind::flag, false, "use the analytic Lagrangian of --system"});
  o.push_back({"rcond", Kind::real, PinvConfig{}.rcond, "pseudoinverse cutoff"});
  return o;
}

std::vector<Command> commands() {
  std::vector<Command> cs;

  std::vector<Opt> gen = system_opts();
  gen.insert(gen.end(), {{"count", Kind::integer, 1000, "number of samples"},
                         {"seed", Kind::uinteger, 0, "RNG seed"},
                         {"out", Kind::text, nullptr, "output JSON-lines file"},
                         {"snapshots_per_rollout", Kind::integer, 10, "wave1d: snapshots per analytic rollout"},
                         {"stride", Kind::integer, 20, "wave1d: integrator steps between snapshots"},
                         {"field_dt", Kind::real, 1e-3, "wave1d: integrator step"}});
  cs.push_back({"gen", "Generate a dataset of states and true accelerations", gen, cmd_gen});

  const TrainConfig t;
  std::vector<Opt> train = system_opts();
  train.insert(train.end(), {{"data", Kind::text, nullptr, "JSON-lines dataset from gen"},
                             {"out", Kind::text, nullptr, "checkpoint path"},
                             {"log", Kind::text, nullptr, "JSON-lines training log (default <out>.log.jsonl)"},
                             {"model", Kind::text, to_string(t.model), "lnn | baseline | hnn"},
                             {"coords", Kind::text, to_string(t.coords), "hnn inputs: arbitrary (q, qd) or canonical (q, p)"},
                             {"hidden", Kind::integer, t.hidden, "hidden width"},
                             {"depth", Kind::integer, t.depth, "number of layers"},
                             {"lr0", Kind::real, t.lr0, "initial learning rate"},
                             {"decay", Kind::real, t.decay, "per-step learning-rate decay"},
                             {"batch", Kind::integer, t.batch, "batch size"},
                             {"steps", Kind::integer, t.steps, "optimizer steps"},
                             {"seed", Kind::uinteger, t.seed, "initialization and shuffling seed"},
                             {"val_fraction", Kind::real, t.val_fraction, "held-out fraction"},
                             {"log_every", Kind::integer, t.log_every, "steps between log lines"},
                             {"checkpoint_every", Kind::integer, t.checkpoint_every, "steps between checkpoints, 0 = off"},
                             {"clip_norm", Kind::real, t.clip_norm, "global gradient-norm clip, 0 = off"},
                             {"rcond", Kind::real, t.rcond, "pseudoinverse cutoff"}});
  cs.push_back({"train", "Train a model on a dataset", train, cmd_train});

  std::vector<Opt> roll = model_source_opts();
  roll.insert(roll.end(), {{"steps", Kind::integer, 100, "integrator steps"},
                           {"dt", Kind::real, 0.01, "integrator step"},
                           {"q", Kind::reals, nullptr, "initial coordinates (comma separated)"},
                           {"qd", Kind::reals, nullptr, "initial velocities (comma separated)"},
                           {"aux", Kind::reals, nullptr, "aux inputs (relativistic: g)"},
                           {"seed", Kind::uinteger, 0, "seed for a sampled initial state"},
                           {"index", Kind::uinteger, 0, "stream index for a sampled initial state"},
                           {"out", Kind::text, nullptr, "trajectory CSV (wave1d: field values)"},
                           {"rates_out", Kind::text, nullptr, "wave1d rates CSV (default <out stem>_rates.csv)"}});
  cs.push_back({"rollout", "Integrate learned or analytic dynamics", roll, cmd_rollout});

  const EvalConfig e;
  std::vector<Opt> eval = model_source_opts();
  eval.insert(eval.end(), {{"n_traj", Kind::integer, e.n_traj, "number of trajectories"},
                           {"steps", Kind::integer, e.steps, "steps per trajectory"},
                           {"dt", Kind::real, e.dt, "integrator step"},
                           {"seed", Kind::uinteger, e.seed, "initial-condition seed"},
                           {"out", Kind::text, nullptr, "report JSON"}});
  cs.push_back({"eval", "Compare a model with the analytic reference", eval, cmd_eval});

  cs.push_back({"export",
                "Convert reports or trajectory CSVs to long-format CSV",
                {{"input", Kind::texts, nullptr, "report .json or trajectory .csv files"},
                 {"labels", Kind::texts, nullptr, "series label per input"},
                 {"format", Kind::text, "csv", "output format"},
                 {"per_trajectory", Kind::flag, false, "also emit per-trajectory report series"},
                 {"out", Kind::text, "-", "output file, - for stdout"}},
                cmd_export});
  return cs;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const std::vector<Command> cmds = commands();
  CLI::App app("Lagrangian neural network toolkit", "lnn");
  app.require_subcommand(1);

  struct Bound {
    const Command* cmd;
    CLI::App* sub;
    std::string config;
    std::vector<std::string> text;  // one slot per option
    std::vector<std::vector<std::string>> lists;
    std::vector<bool> flags;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    Bound& b = bound[i];
    b.cmd = &cmds[i];
    b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    b.sub->add_option("--config", b.config, "JSON config; flags override its values");
    b.text.resize(cmds[i].opts.size());
    b.lists.resize(cmds[i].opts.size());
    b.flags.assign(cmds[i].opts.size(), false);
    for (std::size_t k = 0; k < cmds[i].opts.size(); ++k) {
      const Opt& o = cmds[i].opts[k];
      std::string help = o.help;
      if (!o.def.is_null()) help += " [" + (o.def.is_string() ? o.def.get<std::string>() : o.def.dump()) + "]";
      if (o.kind == Kind::flag) {
        b.sub->add_flag(flag_name(o.key), [&b, k](std::int64_t) { b.flags[k] = true; }, help);
      } else if (o.kind == Kind::reals || o.kind == Kind::texts) {
        b.sub->add_option(flag_name(o.key), b.lists[k], help)
            ->delimiter(',')
            ->type_name(o.kind == Kind::reals ? "REAL" : "TEXT");
      } else {
        const char* type = o.kind == Kind::integer    ? "INT"
                           : o.kind == Kind::uinteger ? "UINT"
                           : o.kind == Kind::real     ? "REAL"
                                                      : "TEXT";
        b.sub->add_option(flag_name(o.key), b.text[k], help)->type_name(type);
      }
    }
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "lnn: " << e.what() << '\n';
    for (const auto& b : bound)
      if (b.sub->parsed()) err << b.sub->help();
    return kExitUsage;
  }

  for (const Bound& b : bound) {
    if (!b.sub->parsed()) continue;
    const Command& cmd = *b.cmd;
    try {
      json c = json::object();
      for (const Opt& o : cmd.opts) c[o.key] = o.def;
      if (!b.config.empty()) c.update(read_config(b.config, cmd.name, cmd.opts));
      for (std::size_t k = 0; k < cmd.opts.size(); ++k) {
        const Opt& o = cmd.opts[k];
        const std::string f = flag_name(o.key);
        if (b.sub->count(f) == 0) continue;
        if (o.kind == Kind::flag) {
          c[o.key] = b.flags[k];
        } else if (o.kind == Kind::texts) {
          c[o.key] = b.lists[k];
        } else if (o.kind == Kind::reals) {
          json a = json::array();
          for (const auto& s : b.lists[k]) a.push_back(parse_real(o.key, s));
          c[o.key] = a;
        } else {
          c[o.key] = parse_value(o, b.text[k]);
        }
      }
      return cmd.run(c, out, err);
    } catch (const UsageError& e) {
      err << "lnn " << cmd.name << ": " << e.what() << '\n';
      return kExitUsage;
    } catch (const InvalidArgument& e) {
      err << "lnn " << cmd.name << ": " << e.what() << '\n';
      return kExitUsage;
    } catch (const DomainError& e) {
      err << "lnn " << cmd.name << ": " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::ios_base::failure& e) {
      err << "lnn " << cmd.name << ": " << e.what() << '\n';
      return kExitIo;
    } catch (const NumericError& e) {
      err << "lnn " << cmd.name << ": numeric failure: " << e.what() << '\n';
      return kExitDiverged;
    }
  }
  return kExitUsage;
}

}  // namespace lnn::cli
