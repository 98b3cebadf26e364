#include "qwfb/cli.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace qwfb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigSchemaError("config: key '" + key + "' expects a real number, got '" + value +
                            "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigSchemaError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigSchemaError("config: key '" + key + "' expects an unsigned integer, got '" +
                            value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigSchemaError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ConfigSchemaError("config: key '" + key + "' has an empty list entry");
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigSchemaError("config: key '" + key + "' expects a list");
  return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("failed to write " + tmp.string());
  }
  fs::rename(tmp, path);
}

json strategy_json(const FeedbackStrategy& strategy) {
  json j;
  if (std::holds_alternative<NoFeedback>(strategy)) {
    j["kind"] = "none";
  } else if (std::holds_alternative<UnboundedFeedback>(strategy)) {
    j["kind"] = "unbounded";
  } else if (const auto* b = std::get_if<BoundedFeedback>(&strategy)) {
    j["kind"] = "bounded";
    j["xi"] = b->xi;
  } else if (const auto* d = std::get_if<DigitalFeedback>(&strategy)) {
    j["kind"] = "digital";
    j["values"] = d->values;
  } else {
    j["kind"] = "analytic_single";
  }
  return j;
}

json config_json(const SimulationConfig& cfg) {
  json j;
  j["n"] = cfg.n;
  j["gamma"] = cfg.gamma;
  j["kappa"] = cfg.kappa;
  j["eta"] = cfg.eta;
  j["dt"] = cfg.dt;
  j["steps"] = cfg.effective_steps();
  j["n_traj"] = cfg.n_traj;
  j["strategy"] = strategy_json(cfg.strategy);
  j["control_kind"] = cfg.control_kind == ControlKind::Hopping ? "hopping" : "onsite";
  j["target"] = cfg.target;
  j["f_th"] = cfg.f_th;
  j["master_seed"] = cfg.master_seed;
  j["record_stride"] = cfg.record_stride;
  j["record_dy"] = cfg.record_dy;
  j["warm_start"] = cfg.opt.warm_start;
  return j;
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SimulationConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError("config: cannot open '" + path.string() + "'");

  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigSchemaError("config: line " + std::to_string(lineno) +
                              " is not of the form key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigSchemaError("config: line " + std::to_string(lineno) +
                              " has an empty key or value");
    if (!kv.emplace(key, value).second)
      throw ConfigSchemaError("config: duplicate key '" + key + "'");
  }

  SimulationConfig cfg;
  std::optional<std::string> strategy_name;
  std::optional<double> xi;
  std::optional<std::vector<double>> values;

  for (const auto& [key, value] : kv) {
    if (key == "n") {
      cfg.n = int(parse_int(key, value));
    } else if (key == "gamma") {
      cfg.gamma = parse_double(key, value);
    } else if (key == "kappa") {
      cfg.kappa = parse_double(key, value);
    } else if (key == "eta") {
      cfg.eta = parse_double(key, value);
    } else if (key == "dt") {
      cfg.dt = parse_double(key, value);
    } else if (key == "steps") {
      cfg.steps = int(parse_int(key, value));
    } else if (key == "n_traj") {
      cfg.n_traj = int(parse_int(key, value));
    } else if (key == "strategy") {
      strategy_name = value;
    } else if (key == "xi") {
      xi = parse_double(key, value);
    } else if (key == "values") {
      values = parse_double_list(key, value);
    } else if (key == "control_kind") {
      if (value == "hopping")
        cfg.control_kind = ControlKind::Hopping;
      else if (value == "onsite")
        cfg.control_kind = ControlKind::OnSite;
      else
        throw ConfigSchemaError("config: control_kind must be hopping or onsite");
    } else if (key == "target") {
      cfg.target = int(parse_int(key, value));
    } else if (key == "f_th") {
      cfg.f_th = parse_double(key, value);
    } else if (key == "master_seed") {
      cfg.master_seed = parse_u64(key, value);
    } else if (key == "record_stride") {
      cfg.record_stride = int(parse_int(key, value));
    } else if (key == "record_dy") {
      cfg.record_dy = parse_bool(key, value);
    } else if (key == "warm_start") {
      cfg.opt.warm_start = parse_bool(key, value);
    } else {
      throw ConfigSchemaError("config: unknown key '" + key + "'");
    }
  }

  if (!strategy_name) throw ConfigSchemaError("config: missing required key 'strategy'");
  const std::string& name = *strategy_name;
  if (name == "none") {
    cfg.strategy = NoFeedback{};
  } else if (name == "unbounded") {
    cfg.strategy = UnboundedFeedback{};
  } else if (name == "bounded") {
    if (!xi) throw ConfigSchemaError("config: strategy bounded requires key 'xi'");
    cfg.strategy = BoundedFeedback{*xi};
  } else if (name == "digital") {
    if (!values) throw ConfigSchemaError("config: strategy digital requires key 'values'");
    cfg.strategy = DigitalFeedback{*values};
  } else if (name == "analytic_single") {
    cfg.strategy = AnalyticSingleFeedback{};
  } else {
    throw ConfigSchemaError("config: unknown strategy '" + name + "'");
  }
  if (xi && name != "bounded")
    throw ConfigSchemaError("config: key 'xi' is only valid with strategy bounded");
  if (values && name != "digital")
    throw ConfigSchemaError("config: key 'values' is only valid with strategy digital");

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigInvariantError(e.what());
  }
  return cfg;
}

OutputBundle cmd_simulate(const SimulationConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const EnsembleStats stats = run_ensemble(cfg);
  const int rows = int(stats.times.size());
  const int n_controls = int(stats.mean_theta.cols());
  const bool analytic = stats.mean_v.size() > 0;

  std::string csv = "t,mean_fidelity,stderr_fidelity,mean_x,mean_y";
  if (analytic) csv += ",mean_v,applied_fraction";
  csv += "\n";
  for (int k = 0; k < rows; ++k) {
    csv += format_g17(stats.times(k)) + "," + format_g17(stats.mean_fidelity(k)) + "," +
           format_g17(stats.se_fidelity(k)) + "," + format_g17(stats.mean_x(k)) + "," +
           format_g17(stats.mean_y(k));
    if (analytic)
      csv += "," + format_g17(stats.mean_v(k)) + "," + format_g17(stats.applied_fraction(k));
    csv += "\n";
  }

  std::string couplings = "t";
  for (int c = 0; c < n_controls; ++c) couplings += ",theta_bar_" + std::to_string(c);
  for (int c = 0; c < n_controls; ++c) couplings += ",stderr_theta_" + std::to_string(c);
  couplings += "\n";
  for (int k = 0; k < rows; ++k) {
    couplings += format_g17(stats.times(k));
    for (int c = 0; c < n_controls; ++c) couplings += "," + format_g17(stats.mean_theta(k, c));
    for (int c = 0; c < n_controls; ++c) couplings += "," + format_g17(stats.se_theta(k, c));
    couplings += "\n";
  }

  json summary;
  summary["version"] = kVersion;
  summary["config"] = config_json(cfg);
  summary["t_th"] = stats.t_th ? json(*stats.t_th) : json(nullptr);
  summary["effective_time"] = stats.eff_time ? json(*stats.eff_time) : json(nullptr);
  std::vector<double> asym(stats.asymptotic_theta.data(),
                           stats.asymptotic_theta.data() + stats.asymptotic_theta.size());
  summary["asymptotic_theta"] = asym;
  summary["completed"] = stats.n_completed;
  summary["aborted"] = stats.n_aborted;

  OutputBundle bundle;
  bundle.ensemble_csv = out_dir / "ensemble.csv";
  bundle.couplings_csv = out_dir / "couplings.csv";
  bundle.summary_json = out_dir / "summary.json";
  write_atomic(bundle.ensemble_csv, csv);
  write_atomic(bundle.couplings_csv, couplings);
  write_atomic(bundle.summary_json, summary.dump(2) + "\n");
  return bundle;
}

OutputBundle cmd_trajectory(const SimulationConfig& cfg, int index, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const TrajectoryRecord rec = run_trajectory(cfg, index);
  if (rec.aborted)
    throw std::runtime_error("trajectory " + std::to_string(index) + " aborted at step " +
                             std::to_string(rec.abort_step) + " (seed " +
                             std::to_string(rec.seed) + ")");

  const int rows = int(rec.times.size());
  const int n_controls = int(rec.theta.cols());
  const bool analytic = rec.analytic_v.size() > 0;

  std::string csv = "t,fidelity,x,y";
  for (int c = 0; c < n_controls; ++c) csv += ",theta_" + std::to_string(c);
  if (cfg.record_dy)
    for (int c = 0; c < int(rec.dy.cols()); ++c) csv += ",dy_" + std::to_string(c);
  if (analytic) csv += ",v,applied";
  csv += "\n";
  for (int k = 0; k < rows; ++k) {
    csv += format_g17(rec.times(k)) + "," + format_g17(rec.fidelity(k)) + "," +
           format_g17(rec.mean_x(k)) + "," + format_g17(rec.mean_y(k));
    for (int c = 0; c < n_controls; ++c) csv += "," + format_g17(rec.theta(k, c));
    if (cfg.record_dy)
      for (int c = 0; c < int(rec.dy.cols()); ++c) csv += "," + format_g17(rec.dy(k, c));
    if (analytic)
      csv += "," + format_g17(rec.analytic_v(k)) + "," + format_g17(rec.analytic_applied(k));
    csv += "\n";
  }

  OutputBundle bundle;
  bundle.trajectory_csv = out_dir / "trajectory.csv";
  write_atomic(bundle.trajectory_csv, csv);
  return bundle;
}

OutputBundle cmd_unconditional(const SimulationConfig& cfg, UnconditionalChannels channels,
                               const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const CycleGraph g{cfg.n};
  const ComplexMatrix h_s = walk_hamiltonian(g, WalkParameters{cfg.gamma});
  const MonitoringSetup m = (channels == UnconditionalChannels::XY)
                                ? xy_monitoring(g, cfg.kappa)
                                : index_monitoring(g, cfg.kappa);
  const int steps = cfg.steps > 0 ? cfg.steps : int(std::lround(5.0 / cfg.dt));
  const PopulationsSeries series = populations_series(g, h_s, m, cfg.dt, steps);

  std::string csv = "t";
  for (int k = 0; k < cfg.n; ++k) csv += ",p_" + std::to_string(k);
  csv += ",max_offdiag\n";
  for (int row = 0; row < int(series.times.size()); ++row) {
    csv += format_g17(series.times(row));
    for (int k = 0; k < cfg.n; ++k) csv += "," + format_g17(series.populations(row, k));
    csv += "," + format_g17(series.max_offdiagonal(row)) + "\n";
  }

  OutputBundle bundle;
  bundle.populations_csv = out_dir / "populations.csv";
  write_atomic(bundle.populations_csv, csv);
  return bundle;
}

OutputBundle cmd_sweep_xi(const SimulationConfig& cfg, const std::vector<double>& xi_values,
                          const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<XiSweepRow> rows = sweep_xi(cfg, xi_values);
  const int n_controls = rows.empty() ? 0 : int(rows.front().asymptotic_theta.size());

  std::string csv = "xi,t_th,effective_time";
  for (int c = 0; c < n_controls; ++c) csv += ",atheta_" + std::to_string(c);
  csv += "\n";
  for (const auto& row : rows) {
    csv += format_g17(row.xi) + ",";
    csv += row.t_th ? format_g17(*row.t_th) : std::string();
    csv += ",";
    csv += row.eff_time ? format_g17(*row.eff_time) : std::string();
    for (int c = 0; c < n_controls; ++c) csv += "," + format_g17(row.asymptotic_theta(c));
    csv += "\n";
  }

  OutputBundle bundle;
  bundle.sweep_csv = out_dir / "sweep.csv";
  write_atomic(bundle.sweep_csv, csv);
  return bundle;
}

}  // namespace qwfb
