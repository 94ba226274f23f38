#include "bsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsim/batch.hpp"
#include "bsim/energy.hpp"
#include "bsim/metrics.hpp"
#include "bsim/scenario_io.hpp"
#include "bsim/sim.hpp"

namespace bsim {

using nlohmann::json;

namespace {

constexpr double kEightHours = 28800.0;

// Raised for a schedule that cannot be met; maps to kExitInfeasible.
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::filesystem::path output_dir(const std::string& flag, const Scenario& s) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  if (!s.output_dir.empty()) return s.output_dir;
  return "bsim-out";
}

std::string summary_rows(const RunResult& r, std::string_view label) {
  std::string out;
  for (const auto& n : r.summary.nodes) out += format_table_row(n, label) + "\n";
  return out;
}

std::string label_of(const Scenario& s) {
  if (!s.label.empty()) return s.label;
  if (s.illumination.kind == IlluminationProfile::Kind::Constant) return format_double(s.illumination.lux) + "lx";
  return "-";
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string profile;
  std::optional<double> lux;
  std::optional<double> harvest_mw;
  std::string harvester;
  std::optional<double> margin;
};

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const EnergyProfile profile = load_profile(a.profile);
  const bool liot = profile.has_stage(StageKind::LiotDataUpload);
  double p_harv = 0.0;
  if (a.harvest_mw) {
    p_harv = *a.harvest_mw;
  } else {
    std::string hname = a.harvester;
    if (hname.empty()) {
      if (a.profile == "ble-table1") hname = "ble-default";
      if (a.profile == "liot-table2") hname = "liot-default";
    }
    auto h = presets::harvester_by_name(hname);
    if (!h) throw ValidationError("--harvester", "a harvester preset (ble-default, liot-default) is needed with --lux");
    if (!(*a.lux >= 0.0)) throw ValidationError("--lux", "must be >= 0");
    p_harv = h->power_mw(*a.lux);
  }
  if (!(p_harv >= 0.0)) throw ValidationError("--harvest-mw", "must be >= 0");
  const double margin = a.margin.value_or(liot ? 0.0 : 0.05);
  if (!(margin >= 0.0)) throw ValidationError("--margin", "must be >= 0");

  const auto totals = active_totals(profile);
  const auto sol = solve_sleep_time(profile, p_harv);
  out << "harvest_mw   " << format_double(p_harv) << "\n";
  out << "t_active_s   " << format_double(totals.t_active_s) << "\n";
  out << "e_active_j   " << format_double(totals.e_active_j) << "\n";
  out << "solution     " << to_string(sol.kind) << "\n";
  if (sol.kind == SleepSolution::Kind::Infeasible) {
    throw Infeasible("harvest power " + format_double(p_harv) + " mW does not exceed the sleep power " +
                     format_double(profile.sleep_power_mw()) + " mW; no sleep time balances the cycle");
  }
  const double cycle = (totals.t_active_s + sol.t_sleep_s) * (1.0 + margin);
  out << "t_sleep_s    " << fmt("%.3f", sol.t_sleep_s) << "\n";
  out << "margin       " << format_double(margin) << "\n";
  out << "cycle_s      " << fmt("%.3f", cycle) << "\n";
  out << "samples_8h   " << std::llround(kEightHours / cycle) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
};

void write_outputs(const std::filesystem::path& dir, const RunResult& r) {
  write_file(dir / "summary.csv", format_summary(r.summary, ExportFormat::Csv));
  write_file(dir / "summary.jsonl", format_summary(r.summary, ExportFormat::JsonLines));
  write_file(dir / "cycles.csv", format_cycles(r.cycles, ExportFormat::Csv));
  write_file(dir / "voltage.csv", format_voltage(r.voltage, ExportFormat::Csv));
  write_file(dir / "frames.csv", format_frames(r.frames, ExportFormat::Csv));
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  json doc = load_scenario_document(a.scenario);
  if (a.seed) set_param(doc, "/seed", *a.seed);
  if (a.duration) set_param(doc, "/duration_s", *a.duration);
  const Scenario s = scenario_from_json(doc);
  const RunResult r = run(s);
  const auto dir = output_dir(a.out, s);
  write_outputs(dir, r);
  out << summary_rows(r, label_of(s));
  out << "outputs written to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string scenario;
  std::string param;
  std::string values;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  std::string out;
};

std::string resolve_param(const std::string& p) {
  if (p == "lux") return "/illumination/lux";
  if (p == "loss") return "/channel/loss";
  if (p == "seed") return "/seed";
  if (p == "duration") return "/duration_s";
  if (!p.empty() && p.front() != '/') {
    std::string ptr = "/" + p;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    return ptr;
  }
  return p;
}

std::vector<json> parse_values(const std::string& list) {
  std::vector<json> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    json v = json::parse(item, nullptr, false);
    out.push_back(v.is_discarded() ? json(item) : v);
  }
  if (out.empty()) throw ValidationError("--values", "no values given");
  return out;
}

bool value_less(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return a.get<double>() < b.get<double>();
  return a.dump() < b.dump();
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  json base = load_scenario_document(a.scenario);
  if (a.seed) set_param(base, "/seed", *a.seed);
  const std::string pointer = resolve_param(a.param);
  auto values = parse_values(a.values);
  std::stable_sort(values.begin(), values.end(), value_less);

  // Everything is validated before the first run starts.
  std::vector<Scenario> scenarios;
  for (const auto& v : values) {
    json doc = base;
    set_param(doc, pointer, v);
    scenarios.push_back(scenario_from_json(doc));
  }
  const auto results = run_batch_parallel(scenarios, a.jobs);

  std::string csv;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) throw std::runtime_error("run for value " + values[i].dump() + " failed: " + results[i].error);
    std::istringstream lines(format_summary(results[i].result->summary, ExportFormat::Csv));
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
      if (header) {
        if (i == 0) csv += "param,value," + line + "\n";
        header = false;
        continue;
      }
      const std::string v = values[i].is_string() ? values[i].get<std::string>() : values[i].dump();
      csv += pointer + "," + v + "," + line + "\n";
    }
  }

  std::filesystem::path dest;
  if (!a.out.empty()) {
    dest = a.out;
  } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
    dest = std::filesystem::path(env) / "sweep.csv";
  }
  if (dest.empty()) {
    out << csv;
  } else {
    write_file(dest, csv);
    for (std::size_t i = 0; i < results.size(); ++i) out << summary_rows(*results[i].result, label_of(scenarios[i]));
    out << "sweep written to " << dest.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string profile;
  std::string run_dir;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (!a.profile.empty()) {
    const EnergyProfile p = load_profile(a.profile);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-16s %12s %12s %12s\n", "stage", "current_ma", "duration_s", "energy_j");
    out << buf;
    for (const auto& s : p.active_stages) {
      std::snprintf(buf, sizeof buf, "%-16s %12.3f %12.3f %12.4f\n", std::string(to_string(s.kind)).c_str(),
                    s.current_ma, s.duration_s, stage_energy(s, p.voltage_v));
      out << buf;
    }
    const auto t = active_totals(p);
    std::snprintf(buf, sizeof buf, "%-16s %12s %12.3f %12.4f\n", "active total", "", t.t_active_s, t.e_active_j);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-16s %12.3f %12s %9.4f mW\n", "Sleep", p.sleep_current_ma, "",
                  p.sleep_power_mw());
    out << buf;
    return kExitOk;
  }
  const auto dir = std::filesystem::path(a.run_dir);
  const RunSummary summary = parse_summary(read_file(dir / "summary.csv"), ExportFormat::Csv);
  out << "duration_s=" << format_double(summary.duration_s) << " seed=" << summary.seed << "\n";
  for (const auto& n : summary.nodes) {
    out << format_table_row(n, "-") << " scap_min_v=" << fmt("%.3f", n.scap_min_v)
        << " scap_max_v=" << fmt("%.3f", n.scap_max_v) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator for batteryless BLE and light-based IoT sensor nodes", "bsim"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve the sleep time of one duty cycle");
  solve_cmd->add_option("--profile", solve.profile, "Energy profile (ble-table1, liot-table2 or a JSON file)")
      ->required();
  auto* lux_opt = solve_cmd->add_option("--lux", solve.lux, "Illuminance in lux");
  auto* harv_opt = solve_cmd->add_option("--harvest-mw", solve.harvest_mw, "Harvested power in mW");
  lux_opt->excludes(harv_opt);
  solve_cmd->add_option("--harvester", solve.harvester, "Harvester preset used with --lux");
  solve_cmd->add_option("--margin", solve.margin, "Cycle stretch (default 0.05 for BLE, 0 for LIoT)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one scenario");
  sim_cmd->add_option("--scenario", sim.scenario, "Preset name or scenario file")->required();
  sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");
  sim_cmd->add_option("--duration", sim.duration, "Override the duration in seconds");
  sim_cmd->add_option("--out", sim.out, "Output directory");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario once per parameter value");
  sweep_cmd->add_option("--scenario", sweep.scenario, "Base preset or scenario file")->required();
  sweep_cmd->add_option("--param", sweep.param, "JSON pointer (or lux, loss, seed, duration)")->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated values")->required();
  sweep_cmd->add_option("--seed", sweep.seed, "Override the base seed");
  sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent runs (0 = all cores)")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--out", sweep.out, "Merged CSV path (default: stdout)");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Print a profile's energy table or a finished run");
  auto* rp = report_cmd->add_option("--profile", report.profile, "Energy profile");
  auto* rr = report_cmd->add_option("--run", report.run_dir, "Directory written by simulate");
  rp->excludes(rr);

  std::string preset_name;
  auto* show_cmd = app.add_subcommand("show-preset", "Print a built-in scenario as JSON");
  show_cmd->add_option("name", preset_name, "ble-700lx, ble-500lx, liot-700lx or liot-500lx")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (solve_cmd->parsed() && !solve.lux && !solve.harvest_mw) {
      throw CLI::ValidationError("solve", "exactly one of --lux or --harvest-mw is required");
    }
    if (report_cmd->parsed() && report.profile.empty() && report.run_dir.empty()) {
      throw CLI::ValidationError("report", "one of --profile or --run is required");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(solve, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out);
    if (report_cmd->parsed()) return cmd_report(report, out);
    if (show_cmd->parsed()) {
      out << preset_document(preset_name).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const Infeasible& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "invalid: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "invalid: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace bsim
