// Copyright 2026 The lapcue Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: solve, oracle, compare and sweep modes. Every mode
// is a plain function returning its exit code so it can be driven in-process.
//
// Exit codes: 0 ok, 1 other failure, 2 parse/usage error, 3 infeasible
// budget, 4 singularity (with --strict), 5 convergence failure or
// non-monotone sweep, 6 oracle gap or oracle infeasibility.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lapcue/error.hpp"
#include "lapcue/io.hpp"
#include "lapcue/oracle.hpp"
#include "lapcue/report.hpp"
#include "lapcue/solver.hpp"
#include "lapcue/track.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue::cli {

inline constexpr const char* kVersion = "0.1.0";
// Overrides the output directory when --out is not given.
inline constexpr const char* kOutDirEnv = "LAPCUE_OUT_DIR";

inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return 2;
    case ErrorKind::kInfeasibleBudget: return 3;
    case ErrorKind::kSingularity: return 4;
    case ErrorKind::kConvergence: return 5;
    case ErrorKind::kOracleGap: return 6;
    default: return 1;
  }
}

struct CommonArgs {
  std::string track;
  std::string vehicle;
  std::string config;  // optional
  std::string out;     // optional
};

struct Inputs {
  TrackProfile track;
  VehicleParams vehicle;
  RunConfig config;
  Json digests;
};

inline Inputs LoadInputs(const CommonArgs& a) {
  Inputs in;
  in.digests = Json::object();
  if (!a.config.empty()) {
    in.config = ParseConfig(ReadFile(a.config), a.config);
    in.digests["config"] = {{"path", a.config}, {"fnv1a64", Digest(ReadFile(a.config))}};
  }
  const std::string track_text = ReadFile(a.track);
  TrackLoadOptions opt;
  if (in.config.ds > 0.0) opt.ds = in.config.ds;
  std::istringstream track_stream(track_text);
  in.track = ParseTrack(track_stream, a.track, opt);
  in.digests["track"] = {{"path", a.track}, {"fnv1a64", Digest(track_text)}};
  const std::string vehicle_text = ReadFile(a.vehicle);
  in.vehicle = ParseVehicle(vehicle_text, a.vehicle);
  in.digests["vehicle"] = {{"path", a.vehicle}, {"fnv1a64", Digest(vehicle_text)}};
  return in;
}

// --out wins, then the environment variable, then the working directory.
inline std::filesystem::path ResolveOutDir(const std::string& flag) {
  std::filesystem::path dir = ".";
  if (!flag.empty()) {
    dir = flag;
  } else if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    dir = env;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorKind::kParse, "cannot create output directory " + dir.string() +
                                       ": " + ec.message());
  }
  return dir;
}

inline Json TrackToJson(const TrackProfile& t) {
  return {{"s0_m", t.s0}, {"ds_m", t.ds}, {"points", t.size()}, {"periodic", t.periodic}};
}

inline Json ConfigEcho(const Inputs& in) {
  return {{"solver", ConfigToJson(in.config)},
          {"vehicle", VehicleToJson(in.vehicle)},
          {"track", TrackToJson(in.track)}};
}

inline std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::string SpeedPlot(const std::string& title,
                             const std::vector<std::pair<std::string, std::vector<TrajectoryRow>>>& runs) {
  std::vector<PlotSeries> series;
  for (const auto& [name, rows] : runs) {
    std::vector<TrajectoryRow> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TrajectoryRow& a, const TrajectoryRow& b) { return a.s_m < b.s_m; });
    PlotSeries ps{name, {}, {}};
    for (const auto& r : sorted) {
      ps.x.push_back(r.s_m);
      ps.y.push_back(r.v_mps);
    }
    series.push_back(std::move(ps));
  }
  return SvgLinePlot(title, "s [m]", "v [m/s]", series);
}

struct SolveArgs {
  CommonArgs common;
  double budget = 0.0;
  bool strict = false;
};

inline int RunSolve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const Inputs in = LoadInputs(a.common);
    const auto dir = ResolveOutDir(a.common.out);
    const auto t0 = std::chrono::steady_clock::now();
    const LapSolution sol = SolveEnergyLimited(a.budget, in.track, in.vehicle, in.config.solver);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const double s0 = in.track.s0, length = sol.lap_length;
    const auto rows = TrajectoryRows(sol, in.vehicle, s0);
    WriteFile((dir / "trajectory.csv").string(), TrajectoryCsv(rows));
    WriteFile((dir / "cues.csv").string(), CueCsv(sol.cues, s0, length));
    WriteFile((dir / "trajectory.svg").string(),
              SpeedPlot("Energy-limited lap", {{"speed", rows}}));
    Json report = {{"mode", "solve"},
                   {"version", kVersion},
                   {"inputs", in.digests},
                   {"budget_J", a.budget},
                   {"lap_time_s", sol.t_lap},
                   {"energy_used_J", sol.delta_e_b},
                   {"lambda_b_per_J", sol.lambda_b},
                   {"energy_constraint_active", sol.energy_constraint_active},
                   {"cues", CuesToJson(sol.cues, s0, length)},
                   {"warnings", WarningsToJson(sol.warnings, s0, length)},
                   {"solve_ms", ms},
                   {"config", ConfigEcho(in)}};
    WriteFile((dir / "report.json").string(), Dump(report));

    out << "lap time " << FormatNumber(sol.t_lap) << " s, energy "
        << FormatNumber(sol.delta_e_b) << " J, lambda_b " << FormatNumber(sol.lambda_b)
        << " s/J, " << sol.cues.size() << " cues, " << FormatNumber(ms) << " ms\n";
    if (!sol.energy_constraint_active) out << "energy constraint inactive\n";
    for (const auto& w : sol.warnings) err << "warning: " << w.message << "\n";
    if (a.strict && !sol.warnings.empty()) return ExitCode(ErrorKind::kSingularity);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  }
}

// Cues read off a per-step force sequence: coast where drive ends, regen
// where a pure motor-regen phase follows drive or coast.
inline std::vector<Cue> CuesFromForces(const std::vector<double>& s,
                                       const std::vector<double>& f_m,
                                       const std::vector<double>& f_brk) {
  auto cls = [&](std::size_t i) {
    if (f_brk[i] > 0.0) return 3;
    if (f_m[i] > 0.0) return 0;
    return f_m[i] == 0.0 ? 1 : 2;
  };
  std::vector<Cue> cues;
  for (std::size_t i = 1; i < f_m.size(); ++i) {
    const int prev = cls(i - 1), cur = cls(i);
    if (cur == 1 && prev == 0) cues.push_back({s[i], CueType::kCoast});
    if (cur == 2 && prev < 2) cues.push_back({s[i], CueType::kRegen});
  }
  return cues;
}

struct OracleArgs {
  CommonArgs common;
  double lambda_b = 0.0;
  std::size_t dp_levels = 400;
  bool dense = false;
};

inline DpGridSpec GridSpec(std::size_t levels, bool dense, const RunConfig& c) {
  DpGridSpec spec;
  spec.levels = levels;
  spec.dense_forces = dense;
  spec.v_min = c.solver.v_min;
  return spec;
}

inline std::string DpTrajectoryCsv(const DpResult& dp, const VehicleParams& p,
                                   double s0, double length) {
  std::string out = "s_m,v_mps,E_kin_J,F_m_N,F_brk_N\n";
  for (std::size_t i = 0; i < dp.e_kin.size(); ++i) {
    const std::size_t k = std::min(i, dp.f_m.size() - 1);  // force of the step leaving i
    for (double x : {UnrollDistance(dp.s[i], s0, length), p.Speed(dp.e_kin[i]), dp.e_kin[i],
                     dp.f_m[k]}) {
      out += FormatNumber(x) + ",";
    }
    out += FormatNumber(dp.f_brk[k]) + "\n";
  }
  return out;
}

inline int RunOracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const Inputs in = LoadInputs(a.common);
    const auto dir = ResolveOutDir(a.common.out);
    DpResult dp;
    try {
      dp = DpSolve(a.lambda_b, in.track, in.vehicle, GridSpec(a.dp_levels, a.dense, in.config));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasibleSpeed) throw;
      throw Error(ErrorKind::kOracleGap, std::string("oracle infeasible: ") + e.what());
    }
    const double s0 = in.track.s0, length = in.track.length();
    WriteFile((dir / "dp_trajectory.csv").string(), DpTrajectoryCsv(dp, in.vehicle, s0, length));
    Json report = {{"mode", "oracle"},
                   {"version", kVersion},
                   {"inputs", in.digests},
                   {"lambda_b_per_J", a.lambda_b},
                   {"dp_levels", a.dp_levels},
                   {"dense_forces", a.dense},
                   {"cost_s", dp.cost},
                   {"lap_time_s", dp.t_lap},
                   {"energy_used_J", dp.delta_e_b},
                   {"config", ConfigEcho(in)}};
    WriteFile((dir / "oracle_report.json").string(), Dump(report));
    out << "dp cost " << FormatNumber(dp.cost) << " s, lap time " << FormatNumber(dp.t_lap)
        << " s, energy " << FormatNumber(dp.delta_e_b) << " J\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  }
}

struct CompareArgs {
  CommonArgs common;
  double lambda_b = 0.0;
  std::size_t dp_levels = 400;
  double gap_tol = 2e-3;
  bool dense = false;
  // Fault injection: replaces the oracle side's regen efficiency.
  std::optional<double> dp_eta_minus;
};

inline int RunCompare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const Inputs in = LoadInputs(a.common);
    const auto dir = ResolveOutDir(a.common.out);
    if (!(a.gap_tol >= 0.0)) throw Error(ErrorKind::kParse, "--gap-tol must be >= 0");
    const AnchoredLap lap = AnchorLap(in.vehicle, in.track);
    const LapSolution ind = a.lambda_b > 0.0
                                ? SolveLap(a.lambda_b, lap, in.vehicle, in.config.solver)
                                : FlatOutLap(lap, in.vehicle, in.config.solver);
    VehicleParams dp_vehicle = in.vehicle;
    if (a.dp_eta_minus) dp_vehicle.eta_minus = *a.dp_eta_minus;

    const double s0 = in.track.s0, length = in.track.length();
    Json report = {{"mode", "compare"},
                   {"version", kVersion},
                   {"inputs", in.digests},
                   {"lambda_b_per_J", a.lambda_b},
                   {"dp_levels", a.dp_levels},
                   {"dense_forces", a.dense},
                   {"gap_tol", a.gap_tol}};
    if (a.dp_eta_minus) report["dp_eta_minus_override"] = *a.dp_eta_minus;
    const double cost_ind = ind.t_lap + a.lambda_b * ind.delta_e_b;
    report["indirect"] = {{"cost_s", cost_ind},
                          {"lap_time_s", ind.t_lap},
                          {"energy_used_J", ind.delta_e_b},
                          {"cues", CuesToJson(ind.cues, s0, length)}};

    DpResult dp;
    try {
      dp = DpSolve(a.lambda_b, in.track, dp_vehicle, GridSpec(a.dp_levels, a.dense, in.config));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasibleSpeed && e.kind() != ErrorKind::kDomain) throw;
      report["oracle_error"] = e.what();
      report["pass"] = false;
      WriteFile((dir / "gap_report.json").string(), Dump(report));
      err << "error: oracle infeasible: " << e.what() << "\n";
      return ExitCode(ErrorKind::kOracleGap);
    }
    const auto traj = ind.Trajectory();
    if (traj.size() != dp.e_kin.size()) {
      throw Error(ErrorKind::kContract, "indirect and oracle grids differ in size");
    }

    std::string csv = "s_m,v_indirect_mps,v_dp_mps,E_kin_indirect_J,E_kin_dp_J\n";
    double max_dv = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const double vi = in.vehicle.Speed(traj[i].e_kin);
      const double vd = in.vehicle.Speed(dp.e_kin[i]);
      max_dv = std::max(max_dv, std::abs(vi - vd));
      for (double x : {UnrollDistance(traj[i].s, s0, length), vi, vd, traj[i].e_kin}) {
        csv += FormatNumber(x) + ",";
      }
      csv += FormatNumber(dp.e_kin[i]) + "\n";
    }
    WriteFile((dir / "compare.csv").string(), csv);

    const auto dp_cues = CuesFromForces(dp.s, dp.f_m, dp.f_brk);
    Json offsets = Json::array();
    for (const auto& c : ind.cues) {
      std::optional<double> best;
      for (const auto& d : dp_cues) {
        if (d.type != c.type) continue;
        if (!best || std::abs(d.s - c.s) < std::abs(*best)) best = d.s - c.s;
      }
      Json o = {{"s_m", UnrollDistance(c.s, s0, length)}, {"cue", ToString(c.type)}};
      o["offset_m"] = best ? Json(*best) : Json(nullptr);
      offsets.push_back(o);
    }
    const double gap = std::abs(cost_ind - dp.cost) / dp.cost;
    const bool pass = gap <= a.gap_tol;
    report["dp"] = {{"cost_s", dp.cost},
                    {"lap_time_s", dp.t_lap},
                    {"energy_used_J", dp.delta_e_b},
                    {"cues", CuesToJson(dp_cues, s0, length)}};
    report["relative_cost_gap"] = gap;
    report["max_speed_gap_mps"] = max_dv;
    report["switch_offsets"] = offsets;
    report["pass"] = pass;
    report["config"] = ConfigEcho(in);
    WriteFile((dir / "gap_report.json").string(), Dump(report));

    out << "relative cost gap " << FormatNumber(gap) << ", max speed gap "
        << FormatNumber(max_dv) << " m/s: " << (pass ? "within" : "exceeds")
        << " tolerance " << FormatNumber(a.gap_tol) << "\n";
    return pass ? 0 : ExitCode(ErrorKind::kOracleGap);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  }
}

struct SweepArgs {
  CommonArgs common;
  std::vector<double> budgets;
  std::string range;  // lo:hi:n, inclusive endpoints
  bool plot = false;
  bool strict = false;
};

inline std::vector<double> ParseBudgetRange(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  double lo = 0.0, hi = 0.0, n = 0.0;
  if (parts.size() != 3 || !detail::ParseDouble(parts[0], lo) ||
      !detail::ParseDouble(parts[1], hi) || !detail::ParseDouble(parts[2], n) ||
      !(n >= 1.0) || n != std::floor(n) || !(hi >= lo)) {
    throw Error(ErrorKind::kParse, "--budget-range expects lo:hi:n with hi >= lo and n >= 1");
  }
  const auto count = static_cast<std::size_t>(n);
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) /
                                             static_cast<double>(count - 1));
  }
  return out;
}

inline std::string CsvQuote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline constexpr const char* kSweepHeader =
    "budget_J,t_lap_s,energy_used_J,lambda_b_per_J,cue_count,solve_ms,status,warning";

inline int RunSweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const Inputs in = LoadInputs(a.common);
    const auto dir = ResolveOutDir(a.common.out);
    std::vector<double> budgets = a.budgets;
    if (!a.range.empty()) {
      const auto r = ParseBudgetRange(a.range);
      budgets.insert(budgets.end(), r.begin(), r.end());
    }
    if (budgets.empty()) throw Error(ErrorKind::kParse, "sweep needs --budgets or --budget-range");
    std::sort(budgets.begin(), budgets.end());

    struct Row {
      double budget = 0.0;
      std::optional<LapSolution> sol;
      double ms = 0.0;
      std::string status = "ok";
      std::string warning;
    };
    std::vector<Row> rows;
    int worst = 0;
    for (double b : budgets) {
      Row row;
      row.budget = b;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        row.sol = SolveEnergyLimited(b, in.track, in.vehicle, in.config.solver);
        row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                     .count();
        if (!row.sol->warnings.empty()) {
          row.status = "singular";
          row.warning = row.sol->warnings.front().message;
          if (a.strict) worst = std::max(worst, ExitCode(ErrorKind::kSingularity));
        }
      } catch (const Error& e) {
        row.status = ToString(e.kind());
        row.warning = e.what();
        worst = std::max(worst, ExitCode(e.kind()));
      }
      rows.push_back(std::move(row));
    }

    std::string csv = std::string(kSweepHeader) + "\n";
    PlotSeries series{"lap time", {}, {}};
    std::optional<double> prev_t;
    bool monotone = true;
    for (const auto& r : rows) {
      csv += FormatNumber(r.budget) + ",";
      if (r.sol) {
        csv += FormatNumber(r.sol->t_lap) + "," + FormatNumber(r.sol->delta_e_b) + "," +
               FormatNumber(r.sol->lambda_b) + "," + std::to_string(r.sol->cues.size()) + "," +
               FormatNumber(r.ms);
        series.x.push_back(r.budget);
        series.y.push_back(r.sol->t_lap);
        // A larger budget may not make the lap slower; tolerance covers the
        // energy tolerance of the outer search.
        if (prev_t && r.sol->t_lap > *prev_t * (1.0 + 1e-9)) monotone = false;
        prev_t = r.sol->t_lap;
      } else {
        csv += ",,,,";
      }
      csv += "," + r.status + "," + CsvQuote(r.warning) + "\n";
    }
    WriteFile((dir / "sweep.csv").string(), csv);
    if (a.plot) {
      WriteFile((dir / "sweep.svg").string(),
                SvgLinePlot("Lap time over energy budget", "budget [J]", "t_lap [s]", {series}));
    }
    out << rows.size() << " budgets swept\n";
    for (const auto& r : rows) {
      if (r.status != "ok") err << "budget " << FormatNumber(r.budget) << ": " << r.warning << "\n";
    }
    if (!monotone) {
      err << "error: lap time is not nonincreasing in the budget\n";
      worst = std::max(worst, ExitCode(ErrorKind::kConvergence));
    }
    return worst;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  }
}

inline void AddCommon(CLI::App* sub, CommonArgs& c) {
  sub->add_option("--track", c.track, "track table (s_m,kappa_per_m)")->required();
  sub->add_option("--vehicle", c.vehicle, "vehicle parameter JSON")->required();
  sub->add_option("--config", c.config, "solver config JSON");
  sub->add_option("--out", c.out, std::string("output directory (default: $") + kOutDirEnv +
                                      " or the working directory)");
}

// Parses argv and dispatches to one mode.
inline int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-limited minimum-lap-time solver", "lapcue"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "solve an energy-limited lap");
  AddCommon(s, solve.common);
  s->add_option("--budget", solve.budget, "battery energy budget [J]")->required();
  s->add_flag("--strict", solve.strict, "treat singularity warnings as errors");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "dynamic-programming oracle at fixed lambda_b");
  AddCommon(o, oracle.common);
  o->add_option("--lambda-b", oracle.lambda_b, "battery costate [s/J]")->required();
  o->add_option("--dp-levels", oracle.dp_levels, "energy grid levels");
  o->add_flag("--dense", oracle.dense, "add intermediate forces to the action set");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "indirect solver vs dynamic-programming oracle");
  AddCommon(c, cmp.common);
  c->add_option("--lambda-b", cmp.lambda_b, "battery costate [s/J]")->required();
  c->add_option("--dp-levels", cmp.dp_levels, "energy grid levels");
  c->add_option("--gap-tol", cmp.gap_tol, "relative cost gap tolerance");
  c->add_flag("--dense", cmp.dense, "add intermediate forces to the action set");
  c->add_option("--dp-eta-minus", cmp.dp_eta_minus,
                "override the oracle's regen efficiency (fault injection)");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "solve a list of budgets");
  AddCommon(w, sweep.common);
  auto* list = w->add_option("--budgets", sweep.budgets, "comma-separated budgets [J]")
                   ->delimiter(',');
  auto* range = w->add_option("--budget-range", sweep.range, "lo:hi:n budgets [J]");
  list->excludes(range);
  w->add_flag("--plot", sweep.plot, "also write sweep.svg");
  w->add_flag("--strict", sweep.strict, "treat singularity warnings as errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : ExitCode(ErrorKind::kParse);
  }
  if (s->parsed()) return RunSolve(solve, out, err);
  if (o->parsed()) return RunOracle(oracle, out, err);
  if (c->parsed()) return RunCompare(cmp, out, err);
  return RunSweep(sweep, out, err);
}

}  // namespace lapcue::cli
