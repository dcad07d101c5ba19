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

// File formats: vehicle and solver configuration as JSON objects, trajectory
// and cue tables as headered comma-separated text. Every writer has a loader
// that reproduces its input exactly (numbers are written with 17 significant
// digits).

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapcue/error.hpp"
#include "lapcue/pmp.hpp"
#include "lapcue/solver.hpp"
#include "lapcue/track.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue {

using Json = nlohmann::ordered_json;

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kParse, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kParse, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::kParse, "write failed for " + path);
}

// 64-bit FNV-1a, hex encoded; identifies input files in reports.
inline std::string Digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string FormatNumber(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace io_detail {

inline Json ParseJson(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, where + ": " + e.what());
  }
}

// Reads numeric fields through a key table; unknown keys are rejected so a
// misspelt parameter cannot silently fall back to its default.
inline void ReadFields(const Json& j, const std::string& where,
                       const std::map<std::string, double*>& fields,
                       bool require_all) {
  if (!j.is_object()) throw Error(ErrorKind::kParse, where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw Error(ErrorKind::kParse, where + ": unknown key '" + key + "'");
    }
    if (!value.is_number()) {
      throw Error(ErrorKind::kParse, where + ": key '" + key + "' must be a number");
    }
    *it->second = value.get<double>();
  }
  if (require_all) {
    for (const auto& [key, ptr] : fields) {
      (void)ptr;
      if (!j.contains(key)) {
        throw Error(ErrorKind::kParse, where + ": missing key '" + key + "'");
      }
    }
  }
}

inline std::map<std::string, double*> VehicleFields(VehicleParams& p) {
  return {{"m", &p.m},           {"c_d", &p.c_d},
          {"A", &p.A},           {"rho", &p.rho},
          {"c_kappa", &p.c_kappa}, {"c_r", &p.c_r},
          {"c_l", &p.c_l},       {"g", &p.g},
          {"mu_x", &p.mu_x},     {"mu_y", &p.mu_y},
          {"P_pt_plus", &p.P_pt_plus}, {"P_pt_minus", &p.P_pt_minus},
          {"eta_plus", &p.eta_plus},   {"eta_minus", &p.eta_minus},
          {"F_b0", &p.F_b0}};
}

}  // namespace io_detail

// All fifteen parameters are required.
inline VehicleParams ParseVehicle(const std::string& text, const std::string& where) {
  VehicleParams p;
  io_detail::ReadFields(io_detail::ParseJson(text, where), where,
                        io_detail::VehicleFields(p), true);
  try {
    p.Validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kParse, where + ": " + e.what());
  }
  return p;
}

inline VehicleParams LoadVehicle(const std::string& path) {
  return ParseVehicle(ReadFile(path), path);
}

inline Json VehicleToJson(const VehicleParams& p) {
  VehicleParams copy = p;
  Json j = Json::object();
  // Fixed key order for stable output.
  const char* order[] = {"m", "c_d", "A", "rho", "c_kappa", "c_r", "c_l", "g",
                         "mu_x", "mu_y", "P_pt_plus", "P_pt_minus",
                         "eta_plus", "eta_minus", "F_b0"};
  auto fields = io_detail::VehicleFields(copy);
  for (const char* k : order) j[k] = *fields.at(k);
  return j;
}

// Solver options plus the optional resampling step `ds` (0 keeps the
// track's own grid).
struct RunConfig {
  SolverConfig solver;
  double ds = 0.0;
};

inline RunConfig ParseConfig(const std::string& text, const std::string& where) {
  RunConfig c;
  double max_iters = c.solver.max_iters;
  io_detail::ReadFields(io_detail::ParseJson(text, where), where,
                        {{"tol_lambda", &c.solver.tol_lambda},
                         {"tol_apex", &c.solver.tol_apex},
                         {"tol_energy", &c.solver.tol_energy},
                         {"max_iters", &max_iters},
                         {"lambda_b_growth", &c.solver.lambda_b_growth},
                         {"lambda_b_initial", &c.solver.lambda_b_initial},
                         {"v_min", &c.solver.v_min},
                         {"radicand_floor", &c.solver.radicand_floor},
                         {"ds", &c.ds}},
                        false);
  auto positive = [&](double x, const char* name) {
    if (!(x > 0.0)) throw Error(ErrorKind::kParse, where + ": " + name + " must be > 0");
  };
  positive(c.solver.tol_lambda, "tol_lambda");
  positive(c.solver.tol_apex, "tol_apex");
  positive(c.solver.tol_energy, "tol_energy");
  positive(c.solver.v_min, "v_min");
  positive(c.solver.lambda_b_initial, "lambda_b_initial");
  if (!(c.solver.lambda_b_growth > 1.0)) {
    throw Error(ErrorKind::kParse, where + ": lambda_b_growth must be > 1");
  }
  if (!(max_iters >= 1.0) || max_iters != static_cast<double>(static_cast<int>(max_iters))) {
    throw Error(ErrorKind::kParse, where + ": max_iters must be a positive integer");
  }
  c.solver.max_iters = static_cast<int>(max_iters);
  if (c.ds < 0.0) throw Error(ErrorKind::kParse, where + ": ds must be >= 0");
  return c;
}

inline RunConfig LoadConfig(const std::string& path) {
  return ParseConfig(ReadFile(path), path);
}

inline Json ConfigToJson(const RunConfig& c) {
  return Json{{"tol_lambda", c.solver.tol_lambda},
              {"tol_apex", c.solver.tol_apex},
              {"tol_energy", c.solver.tol_energy},
              {"max_iters", c.solver.max_iters},
              {"lambda_b_growth", c.solver.lambda_b_growth},
              {"lambda_b_initial", c.solver.lambda_b_initial},
              {"v_min", c.solver.v_min},
              {"radicand_floor", c.solver.radicand_floor},
              {"ds", c.ds}};
}

// ---------------------------------------------------------------------------
// Trajectory and cue tables.

struct TrajectoryRow {
  double s_m = 0.0;
  double v_mps = 0.0;
  double e_kin_J = 0.0;
  double e_b_J = 0.0;
  double lambda_kin = 0.0;
  double ratio = 0.0;
  double f_m_N = 0.0;
  double f_brk_N = 0.0;
  std::string phase;
};

inline const char* kTrajectoryHeader =
    "s_m,v_mps,E_kin_J,E_b_J,lambda_kin,ratio,F_m_N,F_brk_N,phase";

// Maps an anchored distance back into the original lap coordinates.
inline double UnrollDistance(double s, double s0, double length) {
  return s >= s0 + length ? s - length : s;
}

inline std::vector<TrajectoryRow> TrajectoryRows(const LapSolution& sol,
                                                 const VehicleParams& p,
                                                 double original_s0) {
  std::vector<TrajectoryRow> rows;
  for (const auto& tp : sol.Trajectory()) {
    TrajectoryRow r;
    r.s_m = UnrollDistance(tp.s, original_s0, sol.lap_length);
    r.v_mps = p.Speed(tp.e_kin);
    r.e_kin_J = tp.e_kin;
    r.e_b_J = tp.e_b;
    r.lambda_kin = tp.lambda_kin;
    r.ratio = sol.lambda_b > 0.0 ? tp.lambda_kin / sol.lambda_b : 0.0;
    r.f_m_N = tp.u.f_m;
    r.f_brk_N = tp.u.f_brk;
    r.phase = std::string(ToString(tp.phase));
    rows.push_back(r);
  }
  return rows;
}

inline std::string TrajectoryCsv(const std::vector<TrajectoryRow>& rows) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& r : rows) {
    for (double x : {r.s_m, r.v_mps, r.e_kin_J, r.e_b_J, r.lambda_kin, r.ratio,
                     r.f_m_N, r.f_brk_N}) {
      out += FormatNumber(x);
      out += ',';
    }
    out += r.phase;
    out += '\n';
  }
  return out;
}

namespace io_detail {

inline std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Calls `row` for every data line after checking the header.
inline void ReadTable(const std::string& text, const std::string& where,
                      const std::string& header, std::size_t columns,
                      const std::function<void(const std::vector<std::string>&,
                                               std::size_t)>& row) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != header) throw detail::ParseError(where, n, "expected header '" + header + "'");
      saw_header = true;
      continue;
    }
    const auto cells = SplitCsv(line);
    if (cells.size() != columns) {
      throw detail::ParseError(where, n, "expected " + std::to_string(columns) + " columns");
    }
    row(cells, n);
  }
  if (!saw_header) throw detail::ParseError(where, n, "missing header");
}

inline double Cell(const std::string& text, const std::string& where, std::size_t line) {
  double x = 0.0;
  if (!detail::ParseDouble(text, x)) throw detail::ParseError(where, line, "not a number: '" + text + "'");
  return x;
}

}  // namespace io_detail

inline std::vector<TrajectoryRow> ParseTrajectoryCsv(const std::string& text,
                                                     const std::string& where) {
  std::vector<TrajectoryRow> rows;
  io_detail::ReadTable(text, where, kTrajectoryHeader, 9,
                       [&](const std::vector<std::string>& c, std::size_t line) {
                         TrajectoryRow r;
                         double* f[] = {&r.s_m, &r.v_mps, &r.e_kin_J, &r.e_b_J,
                                        &r.lambda_kin, &r.ratio, &r.f_m_N, &r.f_brk_N};
                         for (std::size_t k = 0; k < 8; ++k) {
                           *f[k] = io_detail::Cell(c[k], where, line);
                         }
                         r.phase = c[8];
                         rows.push_back(r);
                       });
  return rows;
}

inline const char* kCueHeader = "s_m,cue";

inline std::string CueCsv(const std::vector<Cue>& cues, double original_s0,
                          double length) {
  std::string out = std::string(kCueHeader) + "\n";
  for (const auto& c : cues) {
    out += FormatNumber(UnrollDistance(c.s, original_s0, length));
    out += ',';
    out += ToString(c.type);
    out += '\n';
  }
  return out;
}

inline std::vector<Cue> ParseCueCsv(const std::string& text, const std::string& where) {
  std::vector<Cue> cues;
  io_detail::ReadTable(text, where, kCueHeader, 2,
                       [&](const std::vector<std::string>& c, std::size_t line) {
                         Cue cue;
                         cue.s = io_detail::Cell(c[0], where, line);
                         if (c[1] == "Coast") {
                           cue.type = CueType::kCoast;
                         } else if (c[1] == "Regen") {
                           cue.type = CueType::kRegen;
                         } else {
                           throw detail::ParseError(where, line, "unknown cue '" + c[1] + "'");
                         }
                         cues.push_back(cue);
                       });
  return cues;
}

}  // namespace lapcue
