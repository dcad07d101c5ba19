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

// Brute-force references for the indirect solver.
//
// DpSolve runs backward value iteration for the lambda_b-relaxed lap problem
//
//   min  sum over steps of  (1/v + lambda_b dE_b/ds) ds
//
// on a log-spaced E_kin grid. A step applies one force law for its whole
// length; the cost-to-go is interpolated linearly in E_kin at the exact next
// state. No costates are involved.
//
// SwitchSearch enumerates every (coast onset, regen onset) node pair on a
// single-straight lap and keeps the cheapest one.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lapcue/error.hpp"
#include "lapcue/pmp.hpp"
#include "lapcue/solver.hpp"
#include "lapcue/track.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue {

struct DpGridSpec {
  std::size_t levels = 400;
  // Adds `dense_count` evenly spaced total forces across the admissible
  // interval to the bang-bang set.
  bool dense_forces = false;
  std::size_t dense_count = 21;
  double v_min = 5.0;  // m/s, lowest grid level
};

struct DpResult {
  double lambda_b = 0.0;
  double cost = 0.0;  // value at the anchor apex state, s
  double t_lap = 0.0;  // along the extracted trajectory
  double delta_e_b = 0.0;
  std::vector<double> s;
  std::vector<double> e_kin;
  std::vector<double> f_m;    // per step
  std::vector<double> f_brk;  // per step
  std::vector<double> levels;  // shared E_kin grid below the per-node caps
};

namespace oracle_detail {

// Force law applied over one step. kBlend applies the total force
// F_grip- + q (F_drive - F_grip-), regenerating as far as the motor allows.
enum class ForceLaw { kDrive, kCoast, kRegen, kBrake, kBlend };

struct Action {
  ForceLaw law = ForceLaw::kCoast;
  double q = 0.0;
};

inline ControlInput ApplyLaw(const ForceEnvelope& env, const Action& a) {
  ControlInput u;
  switch (a.law) {
    case ForceLaw::kDrive: u.f_m = env.DriveForce(); break;
    case ForceLaw::kCoast: break;
    case ForceLaw::kRegen: u.f_m = env.RegenForce(); break;
    case ForceLaw::kBrake:
      u.f_m = env.RegenForce();
      u.f_brk = std::max(u.f_m - env.f_grip_minus, 0.0);
      break;
    case ForceLaw::kBlend: {
      const double total =
          env.f_grip_minus + a.q * (env.DriveForce() - env.f_grip_minus);
      u.f_m = std::max(total, env.RegenForce());
      u.f_brk = std::max(u.f_m - total, 0.0);
      break;
    }
  }
  return u;
}

struct StepOutcome {
  double e_kin = 0.0;
  double e_b = 0.0;  // battery energy over the step
  ControlInput u;    // at the step start
};

// RK4 over one step for a fixed force law; the force is re-evaluated at
// every stage. Returns nullopt if E_kin leaves (0, inf).
inline std::optional<StepOutcome> StepLaw(const VehicleParams& p,
                                          const StepCurvature& k, double e,
                                          const Action& a, double ds,
                                          const EnvelopeOptions& opt) {
  auto rate = [&](double kappa, double ek) -> std::optional<std::array<double, 2>> {
    if (!(ek > 0.0)) return std::nullopt;
    const auto env = Envelope(p, kappa, ek, opt);
    const auto u = ApplyLaw(env, a);
    return std::array<double, 2>{u.Net() - env.f_d, BatteryPower(p, u.f_m)};
  };
  const auto k1 = rate(k.start, e);
  if (!k1) return std::nullopt;
  const auto k2 = rate(k.mid, e + 0.5 * ds * (*k1)[0]);
  if (!k2) return std::nullopt;
  const auto k3 = rate(k.mid, e + 0.5 * ds * (*k2)[0]);
  if (!k3) return std::nullopt;
  const auto k4 = rate(k.end, e + ds * (*k3)[0]);
  if (!k4) return std::nullopt;
  StepOutcome out;
  out.e_kin = e + ds / 6.0 * ((*k1)[0] + 2.0 * (*k2)[0] + 2.0 * (*k3)[0] + (*k4)[0]);
  out.e_b = ds / 6.0 * ((*k1)[1] + 2.0 * (*k2)[1] + 2.0 * (*k3)[1] + (*k4)[1]);
  if (!(out.e_kin > 0.0)) return std::nullopt;
  out.u = ApplyLaw(Envelope(p, k.start, e, opt), a);
  return out;
}

inline std::vector<Action> ActionSet(const DpGridSpec& spec) {
  std::vector<Action> set = {{ForceLaw::kDrive, 0.0},
                             {ForceLaw::kCoast, 0.0},
                             {ForceLaw::kRegen, 0.0},
                             {ForceLaw::kBrake, 0.0}};
  if (spec.dense_forces && spec.dense_count >= 2) {
    for (std::size_t j = 0; j < spec.dense_count; ++j) {
      const double q = static_cast<double>(j) / static_cast<double>(spec.dense_count - 1);
      set.push_back({ForceLaw::kBlend, q});
    }
  }
  return set;
}

}  // namespace oracle_detail

// Solves the relaxed lap problem over the anchored lap (anchor apex at the
// start, state pinned to its closure limit; the lap ends anywhere at or below
// the closure limit of the same apex).
inline DpResult DpSolve(double lambda_b, const TrackProfile& t,
                        const VehicleParams& p, const DpGridSpec& spec = {}) {
  using namespace oracle_detail;
  if (!(lambda_b >= 0.0) || !std::isfinite(lambda_b)) {
    throw Error(ErrorKind::kDomain, "lambda_b must be finite and >= 0");
  }
  if (spec.levels < 2 || !(spec.v_min > 0.0)) {
    throw Error(ErrorKind::kDomain, "DP grid needs >= 2 levels and v_min > 0");
  }
  p.Validate();
  const AnchoredLap lap = AnchorLap(p, t);
  const std::size_t n = lap.track.LapPoints();
  const double ds = lap.track.ds;
  SolverConfig scfg;
  const LapSolution flat = FlatOutLap(lap, p, scfg);
  double e_top = 0.0;
  for (const auto& tp : flat.Trajectory()) e_top = std::max(e_top, tp.e_kin);
  e_top *= 1.02;
  const double e_lo = p.KineticEnergy(spec.v_min);
  if (!(e_top > e_lo)) {
    throw Error(ErrorKind::kDomain, "flat-out lap never exceeds the DP floor speed");
  }

  DpResult res;
  res.lambda_b = lambda_b;
  const std::size_t L = spec.levels;
  const double dlog = std::log(e_top / e_lo) / static_cast<double>(L - 1);
  res.levels.resize(L);
  for (std::size_t j = 0; j < L; ++j) {
    res.levels[j] = e_lo * std::exp(dlog * static_cast<double>(j));
  }
  res.levels.back() = e_top;

  EnvelopeOptions opt;
  opt.v_min = scfg.v_min;
  opt.grip_slack = kUnbounded;
  const auto actions = ActionSet(spec);

  // Node caps: the closure limit, lowered to the largest E_kin from which
  // full braking still respects every cap downstream (found by bisection on
  // the forward step, so a braking step from a cap lands on the next cap).
  // Cells above a cap have no admissible continuation.
  std::vector<double> cap(n + 1);
  cap[n] = std::min(lap.e_kin_jump[n], e_top);
  for (std::size_t i = n; i-- > 0;) {
    const double ceiling = std::min(lap.e_kin_jump[i], e_top);
    const StepCurvature k = CurvatureOfStep(lap.track, i);
    auto lands = [&](double e) {
      const auto st = StepLaw(p, k, e, {ForceLaw::kBrake, 0.0}, ds, opt);
      return !st || st->e_kin <= cap[i + 1];
    };
    if (lands(ceiling)) {
      cap[i] = ceiling;
      continue;
    }
    double lo = 0.0, hi = ceiling;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (lands(mid) ? lo : hi) = mid;
    }
    cap[i] = lo;
  }
  // Node i holds the shared levels strictly below its cap, then the cap.
  std::vector<std::size_t> below(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    below[i] = static_cast<std::size_t>(
        std::lower_bound(res.levels.begin(), res.levels.end(), cap[i]) -
        res.levels.begin());
  }
  auto level = [&](std::size_t i, std::size_t j) {
    return j < below[i] ? res.levels[j] : cap[i];
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> value(n + 1);
  value[n].assign(below[n] + 1, 0.0);

  // Cost-to-go at node i for an arbitrary E_kin, linear between levels.
  auto interp = [&](std::size_t i, double e) {
    if (e > cap[i] * (1.0 + 1e-9) || e < e_lo) return kInf;
    const auto& v = value[i];
    const std::size_t nb = below[i];
    if (e >= cap[i]) return v[nb];
    auto j = static_cast<std::size_t>(std::floor(std::log(e / e_lo) / dlog));
    j = std::min(j, nb == 0 ? 0 : nb - 1);
    // Guard the floor against rounding.
    while (j > 0 && res.levels[j] > e) --j;
    while (j + 1 < nb && res.levels[j + 1] <= e) ++j;
    if (nb == 0) return v[0];
    const double e0 = res.levels[j];
    const double e1 = level(i, j + 1);
    const double w = e1 > e0 ? (e - e0) / (e1 - e0) : 0.0;
    return (1.0 - w) * v[j] + w * v[j + 1];
  };

  auto stage = [&](std::size_t i, double e, const Action& a,
                   StepOutcome* out) -> double {
    const auto st = StepLaw(p, CurvatureOfStep(lap.track, i), e, a, ds, opt);
    if (!st) return kInf;
    const double next = interp(i + 1, st->e_kin);
    if (!std::isfinite(next)) return kInf;
    if (out) *out = *st;
    const double dt = 0.5 * ds * (1.0 / p.Speed(e) + 1.0 / p.Speed(st->e_kin));
    return dt + lambda_b * st->e_b + next;
  };

  for (std::size_t i = n; i-- > 0;) {
    value[i].assign(below[i] + 1, kInf);
    for (std::size_t j = 0; j <= below[i]; ++j) {
      const double e = level(i, j);
      double best = kInf;
      for (const auto& a : actions) best = std::min(best, stage(i, e, a, nullptr));
      value[i][j] = best;
    }
  }
  res.cost = value[0][below[0]];
  if (!std::isfinite(res.cost)) {
    throw Error(ErrorKind::kInfeasibleSpeed,
                "DP: no admissible trajectory from the anchor apex state");
  }

  // Forward extraction without snapping to the grid.
  res.s.resize(n + 1);
  res.e_kin.resize(n + 1);
  res.f_m.resize(n);
  res.f_brk.resize(n);
  double e = cap[0];
  res.e_kin[0] = e;
  for (std::size_t i = 0; i < n; ++i) {
    res.s[i] = lap.track.s(i);
    double best = kInf;
    StepOutcome chosen;
    for (const auto& a : actions) {
      StepOutcome st;
      const double c = stage(i, e, a, &st);
      if (c < best) {
        best = c;
        chosen = st;
      }
    }
    if (!std::isfinite(best)) {
      throw Error(ErrorKind::kInfeasibleSpeed,
                  "DP: extracted trajectory left the grid at s=" +
                      std::to_string(lap.track.s(i)));
    }
    e = std::min(chosen.e_kin, cap[i + 1]);
    res.e_kin[i + 1] = e;
    res.f_m[i] = chosen.u.f_m;
    res.f_brk[i] = chosen.u.f_brk;
    res.delta_e_b += chosen.e_b;
  }
  res.s[n] = lap.track.s(n);
  res.t_lap = LapTime(res.e_kin, ds, p);
  return res;
}

struct SwitchSearchResult {
  double lambda_b = 0.0;
  double cost = 0.0;  // lap time + lambda_b * battery energy, s
  double t_lap = 0.0;
  double delta_e_b = 0.0;
  // Nodes where coasting and regeneration begin; `end` when the phase is
  // never entered before the brake arc.
  std::size_t coast_index = 0;
  std::size_t regen_index = 0;
  std::size_t end_index = 0;
  double coast_onset = 0.0;  // m
  double regen_onset = 0.0;  // m
  bool never_coast = false;
  std::vector<double> e_kin;
  // cost[c][r - c] for switch nodes relative to the straight start; kept
  // only when requested.
  std::vector<std::vector<double>> surface;
};

// Exhaustive switch-point search on a lap with exactly one apex: the car
// leaves the apex plateau under full drive, may switch to coast at node c and
// to full regen at node r >= c, and brakes along the braking envelope once it
// meets it.
inline SwitchSearchResult SwitchSearch(double lambda_b, const TrackProfile& t,
                                       const VehicleParams& p,
                                       const SolverConfig& cfg = {},
                                       bool keep_surface = false) {
  using namespace oracle_detail;
  if (!(lambda_b >= 0.0) || !std::isfinite(lambda_b)) {
    throw Error(ErrorKind::kDomain, "lambda_b must be finite and >= 0");
  }
  p.Validate();
  const AnchoredLap lap = AnchorLap(p, t);
  if (lap.apexes.size() != 1) {
    throw Error(ErrorKind::kDomain,
                "switch search needs a single-straight lap (one apex), got " +
                    std::to_string(lap.apexes.size()));
  }
  const std::size_t entry = lap.apex_index[0];
  const std::size_t begin = lap.apex_exit[0];
  const std::size_t end = lap.apex_index[1];
  const double ds = lap.track.ds;
  const auto envelope = BrakingEnvelope(lap, begin, end, p, cfg);
  EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);

  // Plateau hold, identical for every switch pair.
  const auto hold = HoldPlateau(lap, entry, begin, OptimalState{}, p, cfg);
  double hold_time = 0.0;
  for (std::size_t k = 0; k + 1 < hold.size(); ++k) {
    hold_time += 0.5 * ds * (1.0 / p.Speed(hold[k].e_kin) + 1.0 / p.Speed(hold[k + 1].e_kin));
  }
  const double hold_e_b = hold.back().e_b;

  // Time and battery energy from node j to the apex along the envelope.
  const std::size_t m = end - begin + 1;
  std::vector<double> tail_time(m, 0.0), tail_eb(m, 0.0);
  for (std::size_t k = m - 1; k-- > 0;) {
    const std::size_t i = begin + k;
    const auto env0 = Envelope(p, lap.track.kappa[i], envelope[k], opt);
    const auto env1 = Envelope(p, lap.track.kappa[i + 1], envelope[k + 1], opt);
    tail_eb[k] = tail_eb[k + 1] + 0.5 * ds * (BatteryPower(p, env0.RegenForce()) +
                                              BatteryPower(p, env1.RegenForce()));
    tail_time[k] = tail_time[k + 1] + 0.5 * ds * (1.0 / p.Speed(envelope[k]) +
                                                  1.0 / p.Speed(envelope[k + 1]));
  }

  // One phase run from node `from` with state (e, time, eb) until it meets
  // the envelope. `record` receives every node state before the join.
  struct Totals {
    bool ok = false;
    std::size_t join = 0;  // first node on the envelope
    double time = 0.0;     // to the apex
    double eb = 0.0;
  };
  auto run = [&](std::size_t from, double e, double time, double eb, ForceLaw law,
                 auto&& record) {
    Totals out;
    for (std::size_t i = from; i < end; ++i) {
      const std::size_t k = i - begin;
      record(k, e, time, eb);
      const auto st = StepLaw(p, CurvatureOfStep(lap.track, i), e, {law, 0.0}, ds, opt);
      if (!st) return out;
      double next = st->e_kin;
      const bool join = next >= envelope[k + 1];
      if (join) {
        next = envelope[k + 1];
      } else if (next > lap.e_kin_jump[i + 1] * (1.0 + cfg.tol_apex)) {
        return out;
      }
      eb += st->e_b;
      time += 0.5 * ds * (1.0 / p.Speed(e) + 1.0 / p.Speed(next));
      e = next;
      if (join) {
        out.ok = true;
        out.join = i + 1;
        out.time = time + tail_time[k + 1];
        out.eb = eb + tail_eb[k + 1];
        return out;
      }
    }
    record(m - 1, e, time, eb);
    out.ok = true;
    out.join = end;
    out.time = time;
    out.eb = eb;
    return out;
  };
  struct Profile {
    std::vector<double> e, time, eb;
    explicit Profile(std::size_t m) : e(m, 0.0), time(m, 0.0), eb(m, 0.0) {}
    void operator()(std::size_t k, double ek, double t, double b) {
      e[k] = ek;
      time[k] = t;
      eb[k] = b;
    }
  };
  auto ignore = [](std::size_t, double, double, double) {};

  Profile drive(m);
  const Totals drive_tot =
      run(begin, lap.e_kin_jump[begin], 0.0, 0.0, ForceLaw::kDrive, drive);

  SwitchSearchResult best;
  best.lambda_b = lambda_b;
  best.end_index = end;
  best.cost = std::numeric_limits<double>::infinity();
  auto consider = [&](const Totals& tot, std::size_t c, std::size_t r) {
    if (!tot.ok) return std::numeric_limits<double>::infinity();
    const double time = hold_time + tot.time;
    const double energy = hold_e_b + tot.eb;
    const double cost = time + lambda_b * energy;
    // Ties keep the later switch pair.
    if (cost <= best.cost) {
      best.cost = cost;
      best.t_lap = time;
      best.delta_e_b = energy;
      best.coast_index = c;
      best.regen_index = r;
    }
    return cost;
  };
  if (keep_surface) best.surface.assign(m, {});

  // Each candidate reuses the drive (and coast) prefix up to its switch node.
  for (std::size_t c = begin; c <= end; ++c) {
    if (c >= drive_tot.join || c == end) {
      const double v = consider(drive_tot, end, end);
      if (keep_surface) best.surface[c - begin].assign(end - c + 1, v);
      continue;
    }
    const std::size_t kc = c - begin;
    Profile coast(m);
    const Totals coast_tot =
        run(c, drive.e[kc], drive.time[kc], drive.eb[kc], ForceLaw::kCoast, coast);
    if (keep_surface) {
      best.surface[kc].assign(end - c + 1, std::numeric_limits<double>::infinity());
    }
    for (std::size_t r = c; r <= end; ++r) {
      double v;
      if (r >= coast_tot.join || r == end) {
        v = consider(coast_tot, c, end);
      } else {
        const std::size_t kr = r - begin;
        v = consider(run(r, coast.e[kr], coast.time[kr], coast.eb[kr],
                         ForceLaw::kRegen, ignore),
                     c, r);
      }
      if (keep_surface) best.surface[kc][r - c] = v;
    }
  }
  if (!std::isfinite(best.cost)) {
    throw Error(ErrorKind::kInfeasibleSpeed, "switch search: no feasible switch pair");
  }
  // Trace the winning pair for its speed profile.
  {
    Profile trace = drive;
    std::size_t join = drive_tot.join;
    if (best.coast_index < end) {
      const std::size_t kc = best.coast_index - begin;
      join = run(best.coast_index, drive.e[kc], drive.time[kc], drive.eb[kc],
                 ForceLaw::kCoast, trace).join;
      if (best.regen_index < end) {
        const std::size_t kr = best.regen_index - begin;
        join = run(best.regen_index, trace.e[kr], trace.time[kr], trace.eb[kr],
                   ForceLaw::kRegen, trace).join;
      }
    }
    for (std::size_t k = join - begin; k < m; ++k) trace.e[k] = envelope[k];
    best.e_kin = trace.e;
  }
  best.never_coast = best.coast_index == end;
  best.coast_onset = lap.track.s(best.coast_index);
  best.regen_onset = lap.track.s(best.regen_index);
  return best;
}

}  // namespace lapcue
