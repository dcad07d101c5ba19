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

// Indirect lap solver. Between two apexes the optimal dynamics are a closed
// ODE in (E_kin, E_b, lambda_kin) once lambda_b is fixed; the only unknown
// per segment is the post-apex costate, found by bisection on whether the
// car overshoots the grip-closure limit before the next apex. An outer
// search on lambda_b meets the lap energy budget.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lapcue/error.hpp"
#include "lapcue/pmp.hpp"
#include "lapcue/track.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue {

struct SolverConfig {
  double tol_lambda = 1e-9;  // bisection width, relative to lambda_b
  double tol_apex = 1e-6;    // admissible overshoot of E_kin,jump, relative
  double tol_energy = 1e-3;  // budget match, relative
  int max_iters = 200;
  double lambda_b_growth = 4.0;
  double lambda_b_initial = 1e-6;  // s/J, first outer bracket end
  double v_min = 5.0;              // m/s, powertrain-limit clamp
  double radicand_floor = 1e-16;
};

// One grid node of an optimal trajectory.
struct TrajectoryPoint {
  double s = 0.0;
  double kappa = 0.0;
  double e_kin = 0.0;
  double e_b = 0.0;
  double lambda_kin = 0.0;
  ControlInput u;
  PolicyPhase phase = PolicyPhase::kCoast;
  Multipliers mu;
};

struct SegmentSolution {
  double s_start = 0.0;
  double s_end = 0.0;
  std::size_t index_start = 0;  // grid index in the anchored lap
  std::size_t index_end = 0;
  double lambda_kin_post = 0.0;
  double lambda_kin_pre_end = 0.0;  // costate arriving at the next apex
  bool flat_out = false;
  // The segment leaves its start apex under power; lambda_kin_post is then
  // -lambda_b/eta+ exactly.
  bool drive_exit = false;
  int iterations = 0;
  std::vector<TrajectoryPoint> points;
  // Leading points held on the start apex plateau. They form the apex record
  // and carry the post-jump costate, so phase-order checks start after them.
  std::size_t apex_nodes = 1;
  std::optional<double> coast_onset;  // m
  std::optional<double> regen_onset;  // m
};

enum class CueType { kCoast, kRegen };

inline const char* ToString(CueType c) {
  return c == CueType::kCoast ? "Coast" : "Regen";
}

struct Cue {
  double s = 0.0;
  CueType type = CueType::kCoast;
};

struct FeasibilityReport {
  bool singular = false;
  // 0: -lambda_b/eta+, 1: -lambda_b eta-.
  int threshold_index = -1;
  double threshold = 0.0;
  double e_kin_sing = 0.0;
  double s = 0.0;
  std::size_t segment = 0;
  std::string message;
};

inline constexpr const char* kSingularityRemedy =
    "increase energy budget or reduce full-throttle power output";

struct LapSolution {
  std::vector<SegmentSolution> segments;
  double lambda_b = 0.0;
  double t_lap = 0.0;
  double delta_e_b = 0.0;
  double budget = 0.0;
  bool budget_set = false;
  bool energy_constraint_active = false;
  std::vector<Cue> cues;
  std::vector<FeasibilityReport> warnings;
  double lap_length = 0.0;
  double s_anchor = 0.0;
  // Costate entering the anchor apex at lap end vs leaving it at lap start.
  double lambda_kin_close_pre = 0.0;
  double lambda_kin_open_post = 0.0;

  // Concatenated lap trajectory in anchored order, each apex once.
  std::vector<TrajectoryPoint> Trajectory() const {
    std::vector<TrajectoryPoint> out;
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& pts = segments[k].points;
      const bool last = k + 1 == segments.size();
      out.insert(out.end(), pts.begin(), last ? pts.end() : pts.end() - 1);
    }
    return out;
  }
};

// Trapezoidal lap time over nodes spaced ds apart.
inline double LapTime(const std::vector<double>& e_kin, double ds,
                      const VehicleParams& p) {
  if (e_kin.size() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < e_kin.size(); ++i) {
    if (!(e_kin[i] > 0.0)) {
      throw Error(ErrorKind::kDomain, "lap time needs positive kinetic energy");
    }
    const double w = (i == 0 || i + 1 == e_kin.size()) ? 0.5 : 1.0;
    acc += w / p.Speed(e_kin[i]);
  }
  return acc * ds;
}

inline double LapTime(const std::vector<TrajectoryPoint>& traj, double ds,
                      const VehicleParams& p) {
  std::vector<double> e(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) e[i] = traj[i].e_kin;
  return LapTime(e, ds, p);
}

// Full state of the coupled optimal dynamics.
struct OptimalState {
  double e_kin = 0.0;
  double e_b = 0.0;
  Costates lam;
  // Set once the terminal brake arc has been entered; lambda_kin is then
  // held non-negative so the policy cannot leave the brake arc.
  bool terminal_brake = false;
};

struct NodeEvaluation {
  ForceEnvelope env;
  PolicyOutput policy;
  Multipliers mu;
  double d_e_kin = 0.0;
  double d_e_b = 0.0;
  double d_lambda_kin = 0.0;
  CostateLinearization lin;  // d_lambda_kin = lin.a + lin.b lambda_kin
};

inline EnvelopeOptions IntegrationEnvelopeOptions(const SolverConfig& cfg) {
  EnvelopeOptions opt;
  opt.v_min = cfg.v_min;
  // Intermediate stages may overshoot the closure point slightly; the grip
  // window is then taken as closed. Overshoot is judged at grid nodes.
  opt.grip_slack = kUnbounded;
  opt.radicand_floor = cfg.radicand_floor;
  return opt;
}

// Policy and the three derivatives at one point, without multipliers; the
// costate derivative is taken from its affine form.
inline NodeEvaluation EvaluateDynamics(const VehicleParams& p, double kappa,
                                       const OptimalState& x,
                                       const EnvelopeOptions& opt) {
  NodeEvaluation ev;
  Costates lam = x.lam;
  if (x.terminal_brake) {
    lam.lambda_kin = std::max(lam.lambda_kin, std::numeric_limits<double>::min());
  }
  ev.env = Envelope(p, kappa, x.e_kin, opt);
  ev.policy = ControlPolicy(ev.env, lam, p);
  ev.d_e_kin = ev.policy.u.Net() - ev.env.f_d;
  ev.d_e_b = BatteryPower(p, ev.policy.u.f_m);
  ev.lin = LinearizeCostate(ev.env, lam, p);
  ev.d_lambda_kin = ev.lin.a + ev.lin.b * lam.lambda_kin;
  return ev;
}

// Evaluates policy, multipliers and all three derivatives at one point.
inline NodeEvaluation EvaluateOptimal(const VehicleParams& p, double kappa,
                                      const OptimalState& x,
                                      const EnvelopeOptions& opt) {
  NodeEvaluation ev;
  Costates lam = x.lam;
  if (x.terminal_brake) {
    lam.lambda_kin = std::max(lam.lambda_kin, std::numeric_limits<double>::min());
  }
  ev.env = Envelope(p, kappa, x.e_kin, opt);
  ev.policy = ControlPolicy(ev.env, lam, p);
  ev.mu = ConstraintMultipliers(ev.env, lam, p);
  ev.d_e_kin = ev.policy.u.Net() - ev.env.f_d;
  ev.d_e_b = BatteryPower(p, ev.policy.u.f_m);
  ev.d_lambda_kin = CostateDerivative(ev.env, lam, ev.mu, p);
  ev.lin = LinearizeCostate(ev.env, lam, p);
  return ev;
}

// Curvature as a function of distance over one step.
struct StepCurvature {
  double start = 0.0;
  double mid = 0.0;
  double end = 0.0;
};

// Exact solution of d lambda/ds = a + b lambda over a distance h.
inline double AffineCostateStep(double lambda, const CostateLinearization& lin,
                                double h) {
  const double bh = lin.b * h;
  if (std::abs(bh) < 1e-9) return lambda + h * (lin.a + lin.b * lambda);
  const double shift = lin.a / lin.b;
  return (lambda + shift) * std::exp(std::min(bh, 700.0)) - shift;
}

// |b| ds above this switches the costate to the exponential update.
inline constexpr double kStiffCostateLimit = 2.0;

// One classical RK4 step; controls and multipliers are re-evaluated at each
// stage. Near grip closure the costate equation becomes stiff; the costate is
// then advanced with its exact affine solution and the state integrated with
// the controls frozen at the mid-step costate. Throws Error(kInfeasibleSpeed)
// when E_kin collapses to zero.
inline OptimalState IntegrateStep(const OptimalState& x, const StepCurvature& k,
                                  const VehicleParams& p, double ds,
                                  const EnvelopeOptions& opt) {
  auto stall = [](double e) {
    if (!(e > 0.0)) {
      throw Error(ErrorKind::kInfeasibleSpeed, "vehicle stalled during step");
    }
  };
  stall(x.e_kin);
  const auto ev0 = EvaluateDynamics(p, k.start, x, opt);
  const bool stiff = std::abs(ev0.lin.b * ds) > kStiffCostateLimit;
  double lam_mid = 0.0;
  double lam_end = 0.0;
  if (stiff) {
    lam_mid = AffineCostateStep(x.lam.lambda_kin, ev0.lin, 0.5 * ds);
    lam_end = AffineCostateStep(x.lam.lambda_kin, ev0.lin, ds);
  }
  auto deriv = [&](double kappa, const OptimalState& z) {
    stall(z.e_kin);
    const auto ev = EvaluateDynamics(p, kappa, z, opt);
    return std::array<double, 3>{ev.d_e_kin, ev.d_e_b, ev.d_lambda_kin};
  };
  auto shifted = [&](const std::array<double, 3>& d, double h) {
    OptimalState z = x;
    z.e_kin += h * d[0];
    z.e_b += h * d[1];
    if (stiff) {
      z.lam.lambda_kin = lam_mid;
    } else {
      z.lam.lambda_kin += h * d[2];
    }
    return z;
  };
  const std::array<double, 3> k1 =
      stiff ? deriv(k.start, shifted({0.0, 0.0, 0.0}, 0.0))
            : std::array<double, 3>{ev0.d_e_kin, ev0.d_e_b, ev0.d_lambda_kin};
  const auto k2 = deriv(k.mid, shifted(k1, 0.5 * ds));
  const auto k3 = deriv(k.mid, shifted(k2, 0.5 * ds));
  const auto k4 = deriv(k.end, shifted(k3, ds));
  OptimalState out = x;
  out.e_kin += ds / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
  out.e_b += ds / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
  if (stiff) {
    out.lam.lambda_kin = lam_end;
  } else {
    out.lam.lambda_kin +=
        ds / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
  }
  if (out.terminal_brake) out.lam.lambda_kin = std::max(out.lam.lambda_kin, 0.0);
  stall(out.e_kin);
  return out;
}

// The lap re-indexed so the anchor apex sits at grid index 0, together with
// the apex grid indices in that numbering (the anchor is repeated at the end).
struct AnchoredLap {
  TrackProfile track;  // rolled, periodic
  std::vector<ApexRecord> apexes;  // in anchored order, anchor first
  std::vector<std::size_t> apex_index;  // size apexes + 1
  std::vector<std::size_t> apex_exit;  // last plateau node per apex
  std::size_t roll = 0;  // original index of anchored index 0
  std::vector<double> e_kin_jump;  // per anchored node

  double OriginalS(std::size_t i, const TrackProfile& original) const {
    const std::size_t n = track.LapPoints();
    return original.s((i + roll) % n);
  }
};

inline AnchoredLap AnchorLap(const VehicleParams& p, const TrackProfile& t) {
  if (!t.periodic) {
    throw Error(ErrorKind::kDomain, "lap solver requires a closed (periodic) track");
  }
  auto apexes = FindApexes(p, t);
  const std::size_t n = t.LapPoints();
  std::size_t anchor = 0;
  for (std::size_t j = 0; j < apexes.size(); ++j) {
    if (apexes[j].anchor) anchor = j;
  }
  AnchoredLap lap;
  lap.roll = apexes[anchor].first;
  lap.track = t.Rolled(lap.roll);
  for (std::size_t j = 0; j < apexes.size(); ++j) {
    ApexRecord rec = apexes[(anchor + j) % apexes.size()];
    lap.apex_index.push_back((rec.first + n - lap.roll) % n);
    lap.apex_exit.push_back((rec.last + n - lap.roll) % n);
    lap.apexes.push_back(rec);
  }
  lap.apex_index.push_back(n);
  lap.e_kin_jump.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    lap.e_kin_jump[i] = EKinJump(p, lap.track.kappa[i]);
  }
  return lap;
}

enum class ShotOutcome { kReached, kViolation, kStalled };

struct ShotResult {
  ShotOutcome outcome = ShotOutcome::kReached;
  std::size_t violation_index = 0;
  double terminal_e_kin = 0.0;
  // Node where the shot joined the braking envelope, if it did.
  std::optional<std::size_t> brake_join;
  std::vector<OptimalState> nodes;  // filled when requested
};

inline StepCurvature CurvatureOfStep(const TrackProfile& t, std::size_t i) {
  return {t.kappa[i], 0.5 * (t.kappa[i] + t.kappa[i + 1]), t.kappa[i + 1]};
}

// Highest E_kin profile from which full grip braking still meets the closure
// limit at node `end`; integrated backward. Along the terminal apex plateau it
// is pinned to the closure limit. Once the curve rises above the closure limit
// anywhere else, the nodes before it cannot join the brake arc without a
// violation and are marked kUnbounded. Entry k corresponds to node begin + k.
inline std::vector<double> BrakingEnvelope(const AnchoredLap& lap,
                                           std::size_t begin, std::size_t end,
                                           const VehicleParams& p,
                                           const SolverConfig& cfg) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  const double ds = lap.track.ds;
  std::vector<double> env(end - begin + 1, kUnbounded);
  auto rate = [&](double kappa, double e) {
    const auto f = Envelope(p, kappa, e, opt);
    return f.f_grip_minus - f.f_d;
  };
  double e = lap.e_kin_jump[end];
  env.back() = e;
  bool plateau = true;
  for (std::size_t i = end; i > begin; --i) {
    const StepCurvature k = CurvatureOfStep(lap.track, i - 1);
    const double k1 = rate(k.end, e);
    const double k2 = rate(k.mid, e - 0.5 * ds * k1);
    const double k3 = rate(k.mid, e - 0.5 * ds * k2);
    const double k4 = rate(k.start, e - ds * k3);
    e -= ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double jump = lap.e_kin_jump[i - 1];
    if (e >= jump) {
      if (!plateau) break;
      e = jump;
    } else {
      plateau = false;
    }
    env[i - 1 - begin] = e;
  }
  return env;
}

// Integrates the optimal dynamics from node `start` (state `x0`) of the
// segment that begins at node `begin`. The brake arc is entered where the
// state meets the braking envelope; the shot is classified by the costate
// there:
//   - lambda_kin turns positive before the envelope is met -> kReached
//     (brakes too early, conservative);
//   - the envelope is met with lambda_kin < 0, or an intermediate closure
//     limit is exceeded -> kViolation (aggressive).
// With `ride` set the shot instead follows the envelope to node `end`.
inline ShotResult ShootFrom(const AnchoredLap& lap, std::size_t begin,
                            std::size_t start, std::size_t end,
                            const OptimalState& x0, const VehicleParams& p,
                            const SolverConfig& cfg,
                            const std::vector<double>& envelope,
                            bool keep_nodes, bool ride = false) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  OptimalState x = x0;
  ShotResult res;
  if (keep_nodes) {
    res.nodes.reserve(end - start + 1);
    res.nodes.push_back(x);
  }
  const double ds = lap.track.ds;
  bool on_envelope = false;
  for (std::size_t i = start; i < end; ++i) {
    try {
      x = IntegrateStep(x, CurvatureOfStep(lap.track, i), p, ds, opt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInfeasibleSpeed) throw;
      res.outcome = ShotOutcome::kStalled;
      res.violation_index = i + 1;
      return res;
    }
    const double cap = envelope[i + 1 - begin];
    if (on_envelope) {
      x.e_kin = cap;
    } else if (x.e_kin >= cap) {
      res.brake_join = i + 1;
      if (!ride) {
        res.outcome = x.lam.lambda_kin < 0.0 ? ShotOutcome::kViolation
                                             : ShotOutcome::kReached;
        res.violation_index = i + 1;
        res.terminal_e_kin = x.e_kin;
        return res;
      }
      on_envelope = true;
      x.terminal_brake = true;
      x.e_kin = cap;
    } else if (x.lam.lambda_kin > 0.0) {
      if (!ride) {
        res.terminal_e_kin = x.e_kin;
        return res;
      }
      x.terminal_brake = true;
    }
    if (keep_nodes) res.nodes.push_back(x);
    const double limit = lap.e_kin_jump[i + 1];
    if (!on_envelope && x.e_kin > limit * (1.0 + cfg.tol_apex)) {
      res.outcome = ShotOutcome::kViolation;
      res.violation_index = i + 1;
      res.terminal_e_kin = x.e_kin;
      return res;
    }
  }
  res.terminal_e_kin = x.e_kin;
  return res;
}

// Shot from apex node `begin` with the car at its apex limit and
// lambda_kin = lambda_post.
inline ShotResult ShootSegment(const AnchoredLap& lap, std::size_t begin,
                               std::size_t end, double lambda_post,
                               double lambda_b, const VehicleParams& p,
                               const SolverConfig& cfg,
                               const std::vector<double>& envelope,
                               bool keep_nodes, bool ride = false) {
  OptimalState x;
  x.e_kin = lap.e_kin_jump[begin];
  x.lam = {lambda_post, lambda_b};
  return ShootFrom(lap, begin, begin, end, x, p, cfg, envelope, keep_nodes, ride);
}

// Full-throttle run from the exit-arc handover. The state there does not
// depend on the costate, and the drive-phase costate equation is linear,
// d lambda/ds = A(s) + B(s) lambda, so RK4 maps the handover costate affinely
// onto every node: lambda_k = alpha_k + beta_k * lambda_handover. A shot then
// only needs to be integrated from just before its coast onset.
struct DriveRun {
  std::size_t start = 0;  // grid node of entry 0
  std::vector<OptimalState> nodes;
  std::vector<double> alpha;
  std::vector<double> beta;
};

inline DriveRun FullThrottleRun(const AnchoredLap& lap, std::size_t begin,
                                std::size_t start, std::size_t end,
                                const OptimalState& x0, double lambda_b,
                                const VehicleParams& p, const SolverConfig& cfg,
                                const std::vector<double>& envelope) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  const double theta = -lambda_b / p.eta_plus;
  const double ds = lap.track.ds;
  struct Rates {
    double de, deb, a, b;
  };
  auto rates = [&](double kappa, double e) {
    const auto f = Envelope(p, kappa, e, opt);
    const double fm = f.DriveForce();
    const double d = f.f_grip_plus < f.f_pt_plus ? f.d_fgrip_plus_dE : f.d_fpt_plus_dE;
    return Rates{fm - f.f_d, BatteryPower(p, fm),
                 TimeDensityGradient(p, e) + theta * d, f.d_fd_dE - d};
  };
  DriveRun run;
  run.start = start;
  OptimalState x = x0;
  x.lam = {0.0, lambda_b};
  run.nodes.push_back(x);
  run.alpha.push_back(0.0);
  run.beta.push_back(1.0);
  double al = 0.0, be = 1.0;
  for (std::size_t i = start; i < end; ++i) {
    const StepCurvature k = CurvatureOfStep(lap.track, i);
    const double e = x.e_kin;
    const Rates r1 = rates(k.start, e);
    const double a1 = r1.a + r1.b * al, b1 = r1.b * be;
    const Rates r2 = rates(k.mid, e + 0.5 * ds * r1.de);
    const double a2 = r2.a + r2.b * (al + 0.5 * ds * a1), b2 = r2.b * (be + 0.5 * ds * b1);
    const Rates r3 = rates(k.mid, e + 0.5 * ds * r2.de);
    const double a3 = r3.a + r3.b * (al + 0.5 * ds * a2), b3 = r3.b * (be + 0.5 * ds * b2);
    const Rates r4 = rates(k.end, e + ds * r3.de);
    const double a4 = r4.a + r4.b * (al + ds * a3), b4 = r4.b * (be + ds * b3);
    x.e_kin += ds / 6.0 * (r1.de + 2.0 * r2.de + 2.0 * r3.de + r4.de);
    x.e_b += ds / 6.0 * (r1.deb + 2.0 * r2.deb + 2.0 * r3.deb + r4.deb);
    al += ds / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    be += ds / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    run.nodes.push_back(x);
    run.alpha.push_back(al);
    run.beta.push_back(be);
    if (x.e_kin >= envelope[i + 1 - begin] ||
        x.e_kin > lap.e_kin_jump[i + 1] * (1.0 + cfg.tol_apex)) {
      break;
    }
  }
  return run;
}

// Shot from the handover with costate `lambda_handover`, skipping ahead
// along the full-throttle run to two nodes before the first node at which
// the drive threshold is reached.
inline ShotResult ShootFromRun(const AnchoredLap& lap, std::size_t begin,
                               std::size_t end, const DriveRun& run,
                               double lambda_handover, double lambda_b,
                               const VehicleParams& p, const SolverConfig& cfg,
                               const std::vector<double>& envelope,
                               bool keep_nodes, bool ride = false) {
  const double theta = -lambda_b / p.eta_plus;
  const std::size_t n = run.nodes.size();
  std::size_t k = 0;
  while (k < n && run.alpha[k] + run.beta[k] * lambda_handover < theta) ++k;
  const std::size_t j = k >= 2 ? std::min(k, n) - 2 : 0;
  auto at = [&](std::size_t q) {
    OptimalState x = run.nodes[q];
    x.lam = {run.alpha[q] + run.beta[q] * lambda_handover, lambda_b};
    return x;
  };
  ShotResult res = ShootFrom(lap, begin, run.start + j, end, at(j), p, cfg,
                             envelope, keep_nodes, ride);
  if (keep_nodes) {
    std::vector<OptimalState> head;
    head.reserve(j + res.nodes.size());
    for (std::size_t q = 0; q < j; ++q) head.push_back(at(q));
    head.insert(head.end(), res.nodes.begin(), res.nodes.end());
    res.nodes = std::move(head);
  }
  return res;
}

// Largest lambda_kin the policy still classifies as drive.
inline double DriveCeiling(double lambda_b, const VehicleParams& p) {
  double l = -lambda_b / p.eta_plus;
  while (!(l / lambda_b < -1.0 / p.eta_plus)) {
    l = std::nextafter(l, -kUnbounded);
  }
  return l;
}

// Full-throttle exit from an apex while the grip limit binds the drive force.
// Along this arc the costate equation carries the grip partial, which
// diverges at the closure point; forward integration there is hopelessly
// ill-conditioned, so the state is integrated with the (costate-independent)
// drive control and the costate is recovered backward afterwards.
struct ExitArc {
  std::size_t handover = 0;  // first node where the drive is no longer grip bound
  std::vector<OptimalState> nodes;  // begin..handover, costates unset
};

inline ExitArc DriveExitArc(const AnchoredLap& lap, std::size_t begin,
                            std::size_t end, const VehicleParams& p,
                            const SolverConfig& cfg,
                            const std::vector<double>& envelope) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  const double ds = lap.track.ds;
  auto rate = [&](double kappa, double e) {
    const auto f = Envelope(p, kappa, e, opt);
    const double fm = f.DriveForce();
    return std::array<double, 2>{fm - f.f_d, BatteryPower(p, fm)};
  };
  ExitArc arc;
  OptimalState x;
  x.e_kin = lap.e_kin_jump[begin];
  arc.nodes.push_back(x);
  std::size_t i = begin;
  while (i < end) {
    const auto f = Envelope(p, lap.track.kappa[i], x.e_kin, opt);
    if (i > begin && f.f_grip_plus >= f.f_pt_plus) break;
    const StepCurvature k = CurvatureOfStep(lap.track, i);
    const auto k1 = rate(k.start, x.e_kin);
    const auto k2 = rate(k.mid, x.e_kin + 0.5 * ds * k1[0]);
    const auto k3 = rate(k.mid, x.e_kin + 0.5 * ds * k2[0]);
    const auto k4 = rate(k.end, x.e_kin + ds * k3[0]);
    x.e_kin += ds / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    x.e_b += ds / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    ++i;
    // Stop early when the exit arc runs into the braking envelope or the
    // closure limit; the shot from the handover decides what follows.
    const bool capped = x.e_kin >= envelope[i - begin] ||
                        x.e_kin > lap.e_kin_jump[i] * (1.0 + cfg.tol_apex);
    arc.nodes.push_back(x);
    if (capped) break;
  }
  arc.handover = i;
  return arc;
}

// Backward recovery of lambda_kin along the exit arc from its value at the
// handover node. On the arc d(lambda - theta)/ds = a + b (lambda - theta)
// with theta = -lambda_b/eta_plus; each step is solved exactly with frozen
// coefficients, which stays stable however large b becomes near closure.
inline void FillExitCostate(ExitArc& arc, const AnchoredLap& lap,
                            std::size_t begin, double lambda_handover,
                            double lambda_b, const VehicleParams& p,
                            const SolverConfig& cfg) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  const double theta = -lambda_b / p.eta_plus;
  const double ds = lap.track.ds;
  double delta = lambda_handover - theta;
  const std::size_t n = arc.nodes.size();
  arc.nodes[n - 1].lam = {lambda_handover, lambda_b};
  for (std::size_t k = n - 1; k > 0; --k) {
    const std::size_t i = begin + k - 1;
    // The grip partial is singular at the apex itself; the step adjacent to
    // it takes the apex-node coefficients, which resolves the boundary layer
    // onto the jump condition lambda_kin(s+) = -lambda_b/eta+.
    const double kappa = k == 1 ? lap.track.kappa[i]
                                : 0.5 * (lap.track.kappa[i] + lap.track.kappa[i + 1]);
    const double e = k == 1 ? arc.nodes[0].e_kin
                            : 0.5 * (arc.nodes[k - 1].e_kin + arc.nodes[k].e_kin);
    const auto f = Envelope(p, kappa, e, opt);
    const double t = TimeDensityGradient(p, e);
    const double a = t + theta * f.d_fd_dE;
    const double b = f.d_fd_dE - f.d_fgrip_plus_dE;
    if (std::abs(b * ds) < 1e-12) {
      delta -= a * ds;
    } else {
      delta = (delta + a / b) * std::exp(-b * ds) - a / b;
    }
    // The arc is a drive arc by construction.
    arc.nodes[k - 1].lam = {std::min(theta + delta, DriveCeiling(lambda_b, p)),
                            lambda_b};
  }
  // The apex node carries the jump condition itself; the recovered value
  // differs from it only by the boundary-layer residual.
  arc.nodes[0].lam = {theta, lambda_b};
}

inline bool Violates(const ShotResult& r) {
  return r.outcome == ShotOutcome::kViolation;
}

// Converts integrated nodes into trajectory points with the control,
// phase and multipliers evaluated at each node.
inline std::vector<TrajectoryPoint> Materialize(const AnchoredLap& lap,
                                                std::size_t begin,
                                                const std::vector<OptimalState>& nodes,
                                                const VehicleParams& p,
                                                const SolverConfig& cfg) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  std::vector<TrajectoryPoint> out(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::size_t i = begin + k;
    auto& tp = out[k];
    tp.s = lap.track.s(i);
    tp.kappa = lap.track.kappa[i];
    tp.e_kin = nodes[k].e_kin;
    tp.e_b = nodes[k].e_b;
    tp.lambda_kin = nodes[k].lam.lambda_kin;
    const auto ev = EvaluateOptimal(p, tp.kappa, nodes[k], opt);
    tp.u = ev.policy.u;
    tp.phase = ev.policy.phase;
    tp.mu = ev.mu;
  }
  return out;
}

// Nodes entry..exit of an apex plateau, pinned at the closure limit like the
// apex itself; the costate is that of the exit node and the controls are the
// policy's at the pinned state (zero force once the grip window is closed).
inline std::vector<TrajectoryPoint> HoldPlateau(const AnchoredLap& lap,
                                                std::size_t entry,
                                                std::size_t exit,
                                                const OptimalState& at_exit,
                                                const VehicleParams& p,
                                                const SolverConfig& cfg) {
  const EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  std::vector<TrajectoryPoint> out(exit - entry + 1);
  double e_b = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t i = entry + k;
    auto& tp = out[k];
    tp.s = lap.track.s(i);
    tp.kappa = lap.track.kappa[i];
    tp.e_kin = lap.e_kin_jump[i];
    tp.lambda_kin = at_exit.lam.lambda_kin;
    // Without a battery costate (flat-out and oracle laps) the closed grip
    // window leaves only zero force.
    if (at_exit.lam.lambda_b > 0.0) {
      OptimalState x = at_exit;
      x.e_kin = tp.e_kin;
      const auto ev = EvaluateOptimal(p, tp.kappa, x, opt);
      tp.u = ev.policy.u;
      tp.phase = ev.policy.phase;
      tp.mu = ev.mu;
    }
    tp.e_b = e_b;
    if (k + 1 < out.size()) e_b += BatteryPower(p, tp.u.f_m) * lap.track.ds;
  }
  return out;
}

// Distance where lambda_kin crosses `threshold` upward between two nodes.
inline std::optional<double> ThresholdCrossing(const std::vector<TrajectoryPoint>& pts,
                                               double threshold) {
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k].lambda_kin - threshold;
    const double b = pts[k + 1].lambda_kin - threshold;
    if (a < 0.0 && b >= 0.0) {
      return pts[k].s + (pts[k + 1].s - pts[k].s) * (-a / (b - a));
    }
  }
  return std::nullopt;
}

inline void FillSwitchPoints(SegmentSolution& seg, const VehicleParams& p,
                             double lambda_b) {
  auto first_in = [&](int rank) -> std::optional<std::size_t> {
    for (std::size_t k = seg.apex_nodes; k < seg.points.size(); ++k) {
      if (PhaseRank(seg.points[k].phase) >= rank) return k;
    }
    return std::nullopt;
  };
  // A cue is reported only when the phase is actually entered after a
  // preceding faster phase.
  auto onset = [&](int rank, double threshold) -> std::optional<double> {
    const auto k = first_in(rank);
    if (!k || *k == seg.apex_nodes) return std::nullopt;
    if (PhaseRank(seg.points[*k].phase) != rank) return std::nullopt;
    std::vector<TrajectoryPoint> window(seg.points.begin() + (*k - 1),
                                        seg.points.begin() + (*k + 1));
    auto cross = ThresholdCrossing(window, threshold);
    return cross ? cross : std::optional<double>(seg.points[*k].s);
  };
  seg.coast_onset = onset(1, -lambda_b / p.eta_plus);
  seg.regen_onset = onset(2, -lambda_b * p.eta_minus);
}

// First index where the phase rank decreases, if any.
inline std::optional<std::size_t> PhaseReversal(const std::vector<TrajectoryPoint>& pts,
                                                std::size_t first = 1) {
  int rank = -1;
  for (std::size_t k = first; k < pts.size(); ++k) {
    const int r = PhaseRank(pts[k].phase);
    if (r < rank) return k;
    rank = std::max(rank, r);
  }
  return std::nullopt;
}

// First node where the car is faster than the singular speed of the threshold
// it would have to cross next (drive -> coast, coast -> regen). Above that
// speed the costate drifts away from the threshold instead of crossing it.
inline std::optional<std::pair<std::size_t, int>> SingularSpeedExcess(
    const std::vector<TrajectoryPoint>& pts, double lambda_b,
    const VehicleParams& p, std::size_t first = 1, double rel_tol = 1e-6) {
  for (std::size_t k = first; k < pts.size(); ++k) {
    int idx = -1;
    switch (pts[k].phase) {
      case PolicyPhase::kMaxDrive:
      case PolicyPhase::kGripLimited: idx = 0; break;
      case PolicyPhase::kCoast: idx = 1; break;
      default: continue;
    }
    const auto sing = SingularKineticEnergies(p, pts[k].kappa, lambda_b);
    if (pts[k].e_kin > sing.e_kin_sing[idx] * (1.0 + rel_tol)) {
      return std::make_pair(k, idx);
    }
  }
  return std::nullopt;
}

// Singular-arc diagnosis for a segment: a reversal of the phase order means
// lambda_kin returned across a threshold, i.e. it is hovering at a costate
// equilibrium where the optimum would track E_kin,sing.
inline FeasibilityReport DetectSingularity(const std::vector<TrajectoryPoint>& pts,
                                           double lambda_b,
                                           const VehicleParams& p,
                                           std::size_t segment,
                                           std::size_t apex_nodes = 1,
                                           bool conservative_end_violates = false) {
  FeasibilityReport rep;
  rep.segment = segment;
  std::optional<std::size_t> at = PhaseReversal(pts, apex_nodes);
  std::optional<int> forced;
  if (!at) {
    if (auto ex = SingularSpeedExcess(pts, lambda_b, p, apex_nodes)) {
      at = ex->first;
      forced = ex->second;
    }
  }
  if (!at && !conservative_end_violates) return rep;
  const std::size_t k = at ? *at : (pts.empty() ? 0 : pts.size() - 1);
  const double lk = pts.empty() ? -lambda_b * p.eta_minus : pts[k].lambda_kin;
  const double kappa = pts.empty() ? 0.0 : pts[k].kappa;
  const auto sing = SingularKineticEnergies(p, kappa, lambda_b);
  // The threshold nearest to the costate at the reversal is the tracked one.
  const int idx = forced ? *forced
                         : (std::abs(lk - sing.threshold[0]) <=
                                    std::abs(lk - sing.threshold[1])
                                ? 0
                                : 1);
  rep.singular = true;
  rep.threshold_index = idx;
  rep.threshold = sing.threshold[idx];
  rep.e_kin_sing = sing.e_kin_sing[idx];
  rep.s = pts.empty() ? 0.0 : pts[k].s;
  const char* name = idx == 0 ? "-lambda_b/eta_plus" : "-lambda_b*eta_minus";
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "singular arc at s=%.3f m (segment %zu): costate tracks threshold "
                "%s, E_kin,sing=%.6g J (v=%.3f m/s); %s",
                rep.s, segment, name, rep.e_kin_sing, p.Speed(rep.e_kin_sing),
                kSingularityRemedy);
  rep.message = buf;
  return rep;
}

// Solves the segment between anchored apex slots j and j+1 by bisection.
// Exits that coast or regenerate are parametrised by the post-apex costate
// on [-lambda_b/eta+, -lambda_b*eta-]. Exits under power are parametrised by
// lambda_kin at the end of the grip-bound exit arc, searched downward from
// the drive threshold; the post-apex value then follows by backward
// recovery.
inline SegmentSolution SolveSegment(const AnchoredLap& lap, std::size_t j,
                                    double lambda_b, const VehicleParams& p,
                                    const SolverConfig& cfg) {
  // Along an apex plateau the state is held at the closure limit; the
  // segment is shot from the last plateau node.
  const std::size_t entry = lap.apex_index[j];
  const std::size_t begin = lap.apex_exit[j];
  const std::size_t end = lap.apex_index[j + 1];
  const JumpBracket bracket = JumpBracketFor(lambda_b, p);
  SegmentSolution seg;
  seg.index_start = entry;
  seg.index_end = end;
  seg.s_start = lap.track.s(entry);
  seg.s_end = lap.track.s(end);
  const std::string where = "segment " + std::to_string(j);

  const std::vector<double> envelope = BrakingEnvelope(lap, begin, end, p, cfg);
  auto shoot_post = [&](double lk, bool keep, bool ride = false) {
    ++seg.iterations;
    return ShootSegment(lap, begin, end, lk, lambda_b, p, cfg, envelope, keep,
                        ride);
  };
  auto bisect = [&](double lo, double hi, auto&& shot_at) {
    int iters = 0;
    while (hi - lo > cfg.tol_lambda * lambda_b) {
      if (++iters > cfg.max_iters) {
        throw Error(ErrorKind::kConvergence, where + ": bisection did not converge");
      }
      const double mid = 0.5 * (lo + hi);
      // Adjacent doubles: the tolerance is below the costate's resolution.
      if (!(mid > lo && mid < hi)) break;
      (Violates(shot_at(mid)) ? lo : hi) = mid;
    }
    return std::make_pair(lo, hi);
  };
  auto finish = [&](std::vector<OptimalState> nodes) {
    seg.points = HoldPlateau(lap, entry, begin, nodes.front(), p, cfg);
    seg.apex_nodes = seg.points.size();
    auto shot = Materialize(lap, begin, nodes, p, cfg);
    const double e_b0 = seg.points.back().e_b;
    for (auto& tp : shot) tp.e_b += e_b0;
    seg.points.insert(seg.points.end(), shot.begin() + 1, shot.end());
    seg.lambda_kin_post = seg.points.front().lambda_kin;
    seg.lambda_kin_pre_end = seg.points.back().lambda_kin;
    FillSwitchPoints(seg, p, lambda_b);
    return seg;
  };
  auto not_reached = [&]() {
    return Error(ErrorKind::kConvergence,
                 where + ": converged costate does not reach the next apex");
  };

  if (Violates(shoot_post(bracket.upper, false))) {
    throw Error(ErrorKind::kSingularity,
                where + ": most conservative post-apex costate still overshoots "
                        "the next apex; " + kSingularityRemedy);
  }
  // Smallest post-apex costate the policy classifies as coast.
  double coast_floor = bracket.lower;
  while (coast_floor / lambda_b < -1.0 / p.eta_plus) {
    coast_floor = std::nextafter(coast_floor, kUnbounded);
  }
  if (Violates(shoot_post(coast_floor, false))) {
    auto [lo, hi] = bisect(coast_floor, bracket.upper, [&](double lk) {
      return shoot_post(lk, false);
    });
    // The aggressive side joins the envelope with lambda_kin just below
    // zero; it is followed from there to the apex.
    auto shot = shoot_post(lo, true, true);
    if (shot.outcome != ShotOutcome::kReached) shot = shoot_post(hi, true, true);
    if (shot.outcome != ShotOutcome::kReached) throw not_reached();
    return finish(std::move(shot.nodes));
  }

  // Exit under power.
  seg.drive_exit = true;
  ExitArc arc = DriveExitArc(lap, begin, end, p, cfg, envelope);
  const double ceiling = DriveCeiling(lambda_b, p);
  const DriveRun run = FullThrottleRun(lap, begin, arc.handover, end,
                                       arc.nodes.back(), lambda_b, p, cfg,
                                       envelope);
  auto shoot_handover = [&](double lk, bool keep, bool ride = false) {
    ++seg.iterations;
    return ShootFromRun(lap, begin, end, run, lk, lambda_b, p, cfg, envelope,
                        keep, ride);
  };
  double lo = ceiling;
  double hi = ceiling;
  if (arc.handover < end && !Violates(shoot_handover(ceiling, false))) {
    // The needed depth is set by the time-density term, not by lambda_b, so
    // growth is bounded only by the iteration budget.
    double width = 1e-3 * lambda_b;
    bool found = false;
    for (int k = 0; k < cfg.max_iters; ++k) {
      const double trial = ceiling - width;
      if (Violates(shoot_handover(trial, false))) {
        lo = trial;
        found = true;
        break;
      }
      hi = trial;
      width *= 4.0;
    }
    if (found) {
      std::tie(lo, hi) = bisect(lo, hi, [&](double lk) {
        return shoot_handover(lk, false);
      });
    } else {
      // Full throttle all the way is feasible.
      seg.flat_out = true;
      lo = hi;
    }
  }
  auto shot = shoot_handover(lo, true, true);
  double handover_lambda = lo;
  if (shot.outcome != ShotOutcome::kReached) {
    shot = shoot_handover(hi, true, true);
    handover_lambda = hi;
  }
  if (shot.outcome != ShotOutcome::kReached) throw not_reached();
  FillExitCostate(arc, lap, begin, handover_lambda, lambda_b, p, cfg);
  std::vector<OptimalState> nodes(arc.nodes.begin(), arc.nodes.end() - 1);
  nodes.insert(nodes.end(), shot.nodes.begin(), shot.nodes.end());
  return finish(std::move(nodes));
}

inline void FinalizeLap(LapSolution& sol, const AnchoredLap& lap,
                        const VehicleParams& p) {
  const auto traj = sol.Trajectory();
  sol.t_lap = LapTime(traj, lap.track.ds, p);
  sol.delta_e_b = 0.0;
  for (const auto& seg : sol.segments) {
    sol.delta_e_b += seg.points.back().e_b - seg.points.front().e_b;
  }
  sol.lap_length = lap.track.length();
  sol.s_anchor = lap.track.s0;
  if (!sol.segments.empty()) {
    sol.lambda_kin_open_post = sol.segments.front().lambda_kin_post;
    sol.lambda_kin_close_pre = sol.segments.back().points.back().lambda_kin;
  }
  sol.cues.clear();
  for (const auto& seg : sol.segments) {
    if (seg.coast_onset) sol.cues.push_back({*seg.coast_onset, CueType::kCoast});
    if (seg.regen_onset) sol.cues.push_back({*seg.regen_onset, CueType::kRegen});
  }
}

// Solves the lap for a fixed battery costate (energy budget not enforced).
inline LapSolution SolveLap(double lambda_b, const AnchoredLap& lap,
                            const VehicleParams& p, const SolverConfig& cfg) {
  detail::RequirePositiveLambdaB(lambda_b);
  LapSolution sol;
  sol.lambda_b = lambda_b;
  for (std::size_t j = 0; j + 1 < lap.apex_index.size(); ++j) {
    try {
      sol.segments.push_back(SolveSegment(lap, j, lambda_b, p, cfg));
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("segment ") + std::to_string(j) + ": " + e.what());
    }
    const auto& seg = sol.segments.back();
    auto rep = DetectSingularity(seg.points, lambda_b, p, j, seg.apex_nodes);
    if (rep.singular) sol.warnings.push_back(rep);
  }
  FinalizeLap(sol, lap, p);
  return sol;
}

inline LapSolution SolveLap(double lambda_b, const TrackProfile& t,
                            const VehicleParams& p, const SolverConfig& cfg) {
  return SolveLap(lambda_b, AnchorLap(p, t), p, cfg);
}

// Minimum-time reference (lambda_b -> 0+): maximal drive everywhere except
// on the latest possible grip-limited braking arcs into each apex. Computed
// with a forward pass under full drive and backward passes under full
// braking from every apex, each RK4-integrated on the grid.
inline LapSolution FlatOutLap(const AnchoredLap& lap, const VehicleParams& p,
                              const SolverConfig& cfg) {
  EnvelopeOptions opt = IntegrationEnvelopeOptions(cfg);
  const auto& t = lap.track;
  const std::size_t n = t.LapPoints();
  const double ds = t.ds;

  // dE/ds under full braking is F_grip- - F_d (friction tops up regen to
  // the grip floor).
  auto brake_rate = [&](double kappa, double e) {
    const auto env = Envelope(p, kappa, e, opt);
    return env.f_grip_minus - env.f_d;
  };
  auto drive_rate = [&](double kappa, double e) {
    const auto env = Envelope(p, kappa, e, opt);
    return env.DriveForce() - env.f_d;
  };
  auto rk4 = [&](auto&& rate, double e, double k0, double km, double k1, double h) {
    const double a = rate(k0, e);
    const double b = rate(km, std::max(e + 0.5 * h * a, 1e-9));
    const double c = rate(km, std::max(e + 0.5 * h * b, 1e-9));
    const double d = rate(k1, std::max(e + h * c, 1e-9));
    return e + h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
  };

  std::vector<double> fwd(n + 1, kUnbounded);
  std::vector<double> bwd(n + 1, kUnbounded);
  for (std::size_t a : lap.apex_index) bwd[a] = lap.e_kin_jump[a];
  // Backward braking envelope, swept twice around the lap for wrap-around.
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (std::size_t i = n; i-- > 0;) {
      const auto k = CurvatureOfStep(t, i);
      double cand = bwd[i + 1];
      if (std::isfinite(cand)) {
        cand = rk4(brake_rate, cand, k.end, k.mid, k.start, -ds);
      }
      bwd[i] = std::min({bwd[i], cand, lap.e_kin_jump[i]});
    }
    bwd[n] = std::min(bwd[n], bwd[0]);
    bwd[0] = bwd[n];
  }
  // Apex plateaus are held at the closure limit, as in the lap solver.
  std::vector<bool> plateau(n + 1, false);
  for (std::size_t j = 0; j < lap.apex_exit.size(); ++j) {
    for (std::size_t i = lap.apex_index[j]; i <= lap.apex_exit[j]; ++i) {
      plateau[i] = true;
    }
  }
  fwd[0] = lap.e_kin_jump[0];
  std::vector<int> braking(n + 1, 0);
  std::vector<double> e(n + 1);
  e[0] = std::min(fwd[0], bwd[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = CurvatureOfStep(t, i);
    double next = rk4(drive_rate, e[i], k.start, k.mid, k.end, ds);
    if (plateau[i + 1]) next = lap.e_kin_jump[i + 1];
    if (next <= bwd[i + 1]) {
      e[i + 1] = std::min(next, lap.e_kin_jump[i + 1]);
    } else {
      e[i + 1] = bwd[i + 1];
      braking[i + 1] = 1;
    }
  }

  LapSolution sol;
  sol.lambda_b = 0.0;
  SegmentSolution seg;
  seg.index_start = 0;
  seg.index_end = n;
  seg.s_start = t.s(0);
  seg.s_end = t.s(n);
  seg.flat_out = true;
  seg.points.resize(n + 1);
  double e_b = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    auto& tp = seg.points[i];
    tp.s = t.s(i);
    tp.kappa = t.kappa[i];
    tp.e_kin = e[i];
    const auto env = Envelope(p, tp.kappa, tp.e_kin, opt);
    // Braking node: next node sits on the braking envelope.
    const bool brk = i < n && braking[i + 1];
    if (brk) {
      tp.u.f_m = env.RegenForce();
      tp.u.f_brk = tp.u.f_m - env.f_grip_minus;
      tp.phase = PolicyPhase::kBrakeSupplement;
    } else {
      tp.u.f_m = env.DriveForce();
      tp.phase = env.f_grip_plus < env.f_pt_plus ? PolicyPhase::kGripLimited
                                                 : PolicyPhase::kMaxDrive;
    }
    if (i > 0) {
      const auto& prev = seg.points[i - 1];
      e_b += 0.5 * ds * (BatteryPower(p, prev.u.f_m) + BatteryPower(p, tp.u.f_m));
    }
    tp.e_b = e_b;
  }
  sol.segments.push_back(std::move(seg));
  FinalizeLap(sol, lap, p);
  sol.cues.clear();
  return sol;
}

// Energy-limited lap: searches lambda_b so the lap consumes the budget.
inline LapSolution SolveEnergyLimited(double budget, const TrackProfile& t,
                                      const VehicleParams& p,
                                      const SolverConfig& cfg) {
  p.Validate();
  const AnchoredLap lap = AnchorLap(p, t);
  const double floor = p.F_b0 * lap.track.length();
  if (!(budget > floor)) {
    throw Error(ErrorKind::kInfeasibleBudget,
                "budget " + std::to_string(budget) +
                    " J does not exceed the auxiliary floor " +
                    std::to_string(floor) + " J");
  }
  LapSolution flat = FlatOutLap(lap, p, cfg);
  flat.budget = budget;
  flat.budget_set = true;
  if (flat.delta_e_b <= budget) {
    flat.energy_constraint_active = false;
    return flat;
  }

  // A segment whose most conservative costate still overshoots is reported
  // like a singular lap: an upper end for the search, without a trajectory.
  auto solve = [&](double lb) {
    try {
      return SolveLap(lb, lap, p, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSingularity) throw;
      LapSolution s;
      s.lambda_b = lb;
      s.delta_e_b = std::numeric_limits<double>::quiet_NaN();
      FeasibilityReport rep;
      rep.singular = true;
      rep.message = e.what();
      s.warnings.push_back(rep);
      return s;
    }
  };
  auto fits = [&](const LapSolution& s) { return s.delta_e_b <= budget; };
  auto close_enough = [&](const LapSolution& s) {
    return std::abs(s.delta_e_b - budget) <= cfg.tol_energy * budget;
  };
  auto singular = [](const LapSolution& s) { return !s.warnings.empty(); };
  auto finish = [&](LapSolution s) {
    s.budget = budget;
    s.budget_set = true;
    s.energy_constraint_active = true;
    return s;
  };

  // consumption(lo) > budget; hi either fits or is singular. Singular
  // solutions mark the end of the range the bang-bang policy can represent,
  // so the search stays below them. Trial points come from Illinois false
  // position on consumption against lambda_b, and from secant extrapolation
  // (starting from the flat-out lap at lambda_b = 0) while no upper end is
  // known.
  double lo = 0.0, lo_use = flat.delta_e_b;
  double hi = 0.0, hi_use = 0.0;
  std::optional<LapSolution> hi_sol;
  LapSolution lo_sol = flat;
  int side = 0;
  double x = cfg.lambda_b_initial;
  double prev_x = 0.0, prev_use = flat.delta_e_b;
  for (int k = 0; k < cfg.max_iters; ++k) {
    LapSolution s = solve(x);
    if (!singular(s) && close_enough(s)) return finish(std::move(s));
    const double use = s.delta_e_b;
    if (singular(s) || fits(s)) {
      hi = x;
      hi_use = use;
      hi_sol = std::move(s);
      if (side == 1) lo_use = budget + 0.5 * (lo_use - budget);
      side = 1;
    } else {
      lo = x;
      lo_use = use;
      lo_sol = std::move(s);
      if (side == -1 && hi_sol) hi_use = budget + 0.5 * (hi_use - budget);
      side = -1;
    }
    if (hi_sol && hi - lo <= 1e-3 * hi && singular(*hi_sol)) break;
    if (hi_sol && hi - lo <= cfg.tol_lambda * hi) break;
    double next = 0.0;
    if (!hi_sol) {
      // Still too expensive: extrapolate the secant, aiming slightly past
      // the budget so the next trial brackets it.
      next = x * cfg.lambda_b_growth;
      if (prev_use > use) {
        const double guess = x + (use - budget) * (x - prev_x) / (prev_use - use);
        next = std::clamp(guess * 1.02, x * 1.05, x * 16.0);
      }
    } else if (singular(*hi_sol)) {
      next = lo == 0.0 ? hi / cfg.lambda_b_growth : std::sqrt(lo * hi);
    } else {
      // Consumption is close to linear in lambda_b.
      const double t = (lo_use - budget) / (lo_use - hi_use);
      next = lo + std::clamp(t, 0.02, 0.98) * (hi - lo);
    }
    prev_x = x;
    prev_use = use;
    x = next;
  }
  if (!hi_sol) {
    throw Error(ErrorKind::kConvergence, "could not bracket lambda_b for the budget");
  }
  if (singular(*hi_sol)) {
    // The budget needs a singular tracking arc; return the boundary solution
    // together with its feasibility warnings, or the last regular solution
    // carrying them when the boundary lap has no trajectory.
    if (!hi_sol->segments.empty()) return finish(std::move(*hi_sol));
    for (auto& w : hi_sol->warnings) lo_sol.warnings.push_back(w);
    return finish(std::move(lo_sol));
  }
  if (!close_enough(*hi_sol)) {
    throw Error(ErrorKind::kConvergence, "lambda_b search did not meet the budget tolerance");
  }
  return finish(std::move(*hi_sol));
}

}  // namespace lapcue
