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

// Minimum-principle analytics for the energy-limited lap problem: the
// Hamiltonian, its costate dynamics, the bang-bang policy in the costate
// ratio lambda_kin/lambda_b, the constraint multipliers that close the KKT
// system, and the singular speeds at the policy thresholds.
//
// Hamiltonian (constraints written as c <= 0 with multipliers mu >= 0):
//
//   H = 1/v + lambda_kin (F_m - F_brk - F_d) + lambda_b dE_b/ds
//       + mu_grip+ (F_m - F_brk - F_grip+) - mu_grip- (F_m - F_brk - F_grip-)
//       + mu_pt+ (F_m - F_pt+) - mu_pt- (F_m - F_pt-) - mu_brk F_brk

#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "lapcue/error.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue {

struct VehicleState {
  double e_kin = 0.0;  // J
  double e_b = 0.0;    // J
};

struct Costates {
  double lambda_kin = 0.0;  // s/J
  double lambda_b = 0.0;    // s/J

  double Ratio() const { return lambda_kin / lambda_b; }
};

struct ControlInput {
  double f_m = 0.0;    // N
  double f_brk = 0.0;  // N

  double Net() const { return f_m - f_brk; }
};

enum class PolicyPhase { kMaxDrive, kCoast, kMaxRegen, kBrakeSupplement, kGripLimited };

inline std::string_view ToString(PolicyPhase phase) {
  switch (phase) {
    case PolicyPhase::kMaxDrive: return "MaxDrive";
    case PolicyPhase::kCoast: return "Coast";
    case PolicyPhase::kMaxRegen: return "MaxRegen";
    case PolicyPhase::kBrakeSupplement: return "BrakeSupplement";
    case PolicyPhase::kGripLimited: return "GripLimited";
  }
  return "?";
}

// Position of a phase in the drive -> coast -> regen -> brake sequence.
inline int PhaseRank(PolicyPhase phase) {
  switch (phase) {
    case PolicyPhase::kMaxDrive:
    case PolicyPhase::kGripLimited: return 0;
    case PolicyPhase::kCoast: return 1;
    case PolicyPhase::kMaxRegen: return 2;
    case PolicyPhase::kBrakeSupplement: return 3;
  }
  return -1;
}

struct Multipliers {
  double mu_grip_plus = 0.0;
  double mu_grip_minus = 0.0;
  double mu_pt_plus = 0.0;
  double mu_pt_minus = 0.0;
  double mu_brk = 0.0;
};

struct PolicyOutput {
  ControlInput u;
  PolicyPhase phase = PolicyPhase::kCoast;
};

namespace detail {
inline void RequirePositiveLambdaB(double lambda_b) {
  if (!(lambda_b > 0.0)) {
    throw Error(ErrorKind::kDomain, "battery costate must be > 0");
  }
}
}  // namespace detail

// Bang-bang policy. Threshold ties: ratio == -1/eta+ coasts, ratio == -eta-
// regenerates, lambda_kin == 0 applies no friction brake.
inline PolicyOutput ControlPolicy(const ForceEnvelope& env, const Costates& lam,
                                  const VehicleParams& p) {
  detail::RequirePositiveLambdaB(lam.lambda_b);
  const double r = lam.Ratio();
  PolicyOutput out;
  if (r < -1.0 / p.eta_plus) {
    out.u.f_m = env.DriveForce();
    out.phase = env.f_grip_plus < env.f_pt_plus ? PolicyPhase::kGripLimited
                                                : PolicyPhase::kMaxDrive;
  } else if (r < -p.eta_minus) {
    out.phase = PolicyPhase::kCoast;
  } else {
    out.u.f_m = env.RegenForce();
    if (lam.lambda_kin > 0.0) {
      out.u.f_brk = out.u.f_m - env.f_grip_minus;
      out.phase = PolicyPhase::kBrakeSupplement;
    } else {
      out.phase = PolicyPhase::kMaxRegen;
    }
  }
  return out;
}

// Multipliers consistent with ControlPolicy. In the regen band with the
// powertrain bound active, mu_pt- takes the stationarity-consistent value
// lambda_kin + lambda_b eta-, which is nonnegative there.
inline Multipliers ConstraintMultipliers(const ForceEnvelope& env,
                                         const Costates& lam,
                                         const VehicleParams& p) {
  detail::RequirePositiveLambdaB(lam.lambda_b);
  const double lk = lam.lambda_kin;
  const double lb = lam.lambda_b;
  const double r = lam.Ratio();
  Multipliers mu;
  if (r < -1.0 / p.eta_plus) {
    const double excess = -(lk + lb / p.eta_plus);
    if (env.f_grip_plus < env.f_pt_plus) {
      mu.mu_grip_plus = excess;
      mu.mu_brk = lb / p.eta_plus;
    } else {
      mu.mu_pt_plus = excess;
      mu.mu_brk = -lk;
    }
  } else if (r < -p.eta_minus) {
    mu.mu_brk = -lk;
  } else if (lk <= 0.0) {
    if (env.f_grip_minus > env.f_pt_minus) {
      mu.mu_grip_minus = lk + lb * p.eta_minus;
      mu.mu_brk = lb * p.eta_minus;
    } else {
      mu.mu_pt_minus = lk + lb * p.eta_minus;
      mu.mu_brk = -lk;
    }
  } else {
    if (env.f_grip_minus > env.f_pt_minus) {
      mu.mu_grip_minus = lk + lb * p.eta_minus;
      mu.mu_brk = lb * p.eta_minus;
    } else {
      mu.mu_grip_minus = lk;
      mu.mu_pt_minus = lb * p.eta_minus;
    }
  }
  return mu;
}

struct StateDerivatives {
  double d_e_kin = 0.0;  // J/m
  double d_e_b = 0.0;    // J/m
};

inline double BatteryPower(const VehicleParams& p, double f_m) {
  return (f_m >= 0.0 ? f_m / p.eta_plus : f_m * p.eta_minus) + p.F_b0;
}

inline StateDerivatives StateDerivativesOf(const ForceEnvelope& env,
                                           const ControlInput& u,
                                           const VehicleParams& p,
                                           double tol = 1e-9) {
  const double scale = tol * (1.0 + std::abs(env.f_pt_plus) +
                              std::abs(env.f_grip_plus) + std::abs(u.f_m));
  const bool feasible = u.f_brk >= -scale && u.f_m <= env.f_pt_plus + scale &&
                        u.f_m >= env.f_pt_minus - scale &&
                        u.Net() <= env.f_grip_plus + scale &&
                        u.Net() >= env.f_grip_minus - scale;
  if (!feasible) {
    throw Error(ErrorKind::kContract, "control input outside force envelope");
  }
  return {u.Net() - env.f_d, BatteryPower(p, u.f_m)};
}

// Pure time-sensitivity term d(1/v)/dE_kin, negated.
inline double TimeDensityGradient(const VehicleParams& p, double e_kin) {
  const double v = p.Speed(e_kin);
  return 1.0 / (v * v * v * p.m);
}

// d lambda_kin / ds = -dH/dE_kin. d lambda_b / ds is identically zero.
inline double CostateDerivative(const ForceEnvelope& env, const Costates& lam,
                                const Multipliers& mu, const VehicleParams& p) {
  if (!(env.e_kin > 0.0)) {
    throw Error(ErrorKind::kDomain, "costate derivative requires e_kin > 0");
  }
  double d = TimeDensityGradient(p, env.e_kin) + lam.lambda_kin * env.d_fd_dE;
  // Inactive multipliers are skipped so a diverging grip partial at the
  // closure point never produces 0 * inf.
  if (mu.mu_grip_plus != 0.0) d += mu.mu_grip_plus * env.d_fgrip_plus_dE;
  if (mu.mu_grip_minus != 0.0) d -= mu.mu_grip_minus * env.d_fgrip_minus_dE;
  if (mu.mu_pt_plus != 0.0) d += mu.mu_pt_plus * env.d_fpt_plus_dE;
  if (mu.mu_pt_minus != 0.0) d -= mu.mu_pt_minus * env.d_fpt_minus_dE;
  return d;
}

// Within a fixed policy phase the costate equation is affine in lambda_kin,
// d lambda/ds = a + b lambda. Returns (a, b) for the phase selected at `lam`.
struct CostateLinearization {
  double a = 0.0;
  double b = 0.0;
};

inline CostateLinearization LinearizeCostate(const ForceEnvelope& env,
                                             const Costates& lam,
                                             const VehicleParams& p) {
  detail::RequirePositiveLambdaB(lam.lambda_b);
  const double t = TimeDensityGradient(p, env.e_kin);
  const double c = env.d_fd_dE;
  const double drive = -lam.lambda_b / p.eta_plus;
  const double regen = -lam.lambda_b * p.eta_minus;
  const double r = lam.Ratio();
  const bool grip_drive = env.f_grip_plus < env.f_pt_plus;
  const bool grip_regen = env.f_grip_minus > env.f_pt_minus;
  if (r < -1.0 / p.eta_plus) {
    const double d = grip_drive ? env.d_fgrip_plus_dE : env.d_fpt_plus_dE;
    return {t + drive * d, c - d};
  }
  if (r < -p.eta_minus) return {t, c};
  if (lam.lambda_kin <= 0.0 || grip_regen) {
    const double d = grip_regen ? env.d_fgrip_minus_dE : env.d_fpt_minus_dE;
    return {t + regen * d, c - d};
  }
  return {t + regen * env.d_fpt_minus_dE, c - env.d_fgrip_minus_dE};
}

inline constexpr double BatteryCostateDerivative() { return 0.0; }

inline double Hamiltonian(const VehicleState& x, const ControlInput& u,
                          const Costates& lam, const Multipliers& mu,
                          const ForceEnvelope& env, const VehicleParams& p) {
  const double net = u.Net();
  return 1.0 / p.Speed(x.e_kin) + lam.lambda_kin * (net - env.f_d) +
         lam.lambda_b * BatteryPower(p, u.f_m) +
         mu.mu_grip_plus * (net - env.f_grip_plus) -
         mu.mu_grip_minus * (net - env.f_grip_minus) +
         mu.mu_pt_plus * (u.f_m - env.f_pt_plus) -
         mu.mu_pt_minus * (u.f_m - env.f_pt_minus) - mu.mu_brk * u.f_brk;
}

struct StationarityResiduals {
  // Distance of 0 from dH/dF_m (the subdifferential at the F_m = 0 kink).
  double r_fm = 0.0;
  double r_fbrk = 0.0;
};

inline StationarityResiduals Stationarity(const ControlInput& u,
                                          const Costates& lam,
                                          const Multipliers& mu,
                                          const VehicleParams& p) {
  const double coupling = mu.mu_grip_plus - mu.mu_grip_minus + mu.mu_pt_plus -
                          mu.mu_pt_minus;
  const double hi = lam.lambda_kin + lam.lambda_b / p.eta_plus + coupling;
  const double lo = lam.lambda_kin + lam.lambda_b * p.eta_minus + coupling;
  StationarityResiduals res;
  if (u.f_m > 0.0) {
    res.r_fm = hi;
  } else if (u.f_m < 0.0) {
    res.r_fm = lo;
  } else if (lo > 0.0) {
    res.r_fm = lo;
  } else if (hi < 0.0) {
    res.r_fm = hi;
  }
  res.r_fbrk = -lam.lambda_kin - mu.mu_grip_plus + mu.mu_grip_minus - mu.mu_brk;
  return res;
}

// Complementary-slackness products, one per inequality constraint.
inline std::array<double, 5> ComplementarityProducts(const ControlInput& u,
                                                     const Multipliers& mu,
                                                     const ForceEnvelope& env) {
  const double net = u.Net();
  return {mu.mu_grip_plus * (net - env.f_grip_plus),
          mu.mu_grip_minus * (-net + env.f_grip_minus),
          mu.mu_pt_plus * (u.f_m - env.f_pt_plus),
          mu.mu_pt_minus * (-u.f_m + env.f_pt_minus),
          mu.mu_brk * (-u.f_brk)};
}

struct SingularSpeeds {
  // Thresholds -lambda_b/eta+, -lambda_b eta-, 0.
  std::array<double, 3> threshold{};
  std::array<double, 3> e_kin_sing{};
};

// Kinetic energy at which d lambda_kin/ds vanishes on a free arc with
// lambda_kin sitting on a threshold theta.
inline double SingularKineticEnergy(const VehicleParams& p, double kappa,
                                    double theta) {
  if (theta == 0.0) return kUnbounded;
  const double d_fd = p.DragPerEnergy() + p.c_kappa * std::abs(kappa) +
                      p.c_r * p.DownforcePerEnergy();
  return 0.5 * p.m * std::pow(-d_fd * p.m * theta, -2.0 / 3.0);
}

inline SingularSpeeds SingularKineticEnergies(const VehicleParams& p,
                                              double kappa, double lambda_b) {
  detail::RequirePositiveLambdaB(lambda_b);
  SingularSpeeds out;
  out.threshold = {-lambda_b / p.eta_plus, -lambda_b * p.eta_minus, 0.0};
  for (int i = 0; i < 3; ++i) {
    out.e_kin_sing[i] = SingularKineticEnergy(p, kappa, out.threshold[i]);
  }
  return out;
}

struct JumpBracket {
  double lower = 0.0;  // most aggressive post-apex costate
  double upper = 0.0;  // most conservative post-apex costate
};

inline JumpBracket JumpBracketFor(double lambda_b, const VehicleParams& p) {
  detail::RequirePositiveLambdaB(lambda_b);
  return {-lambda_b / p.eta_plus, -lambda_b * p.eta_minus};
}

}  // namespace lapcue
