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

// Longitudinal vehicle model in the distance domain with kinetic energy as
// the state. Every force is an explicit function of curvature and E_kin:
//
//   F_z    = c_l A rho E/m + m g
//   F_d    = c_d A rho E/m + c_kappa |kappa| E + c_r F_z
//   F_y    = 2 kappa E
//   F_grip = +/- mu_x sqrt(F_z^2 - (F_y/mu_y)^2)
//   F_pt   = P_pt / sqrt(2 E/m)
//
// Units are SI throughout.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <utility>

#include "lapcue/error.hpp"

namespace lapcue {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

inline bool IsBounded(double e_kin_limit) { return std::isfinite(e_kin_limit); }

struct VehicleParams {
  double m = 800.0;          // kg
  double c_d = 0.8;          // -
  double A = 1.2;            // m^2
  double rho = 1.2;          // kg/m^3
  double c_kappa = 0.02;     // multiplies |kappa| E_kin
  double c_r = 0.012;        // -
  double c_l = 2.0;          // -
  double g = 9.81;           // m/s^2
  double mu_x = 1.6;         // -
  double mu_y = 1.6;         // -
  double P_pt_plus = 150e3;  // W
  double P_pt_minus = -120e3;  // W, <= 0
  double eta_plus = 0.92;
  double eta_minus = 0.85;
  double F_b0 = 20.0;  // J/m

  // Aerodynamic coefficient groups, 1/m.
  double DragPerEnergy() const { return c_d * A * rho / m; }
  double DownforcePerEnergy() const { return c_l * A * rho / m; }

  double Speed(double e_kin) const { return std::sqrt(2.0 * e_kin / m); }
  double KineticEnergy(double v) const { return 0.5 * m * v * v; }

  // Throws Error(kDomain) listing the first violated invariant.
  void Validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorKind::kDomain, "invalid vehicle parameters: " + what);
    };
    auto finite = [](double x) { return std::isfinite(x); };
    for (double x : {m, c_d, A, rho, c_kappa, c_r, c_l, g, mu_x, mu_y,
                     P_pt_plus, P_pt_minus, eta_plus, eta_minus, F_b0}) {
      if (!finite(x)) fail("non-finite value");
    }
    if (!(m > 0)) fail("m must be > 0");
    if (!(g > 0)) fail("g must be > 0");
    if (!(rho > 0)) fail("rho must be > 0");
    if (!(A > 0)) fail("A must be > 0");
    if (!(eta_plus > 0 && eta_plus <= 1)) fail("eta_plus must be in (0,1]");
    if (!(eta_minus > 0 && eta_minus <= 1)) fail("eta_minus must be in (0,1]");
    if (!(eta_minus < 1.0 / eta_plus)) fail("eta_minus must be < 1/eta_plus");
    if (!(P_pt_plus > 0)) fail("P_pt_plus must be > 0");
    if (!(P_pt_minus <= 0)) fail("P_pt_minus must be <= 0");
    if (!(mu_x > 0) || !(mu_y > 0)) fail("grip coefficients must be > 0");
    if (c_l < 0 || c_d < 0 || c_r < 0 || c_kappa < 0 || F_b0 < 0) {
      fail("resistance coefficients and F_b0 must be >= 0");
    }
  }
};

namespace detail {
inline void RequireNonNegative(double e_kin) {
  if (!(e_kin >= 0.0)) {
    throw Error(ErrorKind::kDomain, "kinetic energy must be >= 0, got " +
                                        std::to_string(e_kin));
  }
}
}  // namespace detail

inline double VerticalForce(const VehicleParams& p, double e_kin) {
  detail::RequireNonNegative(e_kin);
  return p.DownforcePerEnergy() * e_kin + p.m * p.g;
}

inline double DragForce(const VehicleParams& p, double kappa, double e_kin) {
  detail::RequireNonNegative(e_kin);
  return p.DragPerEnergy() * e_kin + p.c_kappa * std::abs(kappa) * e_kin +
         p.c_r * VerticalForce(p, e_kin);
}

inline double LateralForce(double kappa, double e_kin) {
  detail::RequireNonNegative(e_kin);
  return 2.0 * kappa * e_kin;
}

// Largest kinetic energy at which the friction ellipse still admits a
// longitudinal force; kUnbounded when downforce outgrows the lateral demand.
inline double EKinJump(const VehicleParams& p, double kappa) {
  const double den = 2.0 * std::abs(kappa) / p.mu_y - p.DownforcePerEnergy();
  if (den > 0.0) return p.m * p.g / den;
  return kUnbounded;
}

// Friction-ellipse radicand F_z^2 - (F_y/mu_y)^2.
inline double GripRadicand(const VehicleParams& p, double kappa,
                           double e_kin) {
  const double fz = VerticalForce(p, e_kin);
  const double fy = LateralForce(kappa, e_kin) / p.mu_y;
  return (fz - fy) * (fz + fy);
}

// Returns (f_grip_plus, f_grip_minus). Radicand round-off at the closure
// point below `slack`·F_z^2 is treated as zero.
inline std::pair<double, double> GripLimits(const VehicleParams& p,
                                            double kappa, double e_kin,
                                            double slack = 1e-12) {
  const double r = GripRadicand(p, kappa, e_kin);
  if (r < 0.0) {
    const double fz = VerticalForce(p, e_kin);
    if (r < -slack * fz * fz) {
      throw Error(ErrorKind::kInfeasibleSpeed,
                  "kinetic energy " + std::to_string(e_kin) +
                      " J exceeds grip closure limit at curvature " +
                      std::to_string(kappa));
    }
    return {0.0, -0.0};
  }
  const double f = p.mu_x * std::sqrt(r);
  return {f, -f};
}

inline std::pair<double, double> PowertrainLimits(const VehicleParams& p,
                                                  double e_kin) {
  if (!(e_kin > 0.0)) {
    throw Error(ErrorKind::kDomain,
                "powertrain force is unbounded at zero kinetic energy");
  }
  const double v = p.Speed(e_kin);
  return {p.P_pt_plus / v, p.P_pt_minus / v};
}

struct ForceEnvelope {
  double kappa = 0.0;
  double e_kin = 0.0;
  double f_d = 0.0;
  double f_z = 0.0;
  double f_y = 0.0;
  double f_grip_plus = 0.0;
  double f_grip_minus = 0.0;
  double f_pt_plus = 0.0;
  double f_pt_minus = 0.0;
  double e_kin_jump = kUnbounded;
  double d_fd_dE = 0.0;
  double d_fgrip_plus_dE = 0.0;
  double d_fgrip_minus_dE = 0.0;
  double d_fpt_plus_dE = 0.0;
  double d_fpt_minus_dE = 0.0;

  double DriveForce() const { return std::min(f_pt_plus, f_grip_plus); }
  double RegenForce() const { return std::max(f_pt_minus, f_grip_minus); }
};

struct EnvelopeOptions {
  // Below this speed the powertrain limits are frozen at P/v_min.
  double v_min = 5.0;
  // Relative radicand tolerance accepted at the closure point.
  double grip_slack = 1e-12;
  // The grip partials diverge like 1/sqrt(radicand) at closure; the
  // radicand used for them is floored at this fraction of F_z^2.
  double radicand_floor = 1e-6;
};

inline ForceEnvelope Envelope(const VehicleParams& p, double kappa,
                              double e_kin, const EnvelopeOptions& opt = {}) {
  if (!(e_kin > 0.0)) {
    throw Error(ErrorKind::kDomain, "envelope requires e_kin > 0");
  }
  ForceEnvelope env;
  env.kappa = kappa;
  env.e_kin = e_kin;
  env.f_z = VerticalForce(p, e_kin);
  env.f_d = DragForce(p, kappa, e_kin);
  env.f_y = LateralForce(kappa, e_kin);
  env.e_kin_jump = EKinJump(p, kappa);
  std::tie(env.f_grip_plus, env.f_grip_minus) =
      GripLimits(p, kappa, e_kin, opt.grip_slack);

  const double a_l = p.DownforcePerEnergy();
  env.d_fd_dE = p.DragPerEnergy() + p.c_kappa * std::abs(kappa) + p.c_r * a_l;

  const double ky = 2.0 * kappa / p.mu_y;
  const double d_radicand = 2.0 * env.f_z * a_l - 2.0 * ky * ky * e_kin;
  const double radicand = std::max(GripRadicand(p, kappa, e_kin),
                                   opt.radicand_floor * env.f_z * env.f_z);
  env.d_fgrip_plus_dE = p.mu_x * d_radicand / (2.0 * std::sqrt(radicand));
  env.d_fgrip_minus_dE = -env.d_fgrip_plus_dE;

  const double v = p.Speed(e_kin);
  if (v > opt.v_min) {
    env.f_pt_plus = p.P_pt_plus / v;
    env.f_pt_minus = p.P_pt_minus / v;
    env.d_fpt_plus_dE = -env.f_pt_plus / (2.0 * e_kin);
    env.d_fpt_minus_dE = -env.f_pt_minus / (2.0 * e_kin);
  } else {
    env.f_pt_plus = p.P_pt_plus / opt.v_min;
    env.f_pt_minus = p.P_pt_minus / opt.v_min;
  }
  return env;
}

}  // namespace lapcue
