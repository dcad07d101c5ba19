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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lapcue/vehicle.hpp"
#include "support.hpp"

namespace lapcue {
namespace {

TEST(DragForce, PureRollingResistanceAtRest) {
  VehicleParams p;
  EXPECT_DOUBLE_EQ(DragForce(p, 0.03, 0.0), p.c_r * p.m * p.g);
}

TEST(DragForce, PureAirDragWithoutRollingAndDownforce) {
  VehicleParams p;
  p.c_r = 0.0;
  p.c_l = 0.0;
  EXPECT_DOUBLE_EQ(DragForce(p, 0.0, 5e5), p.c_d * p.A * p.rho * 5e5 / p.m);
}

TEST(DragForce, ThreeTermSumByHand) {
  VehicleParams p;
  p.c_d = 1.0;
  p.A = 1.0;
  p.rho = 1.2;
  p.m = 800.0;
  p.c_kappa = 0.1;
  p.c_r = 0.01;
  p.c_l = 3.0;
  p.g = 9.81;
  const double e = 1e6, k = 0.02;
  const double air = 1.0 * 1.0 * 1.2 * e / 800.0;       // 1500 N
  const double corner = 0.1 * 0.02 * e;                   // 2000 N
  const double fz = 3.0 * 1.0 * 1.2 * e / 800.0 + 800.0 * 9.81;  // 4500 + 7848 N
  EXPECT_NEAR(DragForce(p, k, e), air + corner + 0.01 * fz, 1e-9);
}

TEST(DragForce, NegativeEnergyIsDomainError) {
  VehicleParams p;
  try {
    DragForce(p, 0.0, -1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(VerticalForce, WeightAtRestAndLinearDownforce) {
  VehicleParams p;
  EXPECT_DOUBLE_EQ(VerticalForce(p, 0.0), p.m * p.g);
  const double d1 = VerticalForce(p, 3e5) - p.m * p.g;
  const double d2 = VerticalForce(p, 6e5) - p.m * p.g;
  EXPECT_NEAR(d2, 2.0 * d1, 1e-9);
  p.c_l = 0.0;
  EXPECT_DOUBLE_EQ(VerticalForce(p, 7e5), p.m * p.g);
}

TEST(LateralForce, DirectProductAndSign) {
  EXPECT_EQ(LateralForce(0.0, 1e6), 0.0);
  EXPECT_DOUBLE_EQ(LateralForce(0.05, 5e5), 5e4);
  EXPECT_LT(LateralForce(-0.05, 5e5), 0.0);
}

TEST(ForceTerms, AffineInEnergy) {
  VehicleParams p;
  const double k = 0.03, e0 = 1e5, e1 = 4e5, e2 = 7e5;
  auto affine = [&](auto f) {
    const double pred = f(e0) + (f(e1) - f(e0)) * (e2 - e0) / (e1 - e0);
    return std::abs(pred - f(e2)) <= 1e-9 * std::abs(f(e2));
  };
  EXPECT_TRUE(affine([&](double e) { return DragForce(p, k, e); }));
  EXPECT_TRUE(affine([&](double e) { return VerticalForce(p, e); }));
  EXPECT_TRUE(affine([&](double e) { return LateralForce(k, e); }));
}

TEST(GripLimits, FullGripOnStraight) {
  VehicleParams p;
  const auto [hi, lo] = GripLimits(p, 0.0, 4e5);
  EXPECT_DOUBLE_EQ(hi, p.mu_x * VerticalForce(p, 4e5));
  EXPECT_DOUBLE_EQ(lo, -hi);
}

TEST(GripLimits, ClosesAtJumpEnergy) {
  VehicleParams p;
  for (double k : {0.01, 0.03, 0.08}) {
    const double jump = EKinJump(p, k);
    const double fz = VerticalForce(p, jump);
    EXPECT_LE(std::abs(GripRadicand(p, k, jump)), 1e-9 * fz * fz);
    const auto [hi, lo] = GripLimits(p, k, jump);
    EXPECT_NEAR(hi, 0.0, 1e-3 * fz);
    EXPECT_NEAR(lo, 0.0, 1e-3 * fz);
  }
}

// With downforce the grip window first widens with speed; on the approach
// to the jump energy (beyond the radicand's maximum) it strictly narrows.
TEST(GripLimits, MagnitudeDecreasesTowardJump) {
  VehicleParams p;
  for (double k : {0.02, 0.04, 0.08}) {
    const double jump = EKinJump(p, k);
    double lo = 0.0, hi = jump;
    for (int it = 0; it < 200; ++it) {
      const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
      if (GripRadicand(p, k, a) < GripRadicand(p, k, b)) {
        lo = a;
      } else {
        hi = b;
      }
    }
    const double peak = 0.5 * (lo + hi);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; i < 200; ++i) {
      const double e = peak + (jump - peak) * i / 200.0;
      const auto [gp, gm] = GripLimits(p, k, e);
      EXPECT_LT(gp, prev);
      EXPECT_EQ(gm, -gp);
      prev = gp;
    }
  }
}

TEST(GripLimits, AboveJumpIsInfeasibleSpeed) {
  VehicleParams p;
  try {
    GripLimits(p, 0.05, 1.01 * EKinJump(p, 0.05));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInfeasibleSpeed);
  }
}

TEST(EKinJump, UniqueRootOfGripByBisection) {
  VehicleParams p;
  for (double k : {0.012, 0.05, 0.1}) {
    double lo = 1.0, hi = 1e9;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (GripRadicand(p, k, mid) > 0.0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(EKinJump(p, k), lo, 1e-9 * lo);
  }
}

TEST(EKinJump, UnboundedOnStraightAndAtAeroBalance) {
  VehicleParams p;
  EXPECT_FALSE(IsBounded(EKinJump(p, 0.0)));
  const double k_balance = 0.5 * p.mu_y * p.DownforcePerEnergy();
  EXPECT_FALSE(IsBounded(EKinJump(p, k_balance)));
  EXPECT_TRUE(IsBounded(EKinJump(p, 2.0 * k_balance)));
}

TEST(PowertrainLimits, PowerOverSpeed) {
  VehicleParams p;
  p.P_pt_plus = 200e3;
  p.m = 800.0;
  const auto [hi, lo] = PowertrainLimits(p, 1e6);  // v = 50 m/s
  EXPECT_NEAR(hi, 4000.0, 1e-9);
  EXPECT_NEAR(lo, p.P_pt_minus / 50.0, 1e-9);
  const auto [hi4, lo4] = PowertrainLimits(p, 4e6);
  EXPECT_NEAR(hi4, 0.5 * hi, 1e-9);
  EXPECT_NEAR(lo4, 0.5 * lo, 1e-9);
}

TEST(PowertrainLimits, CombustionCarHasNoRegen) {
  VehicleParams p;
  p.P_pt_minus = 0.0;
  for (double e : {1e4, 1e5, 1e6}) EXPECT_EQ(PowertrainLimits(p, e).second, 0.0);
}

TEST(PowertrainLimits, ZeroEnergyIsUnbounded) {
  VehicleParams p;
  EXPECT_THROW(PowertrainLimits(p, 0.0), Error);
}

TEST(Envelope, ClampsBelowMinimumSpeed) {
  VehicleParams p;
  const auto env = Envelope(p, 0.0, p.KineticEnergy(2.0));
  EXPECT_DOUBLE_EQ(env.f_pt_plus, p.P_pt_plus / 5.0);
}

TEST(Envelope, DragPartialIsConstant) {
  VehicleParams p;
  const double k = 0.02;
  const double expect = p.c_d * p.A * p.rho / p.m + p.c_kappa * k + p.c_r * p.c_l * p.A * p.rho / p.m;
  EXPECT_NEAR(Envelope(p, k, 1e5).d_fd_dE, expect, 1e-14 * expect);
  EXPECT_EQ(Envelope(p, k, 1e5).d_fd_dE, Envelope(p, k, 3e5).d_fd_dE);
}

TEST(Envelope, GripPartialVanishesWithoutDownforceOnStraight) {
  VehicleParams p;
  p.c_l = 0.0;
  EXPECT_EQ(Envelope(p, 0.0, 3e5).d_fgrip_plus_dE, 0.0);
}

// Randomized check of every analytic partial against central differences.
TEST(Envelope, PartialsMatchFiniteDifferences) {
  VehicleParams p;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> kd(-0.1, 0.1), fd(0.05, 0.95);
  const double e_min = p.KineticEnergy(6.0), e_cap = p.KineticEnergy(120.0);
  int checked = 0;
  for (; checked < 1000;) {
    const double k = kd(rng);
    const double hi = std::min(e_cap, IsBounded(EKinJump(p, k)) ? EKinJump(p, k) : e_cap);
    if (hi <= 2.0 * e_min) continue;
    const double e = e_min + fd(rng) * (hi - e_min);
    const auto env = Envelope(p, k, e);
    auto field = [&](double ForceEnvelope::*f) {
      return [&, f](double x) { return Envelope(p, k, x).*f; };
    };
    const double h = 1.0;
    struct Pair { double ForceEnvelope::*value; double ForceEnvelope::*partial; };
    for (Pair pr : {Pair{&ForceEnvelope::f_d, &ForceEnvelope::d_fd_dE},
                    Pair{&ForceEnvelope::f_grip_plus, &ForceEnvelope::d_fgrip_plus_dE},
                    Pair{&ForceEnvelope::f_grip_minus, &ForceEnvelope::d_fgrip_minus_dE},
                    Pair{&ForceEnvelope::f_pt_plus, &ForceEnvelope::d_fpt_plus_dE},
                    Pair{&ForceEnvelope::f_pt_minus, &ForceEnvelope::d_fpt_minus_dE}}) {
      const double num = test::CentralDiff(field(pr.value), e, h);
      const double ana = env.*pr.partial;
      ASSERT_LE(std::abs(num - ana), 1e-6 * std::max(std::abs(ana), 1e-9))
          << "kappa=" << k << " e=" << e;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(VehicleParams, ValidateRejectsBadEfficiency) {
  VehicleParams p;
  p.eta_minus = 1.2;
  EXPECT_THROW(p.Validate(), Error);
  p = VehicleParams{};
  p.eta_plus = 0.0;
  EXPECT_THROW(p.Validate(), Error);
  EXPECT_NO_THROW(VehicleParams{}.Validate());
}

}  // namespace
}  // namespace lapcue
