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

#include "lapcue/pmp.hpp"
#include "support.hpp"

namespace lapcue {
namespace {

VehicleParams Params(double eta_plus, double eta_minus) {
  VehicleParams p;
  p.eta_plus = eta_plus;
  p.eta_minus = eta_minus;
  return p;
}

// Random valid (kappa, E_kin) envelope away from the closure point.
struct Sampler {
  std::mt19937_64 rng{11};
  VehicleParams p;

  ForceEnvelope Env() {
    std::uniform_real_distribution<double> kd(-0.08, 0.08), u(0.0, 1.0);
    for (;;) {
      const double k = kd(rng);
      const double e_lo = p.KineticEnergy(6.0);
      const double jump = EKinJump(p, k);
      const double e_hi = IsBounded(jump) ? 0.98 * jump : p.KineticEnergy(110.0);
      if (e_hi <= e_lo) continue;
      return Envelope(p, k, e_lo + u(rng) * (e_hi - e_lo));
    }
  }
  double LambdaB() {
    std::uniform_real_distribution<double> d(-9.0, -4.0);
    return std::pow(10.0, d(rng));
  }
  // Ratio away from the three thresholds by at least eps.
  double Ratio(double eps = 1e-6) {
    std::uniform_real_distribution<double> d(-3.0, 1.0);
    for (;;) {
      const double r = d(rng);
      if (std::abs(r + 1.0 / p.eta_plus) > eps && std::abs(r + p.eta_minus) > eps &&
          std::abs(r) > eps) {
        return r;
      }
    }
  }
};

TEST(ControlPolicy, DriveCoastAndBrakeExamples) {
  const auto p = Params(0.9, 0.8);
  Sampler s;
  s.p = p;
  const auto env = s.Env();
  const double lb = 1e-6;
  auto drive = ControlPolicy(env, {-2.0 * lb, lb}, p);
  EXPECT_EQ(drive.u.f_m, std::min(env.f_pt_plus, env.f_grip_plus));
  EXPECT_EQ(drive.u.f_brk, 0.0);
  auto coast = ControlPolicy(env, {-1.0 * lb, lb}, p);
  EXPECT_EQ(coast.phase, PolicyPhase::kCoast);
  EXPECT_EQ(coast.u.f_m, 0.0);
  EXPECT_EQ(coast.u.f_brk, 0.0);

  ForceEnvelope e;
  e.f_grip_plus = 6000.0;
  e.f_grip_minus = -6000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -3000.0;
  auto brake = ControlPolicy(e, {1e-4, 1e-6}, p);
  EXPECT_EQ(brake.phase, PolicyPhase::kBrakeSupplement);
  EXPECT_EQ(brake.u.f_m, -3000.0);
  EXPECT_EQ(brake.u.f_brk, 3000.0);
}

TEST(ControlPolicy, ThresholdTiesAreResolved) {
  const auto p = Params(0.8, 0.5);  // thresholds exactly representable
  ForceEnvelope e;
  e.f_grip_plus = 6000.0;
  e.f_grip_minus = -6000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -3000.0;
  EXPECT_EQ(ControlPolicy(e, {-1.25, 1.0}, p).phase, PolicyPhase::kCoast);
  EXPECT_EQ(ControlPolicy(e, {-0.5, 1.0}, p).phase, PolicyPhase::kMaxRegen);
  const auto zero = ControlPolicy(e, {0.0, 1.0}, p);
  EXPECT_EQ(zero.phase, PolicyPhase::kMaxRegen);
  EXPECT_EQ(zero.u.f_brk, 0.0);
}

TEST(ControlPolicy, NonPositiveBatteryCostateIsDomainError) {
  const VehicleParams p;
  ForceEnvelope e;
  EXPECT_THROW(ControlPolicy(e, {-1.0, 0.0}, p), Error);
  EXPECT_THROW(ConstraintMultipliers(e, {-1.0, -1.0}, p), Error);
}

TEST(ControlPolicy, BangBangImageAndMonotonePhases) {
  Sampler s;
  for (int n = 0; n < 2000; ++n) {
    const auto env = s.Env();
    const double lb = s.LambdaB();
    int last_rank = -1;
    for (int k = 0; k <= 400; ++k) {
      const double r = -3.0 + 4.0 * k / 400.0;
      const auto out = ControlPolicy(env, {r * lb, lb}, s.p);
      const double f = out.u.f_m;
      ASSERT_TRUE(f == env.DriveForce() || f == 0.0 || f == env.RegenForce());
      const int rank = PhaseRank(out.phase);
      ASSERT_GE(rank, last_rank);
      last_rank = rank;
    }
  }
}

TEST(StateDerivatives, CoastRegenAndDriveBranches) {
  const auto p = Params(0.9, 0.8);
  ForceEnvelope e;
  e.f_d = 400.0;
  e.f_grip_plus = 6000.0;
  e.f_grip_minus = -6000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -3000.0;
  auto c = StateDerivativesOf(e, {0.0, 0.0}, p);
  EXPECT_EQ(c.d_e_kin, -400.0);
  EXPECT_EQ(c.d_e_b, p.F_b0);
  EXPECT_NEAR(StateDerivativesOf(e, {-1000.0, 0.0}, p).d_e_b, -800.0 + p.F_b0, 1e-9);
  EXPECT_NEAR(StateDerivativesOf(e, {1000.0, 0.0}, p).d_e_b, 1000.0 / 0.9 + p.F_b0, 1e-9);
  try {
    StateDerivativesOf(e, {6000.0, 0.0}, p);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kContract);
  }
}

TEST(CostateDerivative, PureTimeSensitivity) {
  const VehicleParams p;
  const auto env = Envelope(p, 0.0, 2e5);
  const double v = std::sqrt(2.0 * 2e5 / p.m);
  EXPECT_NEAR(CostateDerivative(env, {0.0, 1e-6}, Multipliers{}, p),
              std::pow(v, -3.0) / p.m, 1e-15 * std::pow(v, -3.0) / p.m);
  EXPECT_EQ(BatteryCostateDerivative(), 0.0);
}

// -dH/dE_kin by central differences, controls and multipliers fixed.
TEST(CostateDerivative, MatchesHamiltonianFiniteDifference) {
  Sampler s;
  for (int n = 0; n < 1000; ++n) {
    const auto env = s.Env();
    const double lb = s.LambdaB();
    const Costates lam{s.Ratio() * lb, lb};
    const auto pol = ControlPolicy(env, lam, s.p);
    const auto mu = ConstraintMultipliers(env, lam, s.p);
    auto h_of = [&](double e) {
      const auto en = Envelope(s.p, env.kappa, e);
      return Hamiltonian({e, 0.0}, pol.u, lam, mu, en, s.p);
    };
    const double fd = -test::CentralDiff(h_of, env.e_kin, 5.0);
    const double ana = CostateDerivative(env, lam, mu, s.p);
    ASSERT_LE(std::abs(fd - ana), 1e-6 * std::abs(ana)) << "n=" << n;
  }
}

TEST(CostateDerivative, LinearizationAgrees) {
  Sampler s;
  for (int n = 0; n < 2000; ++n) {
    const auto env = s.Env();
    const double lb = s.LambdaB();
    const Costates lam{s.Ratio() * lb, lb};
    const auto lin = LinearizeCostate(env, lam, s.p);
    const double direct = CostateDerivative(env, lam, ConstraintMultipliers(env, lam, s.p), s.p);
    ASSERT_NEAR(lin.a + lin.b * lam.lambda_kin, direct, 1e-10 * std::abs(direct) + 1e-30);
  }
}

TEST(ConstraintMultipliers, CoastBandIsAllZero) {
  Sampler s;
  const auto env = s.Env();
  const auto mu = ConstraintMultipliers(env, {-1.0e-6, 1e-6}, s.p);
  EXPECT_EQ(mu.mu_grip_plus, 0.0);
  EXPECT_EQ(mu.mu_grip_minus, 0.0);
  EXPECT_EQ(mu.mu_pt_plus, 0.0);
  EXPECT_EQ(mu.mu_pt_minus, 0.0);
  EXPECT_GT(mu.mu_brk, 0.0);  // λ_kin < 0 keeps the brake bound active
}

TEST(ConstraintMultipliers, GripBoundDriveCase) {
  const VehicleParams p;
  ForceEnvelope e;
  e.f_grip_plus = 3000.0;
  e.f_grip_minus = -3000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -4000.0;
  const Costates lam{-2e-6, 1e-6};
  const auto mu = ConstraintMultipliers(e, lam, p);
  EXPECT_DOUBLE_EQ(mu.mu_grip_plus, -(lam.lambda_kin + lam.lambda_b / p.eta_plus));
  EXPECT_GT(mu.mu_grip_plus, 0.0);
  EXPECT_EQ(mu.mu_pt_plus, 0.0);
}

// KKT closure of policy and multipliers over random valid inputs.
TEST(Kkt, ClosureOverRandomSamples) {
  Sampler s;
  for (int n = 0; n < 20000; ++n) {
    const auto env = s.Env();
    const double lb = s.LambdaB();
    const Costates lam{s.Ratio() * lb, lb};
    const auto pol = ControlPolicy(env, lam, s.p);
    const auto mu = ConstraintMultipliers(env, lam, s.p);
    for (double m : {mu.mu_grip_plus, mu.mu_grip_minus, mu.mu_pt_plus, mu.mu_pt_minus, mu.mu_brk}) {
      ASSERT_GE(m, 0.0);
    }
    const auto res = Stationarity(pol.u, lam, mu, s.p);
    const double scale = std::max(std::abs(lam.lambda_kin), lb);
    ASSERT_LE(std::abs(res.r_fm), 1e-12 * scale);
    ASSERT_LE(std::abs(res.r_fbrk), 1e-12 * scale);
    const double force = std::abs(env.f_grip_plus) + std::abs(env.f_pt_plus) + 1.0;
    for (double c : ComplementarityProducts(pol.u, mu, env)) {
      ASSERT_LE(std::abs(c), 1e-12 * scale * force);
    }
  }
}

TEST(Stationarity, CoastIsSubdifferentialBracket) {
  const auto p = Params(0.9, 0.8);
  const double lb = 1e-6;
  const Costates lam{-1.0 * lb, lb};
  ForceEnvelope e;
  e.f_grip_plus = 6000.0;
  e.f_grip_minus = -6000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -3000.0;
  const auto mu = ConstraintMultipliers(e, lam, p);
  EXPECT_LE(lam.lambda_kin + lb * p.eta_minus, 0.0);
  EXPECT_GE(lam.lambda_kin + lb / p.eta_plus, 0.0);
  EXPECT_EQ(Stationarity({0.0, 0.0}, lam, mu, p).r_fm, 0.0);
}

TEST(Stationarity, BrakeResidualVanishesForBrakeSupplement) {
  const VehicleParams p;
  ForceEnvelope e;
  e.f_grip_plus = 6000.0;
  e.f_grip_minus = -6000.0;
  e.f_pt_plus = 5000.0;
  e.f_pt_minus = -3000.0;
  const Costates lam{1e-4, 1e-6};
  const auto pol = ControlPolicy(e, lam, p);
  ASSERT_EQ(pol.phase, PolicyPhase::kBrakeSupplement);
  const auto res = Stationarity(pol.u, lam, ConstraintMultipliers(e, lam, p), p);
  EXPECT_NEAR(res.r_fbrk, 0.0, 1e-18);
}

// dH/dF_m by central differences off the F_m = 0 kink, arbitrary multipliers.
TEST(Hamiltonian, MotorForcePartialMatchesStationarity) {
  Sampler s;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    const auto env = s.Env();
    const double lb = s.LambdaB();
    const Costates lam{s.Ratio() * lb, lb};
    Multipliers mu{u(s.rng) * lb, u(s.rng) * lb, u(s.rng) * lb, u(s.rng) * lb, u(s.rng) * lb};
    const double f = (u(s.rng) < 0.5 ? -1.0 : 1.0) * (100.0 + 2000.0 * u(s.rng));
    auto h_of = [&](double fm) {
      return Hamiltonian({env.e_kin, 0.0}, {fm, 0.0}, lam, mu, env, s.p);
    };
    const double fd = test::CentralDiff(h_of, f, 1.0);
    const double ana = Stationarity({f, 0.0}, lam, mu, s.p).r_fm;
    ASSERT_LE(std::abs(fd - ana), 1e-6 * std::max(std::abs(ana), lb)) << "n=" << n;
  }
}

TEST(Hamiltonian, PureTimeDensityWithZeroCostates) {
  const VehicleParams p;
  const auto env = Envelope(p, 0.01, 3e5);
  const double h = Hamiltonian({3e5, 0.0}, {0.0, 0.0}, {0.0, 0.0}, Multipliers{}, env, p);
  EXPECT_DOUBLE_EQ(h, 1.0 / std::sqrt(2.0 * 3e5 / p.m));
}

TEST(SingularSpeeds, ClosedFormAndEquilibrium) {
  const VehicleParams p;
  for (double lb : {1e-7, 1e-6, 1e-5}) {
    for (double k : {0.0, 0.01}) {
      const auto sing = SingularKineticEnergies(p, k, lb);
      EXPECT_FALSE(IsBounded(sing.e_kin_sing[2]));
      for (int i = 0; i < 2; ++i) {
        const double ref = test::SingularEnergyReference(p, k, sing.threshold[i]);
        EXPECT_NEAR(sing.e_kin_sing[i], ref, 1e-12 * ref);
      }
      // Costate equilibrium at the drive threshold.
      const double e = sing.e_kin_sing[0];
      if (IsBounded(EKinJump(p, k)) && e >= EKinJump(p, k)) continue;
      const auto env = Envelope(p, k, e);
      const double d = CostateDerivative(env, {-lb / p.eta_plus, lb}, Multipliers{}, p);
      EXPECT_LE(std::abs(d), 1e-9 * TimeDensityGradient(p, e));
    }
  }
  const auto a = SingularKineticEnergies(p, 0.0, 1e-6);
  const auto b = SingularKineticEnergies(p, 0.0, 4e-6);
  EXPECT_GT(a.e_kin_sing[0], b.e_kin_sing[0]);
  EXPECT_GT(a.e_kin_sing[1], b.e_kin_sing[1]);
}

TEST(JumpBracket, SubstitutionAndLosslessLimit) {
  const auto br = JumpBracketFor(1.0, Params(0.9, 0.8));
  EXPECT_DOUBLE_EQ(br.lower, -1.0 / 0.9);
  EXPECT_DOUBLE_EQ(br.upper, -0.8);
  const auto lossless = JumpBracketFor(2e-6, Params(1.0, 1.0));
  EXPECT_EQ(lossless.lower, lossless.upper);
  EXPECT_EQ(lossless.lower, -2e-6);
}

}  // namespace
}  // namespace lapcue
