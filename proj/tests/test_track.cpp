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
#include <functional>
#include <sstream>

#include "lapcue/track.hpp"
#include "support.hpp"

namespace lapcue {
namespace {

TrackProfile Parse(const std::string& text, TrackLoadOptions opt = {}) {
  std::istringstream in(text);
  return ParseTrack(in, "inline", opt);
}

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kContract;
}

TEST(LoadTrack, ConstantProfileResamplesToUnitGrid) {
  TrackLoadOptions opt;
  opt.ds = 1.0;
  const auto t = Parse("s_m,kappa_per_m\n0,0.0\n100,0.0\n", opt);
  ASSERT_EQ(t.size(), 101u);
  for (double k : t.kappa) EXPECT_EQ(k, 0.0);
  EXPECT_DOUBLE_EQ(t.sf(), 100.0);
}

TEST(LoadTrack, LinearInterpolationAtMidpoint) {
  TrackLoadOptions opt;
  opt.ds = 5.0;
  const auto t = Parse("s_m,kappa_per_m\n0,0\n10,0.1\n", opt);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_NEAR(t.kappa[1], 0.05, 1e-15);
}

TEST(LoadTrack, DefaultSpacingIsMedianGap) {
  const auto t = Parse("s_m,kappa_per_m\n0,0\n2,0\n4,0\n10,0\n");
  EXPECT_DOUBLE_EQ(t.ds, 2.0);
}

TEST(LoadTrack, RejectsBadInputWithLineNumbers) {
  EXPECT_EQ(KindOf([] { Parse("s_m,kappa_per_m\n0,0\n0,0.1\n"); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([] { Parse("s_m,kappa_per_m\n0,0\n"); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([] { Parse("s_m,kappa_per_m\n0,0\n1,nan\n"); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([] { Parse("distance,curv\n0,0\n1,0\n"); }), ErrorKind::kParse);
  try {
    Parse("s_m,kappa_per_m\n0,0\n5,0\n3,0\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("inline:4:"), std::string::npos) << e.what();
  }
}

TEST(LoadTrack, MissingFileIsParseError) {
  EXPECT_EQ(KindOf([] { LoadTrack("/nonexistent/track.csv"); }), ErrorKind::kParse);
}

TEST(Resample, IdempotentOnUniformProfile) {
  const auto t = test::TwoCornerTrack();
  const auto r = Resample(t, t.ds);
  ASSERT_EQ(r.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r.kappa[i], t.kappa[i]);
}

TEST(SyntheticTrack, TwoIdenticalCornersHaveTwoPlateaus) {
  SyntheticTrackSpec spec;
  spec.segments = {{400, 0.0}, {100, 0.05}, {400, 0.0}, {100, 0.05}};
  const auto t = SyntheticTrack(spec);
  EXPECT_TRUE(t.periodic);
  EXPECT_DOUBLE_EQ(t.length(), 1000.0);
  int plateaus = 0;
  bool in = false;
  for (double k : t.kappa) {
    const bool top = std::abs(k - 0.05) < 1e-15;
    if (top && !in) ++plateaus;
    in = top;
  }
  EXPECT_EQ(plateaus, 2);
}

TEST(SyntheticTrack, ZeroCurvatureEverywhere) {
  SyntheticTrackSpec spec;
  spec.segments = {{300, 0.0}, {200, 0.0}};
  for (double k : SyntheticTrack(spec).kappa) EXPECT_EQ(k, 0.0);
}

TEST(SyntheticTrack, EmptySpecIsError) {
  EXPECT_THROW(SyntheticTrack(SyntheticTrackSpec{}), Error);
}

TEST(SyntheticTrack, SaveLoadRoundTripIsBitExact) {
  const auto t = test::TwoCornerTrack();
  std::ostringstream out;
  WriteTrack(out, t);
  TrackLoadOptions opt;
  opt.ds = t.ds;
  const auto r = Parse(out.str(), opt);
  ASSERT_EQ(r.size(), t.size());
  EXPECT_EQ(r.periodic, t.periodic);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r.kappa[i], t.kappa[i]);
}

// Brute-force scan: cyclic local minima of e_kin_jump, a flat run of equal
// values counting once at its midpoint.
std::vector<double> ScanMinima(const VehicleParams& p, const TrackProfile& t) {
  const std::size_t n = t.LapPoints();
  std::vector<double> j(n);
  for (std::size_t i = 0; i < n; ++i) j[i] = EKinJump(p, t.kappa[i]);
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(j[i]) || j[(i + n - 1) % n] == j[i]) continue;  // run start only
    std::size_t len = 1;
    while (len < n && j[(i + len) % n] == j[i]) ++len;
    if (j[(i + n - 1) % n] > j[i] && j[(i + len) % n] > j[i]) {
      out.push_back(t.s(i) + 0.5 * t.ds * static_cast<double>(len - 1));
    }
  }
  return out;
}

TEST(FindApexes, TwoCornerTrackMatchesBruteForce) {
  VehicleParams p;
  const auto t = test::TwoCornerTrack();
  const auto apexes = FindApexes(p, t);
  const auto ref = ScanMinima(p, t);
  ASSERT_EQ(apexes.size(), 2u);
  ASSERT_EQ(ref.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(apexes[k].s_apex, ref[k], t.ds);
    EXPECT_DOUBLE_EQ(apexes[k].e_kin_apex, EKinJump(p, apexes[k].kappa_apex));
  }
  // The tighter first corner is the anchor.
  EXPECT_TRUE(apexes[0].anchor);
  EXPECT_FALSE(apexes[1].anchor);
}

TEST(FindApexes, PlateauCornerGivesMidpointApex) {
  VehicleParams p;
  SyntheticTrackSpec spec;
  spec.segments = {{500, 0.0}, {100, 0.04}};
  const auto t = SyntheticTrack(spec);
  const auto apexes = FindApexes(p, t);
  ASSERT_EQ(apexes.size(), 1u);
  EXPECT_NEAR(apexes[0].s_apex, 550.0, t.ds);
}

TEST(FindApexes, StraightTrackIsUnconstrained) {
  VehicleParams p;
  SyntheticTrackSpec spec;
  spec.segments = {{1000, 0.0}};
  EXPECT_EQ(KindOf([&] { FindApexes(p, SyntheticTrack(spec)); }),
            ErrorKind::kUnconstrainedTrack);
}

TEST(FindApexes, AnchorIsMaxCurvatureWithoutDownforce) {
  VehicleParams p;
  p.c_l = 0.0;
  const auto t = test::SixCornerTrack();
  const auto apexes = FindApexes(p, t);
  ASSERT_EQ(apexes.size(), 6u);
  std::size_t best = 0;
  for (std::size_t k = 0; k < apexes.size(); ++k) {
    if (std::abs(apexes[k].kappa_apex) > std::abs(apexes[best].kappa_apex)) best = k;
  }
  EXPECT_TRUE(apexes[best].anchor);
}

TEST(FindApexes, InvariantUnderRotation) {
  VehicleParams p;
  const auto t = test::TwoCornerTrack();
  const auto base = FindApexes(p, t);
  const std::size_t shift = 137;
  const auto rolled = FindApexes(p, t.Rolled(shift));
  ASSERT_EQ(rolled.size(), base.size());
  const double lap = t.length();
  for (const auto& a : base) {
    bool found = false;
    for (const auto& b : rolled) {
      const double d = std::fmod(std::abs(a.s_apex - b.s_apex) + 1e-9, lap);
      if (d < 1e-6 || lap - d < 1e-6) found = true;
    }
    EXPECT_TRUE(found) << a.s_apex;
  }
}

}  // namespace
}  // namespace lapcue
