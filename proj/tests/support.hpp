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

// Shared tracks and independent reference computations for the tests.

#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "lapcue/track.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue::test {

// Two corners of different tightness joined by 400 m and 500 m straights.
inline TrackProfile TwoCornerTrack(double ds = 1.0) {
  return SyntheticTrack(
      SyntheticTrackSpec::Alternating({400, 500}, {0.05, 0.03}, {40, 40}, 40, ds));
}

// One corner and one straight: a single segment per lap.
inline TrackProfile SingleStraightTrack(double straight = 300.0, double ds = 1.0) {
  return SyntheticTrack(SyntheticTrackSpec::Alternating({straight}, {0.04}, {40}, 40, ds));
}

// Six corners, about 3800 grid points at ds = 1 m.
inline TrackProfile SixCornerTrack(double ds = 1.0) {
  return SyntheticTrack(SyntheticTrackSpec::Alternating(
      {600, 400, 800, 500, 700, 450}, {0.05, 0.02, 0.03, 0.08, 0.015, 0.04},
      {60, 60, 60, 60, 60, 60}, 40, ds));
}

// Fourth-order central difference.
inline double CentralDiff(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// Closed-form kinetic energy where 1/(m v^3) + theta * dF_d/dE vanishes, from
// the drag coefficients directly.
inline double SingularEnergyReference(const VehicleParams& p, double kappa, double theta) {
  const double c = p.c_d * p.A * p.rho / p.m + p.c_kappa * std::abs(kappa) +
                   p.c_r * p.c_l * p.A * p.rho / p.m;
  const double v = std::cbrt(-1.0 / (p.m * c * theta));
  return 0.5 * p.m * v * v;
}

inline std::string DataPath(const std::string& name) {
  return std::string(LAPCUE_DATA_DIR) + "/" + name;
}

}  // namespace lapcue::test
