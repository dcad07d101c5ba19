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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lapcue/error.hpp"
#include "lapcue/vehicle.hpp"

namespace lapcue {

// Curvature sampled on a uniform distance grid. For a closed lap the last
// sample coincides with the first one (s_f is s_0 plus one lap).
struct TrackProfile {
  double s0 = 0.0;
  double ds = 1.0;
  std::vector<double> kappa;
  bool periodic = false;

  std::size_t size() const { return kappa.size(); }
  double sf() const { return s0 + ds * static_cast<double>(kappa.size() - 1); }
  double length() const { return sf() - s0; }
  double s(std::size_t i) const { return s0 + ds * static_cast<double>(i); }

  // Number of distinct grid points on a closed lap.
  std::size_t LapPoints() const { return periodic ? size() - 1 : size(); }

  // Linear interpolation, clamped to the profile ends.
  double KappaAt(double s_query) const {
    const double x = (s_query - s0) / ds;
    if (x <= 0.0) return kappa.front();
    const auto last = static_cast<double>(kappa.size() - 1);
    if (x >= last) return kappa.back();
    const auto i = static_cast<std::size_t>(x);
    const double t = x - static_cast<double>(i);
    return kappa[i] + t * (kappa[i + 1] - kappa[i]);
  }

  // Copy of a closed lap rotated so grid point `start` becomes index 0.
  // Distances keep counting from the original coordinate of that point.
  TrackProfile Rolled(std::size_t start) const {
    TrackProfile out = *this;
    const std::size_t n = LapPoints();
    start %= n;
    for (std::size_t i = 0; i < n; ++i) out.kappa[i] = kappa[(i + start) % n];
    if (periodic) out.kappa[n] = out.kappa[0];
    out.s0 = s(start);
    return out;
  }
};

namespace detail {
inline Error ParseError(const std::string& where, std::size_t line,
                        const std::string& what) {
  return Error(ErrorKind::kParse,
               where + ":" + std::to_string(line) + ": " + what);
}

inline bool ParseDouble(const std::string& text, double& out) {
  const char* begin = text.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}
}  // namespace detail

// Resamples scattered (s, kappa) pairs onto a uniform grid of spacing ds
// starting at the first sample.
inline TrackProfile Resample(const std::vector<double>& s,
                             const std::vector<double>& kappa, double ds,
                             bool periodic) {
  if (s.size() < 2 || s.size() != kappa.size()) {
    throw Error(ErrorKind::kParse, "track needs at least 2 samples");
  }
  if (!(ds > 0.0)) throw Error(ErrorKind::kDomain, "ds must be > 0");
  TrackProfile out;
  out.s0 = s.front();
  out.ds = ds;
  out.periodic = periodic;
  const double span = s.back() - s.front();
  const auto n = static_cast<std::size_t>(std::llround(span / ds)) + 1;
  out.kappa.resize(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double si = std::min(out.s(i), s.back());
    while (j + 2 < s.size() && s[j + 1] <= si) ++j;
    const double t = (si - s[j]) / (s[j + 1] - s[j]);
    out.kappa[i] = t == 0.0 ? kappa[j] : kappa[j] + t * (kappa[j + 1] - kappa[j]);
  }
  if (periodic) out.kappa.back() = out.kappa.front();
  return out;
}

inline TrackProfile Resample(const TrackProfile& t, double ds) {
  std::vector<double> s(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) s[i] = t.s(i);
  return Resample(s, t.kappa, ds, t.periodic);
}

struct TrackLoadOptions {
  std::optional<double> ds;  // default: median input spacing
  // A closed lap is assumed when the first and last curvature agree.
  bool detect_periodic = true;
};

// Reads the two-column `s_m,kappa_per_m` table.
inline TrackProfile ParseTrack(std::istream& in, const std::string& where,
                               const TrackLoadOptions& opt = {}) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw detail::ParseError(where, 1, "missing header row");
  }
  ++line_no;
  if (line.find("s_m") == std::string::npos ||
      line.find("kappa_per_m") == std::string::npos) {
    throw detail::ParseError(where, line_no,
                             "header must be 's_m,kappa_per_m'");
  }
  std::vector<double> s;
  std::vector<double> kappa;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw detail::ParseError(where, line_no, "expected two columns");
    }
    double sv = 0.0;
    double kv = 0.0;
    if (!detail::ParseDouble(line.substr(0, comma), sv) ||
        !detail::ParseDouble(line.substr(comma + 1), kv)) {
      throw detail::ParseError(where, line_no, "malformed number");
    }
    if (!std::isfinite(sv) || !std::isfinite(kv)) {
      throw detail::ParseError(where, line_no, "non-finite value");
    }
    if (!s.empty() && !(sv > s.back())) {
      throw detail::ParseError(where, line_no,
                               "distances must be strictly increasing");
    }
    s.push_back(sv);
    kappa.push_back(kv);
  }
  if (s.size() < 2) {
    throw detail::ParseError(where, line_no, "fewer than 2 samples");
  }
  double ds = 0.0;
  if (opt.ds) {
    ds = *opt.ds;
  } else {
    std::vector<double> gaps(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) gaps[i] = s[i + 1] - s[i];
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    ds = gaps[gaps.size() / 2];
  }
  const bool periodic =
      opt.detect_periodic && std::abs(kappa.front() - kappa.back()) <= 1e-12;
  return Resample(s, kappa, ds, periodic);
}

inline TrackProfile LoadTrack(const std::string& path,
                              const TrackLoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kParse, "cannot open track file " + path);
  return ParseTrack(in, path, opt);
}

inline void WriteTrack(std::ostream& out, const TrackProfile& t) {
  out << "s_m,kappa_per_m\n";
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", t.s(i), t.kappa[i]);
    out << buf;
  }
}

inline void SaveTrack(const std::string& path, const TrackProfile& t) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kParse, "cannot write track file " + path);
  WriteTrack(out, t);
}

struct TrackSegment {
  double length = 0.0;  // m
  double kappa = 0.0;   // 1/m
};

// Closed lap assembled from constant-curvature segments. Curvature changes
// linearly over `ramp` meters centred on each segment boundary (clamped to
// the shorter neighbour), so a corner whose length equals the ramp has a
// single curvature peak.
struct SyntheticTrackSpec {
  std::vector<TrackSegment> segments;
  double ramp = 20.0;
  double ds = 1.0;

  // Straight of `straight` meters followed by a corner, repeated.
  static SyntheticTrackSpec Alternating(const std::vector<double>& straights,
                                        const std::vector<double>& corner_kappa,
                                        const std::vector<double>& corner_len,
                                        double ramp = 20.0, double ds = 1.0) {
    SyntheticTrackSpec spec;
    spec.ramp = ramp;
    spec.ds = ds;
    const std::size_t n = std::max(straights.size(), corner_kappa.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i < straights.size()) spec.segments.push_back({straights[i], 0.0});
      if (i < corner_kappa.size()) {
        const double len = i < corner_len.size() ? corner_len[i] : corner_len.back();
        spec.segments.push_back({len, corner_kappa[i]});
      }
    }
    return spec;
  }
};

inline TrackProfile SyntheticTrack(const SyntheticTrackSpec& spec) {
  if (spec.segments.empty()) {
    throw Error(ErrorKind::kDomain, "synthetic track needs at least one segment");
  }
  if (!(spec.ds > 0.0) || spec.ramp < 0.0) {
    throw Error(ErrorKind::kDomain, "invalid synthetic track resolution");
  }
  const std::size_t n = spec.segments.size();
  std::vector<double> start(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(spec.segments[j].length > 0.0)) {
      throw Error(ErrorKind::kDomain, "segment lengths must be > 0");
    }
    start[j + 1] = start[j] + spec.segments[j].length;
  }
  const double lap = start[n];
  // Ramp width at the boundary in front of segment j.
  std::vector<double> width(n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double prev = spec.segments[(j + n - 1) % n].length;
    width[j] = std::min({spec.ramp, prev, spec.segments[j].length});
  }
  width[n] = width[0];

  auto smooth_step = [](double x, double w) {
    if (w <= 0.0) return x >= 0.0 ? 1.0 : 0.0;
    return std::clamp(x / w + 0.5, 0.0, 1.0);
  };
  auto kappa_at = [&](double s) {
    double k = 0.0;
    for (int image = -1; image <= 1; ++image) {
      const double x = s - image * lap;
      for (std::size_t j = 0; j < n; ++j) {
        const double box = smooth_step(x - start[j], width[j]) -
                           smooth_step(x - start[j + 1], width[j + 1]);
        if (box != 0.0) k += spec.segments[j].kappa * box;
      }
    }
    return k;
  };

  TrackProfile out;
  out.s0 = 0.0;
  out.ds = spec.ds;
  out.periodic = true;
  const auto count = static_cast<std::size_t>(std::llround(lap / spec.ds)) + 1;
  out.kappa.resize(count);
  for (std::size_t i = 0; i < count; ++i) out.kappa[i] = kappa_at(out.s(i));
  out.kappa.back() = out.kappa.front();
  return out;
}

struct ApexRecord {
  double s_apex = 0.0;      // m, refined location
  double kappa_apex = 0.0;  // 1/m
  double e_kin_apex = 0.0;  // J
  // Grid span of the minimum; the solver pins the state at `first` and
  // starts the following segment there.
  std::size_t first = 0;
  std::size_t last = 0;
  bool anchor = false;
};

// Local minima of the closure-limit profile E_kin,jump(s), ordered by s.
inline std::vector<ApexRecord> FindApexes(const VehicleParams& p,
                                          const TrackProfile& t) {
  const std::size_t n = t.LapPoints();
  std::vector<double> limit(n);
  bool any_finite = false;
  for (std::size_t i = 0; i < n; ++i) {
    limit[i] = EKinJump(p, t.kappa[i]);
    any_finite = any_finite || IsBounded(limit[i]);
  }
  if (!any_finite) {
    throw Error(ErrorKind::kUnconstrainedTrack,
                "no finite grip-closure limit anywhere on the track");
  }
  auto same = [](double a, double b) {
    if (!IsBounded(a) || !IsBounded(b)) return a == b;
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
  };
  const bool cyclic = t.periodic;
  auto at = [&](std::ptrdiff_t i) -> double {
    const auto ni = static_cast<std::ptrdiff_t>(n);
    if (cyclic) return limit[static_cast<std::size_t>(((i % ni) + ni) % ni)];
    if (i < 0 || i >= ni) return kUnbounded;
    return limit[static_cast<std::size_t>(i)];
  };

  std::vector<ApexRecord> out;
  std::vector<bool> visited(n, false);
  // For a closed lap start scanning right after a value change so a run of
  // equal values never straddles the scan start.
  std::size_t offset = 0;
  if (cyclic) {
    while (offset < n && same(at(static_cast<std::ptrdiff_t>(offset) - 1),
                              limit[offset])) {
      ++offset;
    }
    if (offset == n) offset = 0;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (k + offset) % n;
    if (visited[i] || !IsBounded(limit[i])) continue;
    std::size_t run = 1;
    while (run < n && same(limit[(i + run) % n], limit[i]) &&
           (cyclic || i + run < n)) {
      ++run;
    }
    for (std::size_t r = 0; r < run; ++r) visited[(i + r) % n] = true;
    const auto ii = static_cast<std::ptrdiff_t>(i);
    const double left = at(ii - 1);
    const double right = at(ii + static_cast<std::ptrdiff_t>(run));
    if (!(limit[i] < left && limit[i] < right)) continue;

    ApexRecord rec;
    rec.first = i;
    rec.last = (i + run - 1) % n;
    rec.kappa_apex = t.kappa[i];
    rec.e_kin_apex = limit[i];
    if (run == 1 && IsBounded(left) && IsBounded(right)) {
      const double curv = left - 2.0 * limit[i] + right;
      const double shift = curv > 0.0 ? 0.5 * (left - right) / curv : 0.0;
      rec.s_apex = t.s(i) + std::clamp(shift, -0.5, 0.5) * t.ds;
    } else {
      rec.s_apex = t.s(i) + static_cast<double>((run - 1) / 2) * t.ds;
    }
    if (cyclic && rec.s_apex >= t.s0 + t.length()) rec.s_apex -= t.length();
    out.push_back(rec);
  }
  if (out.empty()) {
    throw Error(ErrorKind::kUnconstrainedTrack, "no curvature apex found");
  }
  std::sort(out.begin(), out.end(), [](const ApexRecord& a, const ApexRecord& b) {
    return a.s_apex < b.s_apex;
  });
  std::size_t anchor = 0;
  for (std::size_t j = 1; j < out.size(); ++j) {
    if (out[j].e_kin_apex < out[anchor].e_kin_apex) anchor = j;
  }
  out[anchor].anchor = true;
  return out;
}

}  // namespace lapcue
