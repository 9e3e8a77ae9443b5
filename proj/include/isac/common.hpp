// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace isac {

using cxd = std::complex<double>;

inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double pi = std::numbers::pi;

// Power quantities below this floor are reported as -300 dB instead of -inf.
inline constexpr double db_floor = -300.0;

// Raised when the scene or a measurement contains no usable target return.
class detection_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an optimization or scheduling problem has no feasible solution.
class infeasible_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a numerical routine leaves its validated operating regime.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double db10(double power_ratio) {
  if (!(power_ratio > 0.0)) return db_floor;
  return std::max(10.0 * std::log10(power_ratio), db_floor);
}

inline double db20(double field_ratio) {
  if (!(field_ratio > 0.0)) return db_floor;
  return std::max(20.0 * std::log10(field_ratio), db_floor);
}

inline double undb10(double db) { return std::pow(10.0, db / 10.0); }
inline double undb20(double db) { return std::pow(10.0, db / 20.0); }

inline double deg2rad(double deg) { return deg * pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / pi; }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + pi, 2.0 * pi);
  if (a < 0) a += 2.0 * pi;
  return a - pi;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// Front-fire bearings only: the linear arrays used here cannot resolve
// front/back ambiguity, so every bearing must lie in [-pi/2, pi/2].
inline void require_bearing(double bearing, const std::string& who) {
  if (!(bearing >= -pi / 2 && bearing <= pi / 2))
    throw std::domain_error(who + ": bearing " + std::to_string(bearing) +
                            " outside [-pi/2, pi/2]");
}

}  // namespace isac
