// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/array.hpp"

#include <algorithm>
#include <cmath>

namespace isac {

void validate(const PhasedArray& arr) {
  require(arr.elements >= 1, "PhasedArray: elements must be >= 1");
  require(arr.spacing > 0.0, "PhasedArray: spacing must be positive");
  require(arr.phase_bits >= 1 && arr.phase_bits <= 16,
          "PhasedArray: phase_bits must be in [1, 16]");
  require(arr.amp_bits >= 1 && arr.amp_bits <= 16,
          "PhasedArray: amp_bits must be in [1, 16]");
}

Eigen::VectorXcd steering_vector(const PhasedArray& arr, double bearing) {
  validate(arr);
  require_bearing(bearing, "steering_vector");
  Eigen::VectorXcd a(arr.elements);
  const double step = 2.0 * pi * arr.spacing * std::sin(bearing);
  for (int m = 0; m < arr.elements; ++m) a(m) = std::polar(1.0, step * m);
  return a;
}

Awv steer(const PhasedArray& arr, double bearing) {
  Eigen::VectorXcd a = steering_vector(arr, bearing);
  Awv awv;
  awv.w.assign(a.data(), a.data() + a.size());
  return awv;
}

static cxd pattern_value(const Awv& awv, const PhasedArray& arr,
                         double bearing) {
  const double step = 2.0 * pi * arr.spacing * std::sin(bearing);
  cxd acc(0.0, 0.0);
  for (int m = 0; m < arr.elements; ++m)
    acc += std::conj(awv.w[m]) * std::polar(1.0, step * m);
  return acc;
}

double array_gain_db(const Awv& awv, const PhasedArray& arr, double bearing) {
  validate(arr);
  require(awv.size() == arr.elements, "array_gain_db: AWV length != elements");
  require_bearing(bearing, "array_gain_db");
  return db10(std::norm(pattern_value(awv, arr, bearing)));
}

std::vector<double> gain_sweep_serial(const Awv& awv, const PhasedArray& arr,
                                      const std::vector<double>& bearings) {
  validate(arr);
  require(awv.size() == arr.elements, "gain_sweep: AWV length != elements");
  std::vector<double> gains(bearings.size());
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    require_bearing(bearings[i], "gain_sweep");
    gains[i] = db10(std::norm(pattern_value(awv, arr, bearings[i])));
  }
  return gains;
}

std::vector<double> gain_sweep(const Awv& awv, const PhasedArray& arr,
                               const std::vector<double>& bearings) {
  validate(arr);
  require(awv.size() == arr.elements, "gain_sweep: AWV length != elements");
  for (double b : bearings) require_bearing(b, "gain_sweep");
  std::vector<double> gains(bearings.size());
  const std::int64_t n = static_cast<std::int64_t>(bearings.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    gains[i] = db10(std::norm(pattern_value(awv, arr, bearings[i])));
  return gains;
}

Awv quantize(const Awv& awv, int phase_bits, int amp_bits) {
  require(phase_bits >= 1 && phase_bits <= 16,
          "quantize: phase_bits must be in [1, 16]");
  require(amp_bits >= 1 && amp_bits <= 16,
          "quantize: amp_bits must be in [1, 16]");
  const double phase_levels = std::pow(2.0, phase_bits);
  const double amp_levels = std::pow(2.0, amp_bits);
  const double phase_step = 2.0 * pi / phase_levels;

  Awv out;
  out.w.reserve(awv.w.size());
  for (const cxd& v : awv.w) {
    const double amp = std::abs(v);
    require(amp <= 1.0 + 1e-12, "quantize: amplitude exceeds 1");
    if (amp == 0.0) {  // switched-off element stays off
      out.w.emplace_back(0.0, 0.0);
      continue;
    }
    double phase = std::arg(v);
    if (phase < 0) phase += 2.0 * pi;
    double qphase = std::round(phase / phase_step) * phase_step;
    if (qphase >= 2.0 * pi) qphase = 0.0;
    // Mid-rise amplitude levels keep the worst-case error at half a step even
    // at the endpoints 0 and 1.
    double bin = std::floor(std::min(amp, 1.0) * amp_levels);
    bin = std::min(bin, amp_levels - 1.0);
    const double qamp = (bin + 0.5) / amp_levels;
    out.w.push_back(std::polar(qamp, qphase));
  }
  return out;
}

Awv quasi_omni(const PhasedArray& arr) {
  validate(arr);
  Awv awv;
  awv.w.assign(arr.elements, cxd(0.0, 0.0));
  awv.w[0] = cxd(1.0, 0.0);
  return awv;
}

double sector_width(int n_sectors) {
  require(n_sectors >= 1, "sector_width: n_sectors must be >= 1");
  return pi / n_sectors;
}

double sector_center(int n_sectors, int k) {
  require(n_sectors >= 1, "sector_center: n_sectors must be >= 1");
  require(k >= 0 && k < n_sectors, "sector_center: sector index out of range");
  return -pi / 2 + (k + 0.5) * pi / n_sectors;
}

int nearest_sector(int n_sectors, double bearing) {
  require(n_sectors >= 1, "nearest_sector: n_sectors must be >= 1");
  require_bearing(bearing, "nearest_sector");
  int k = static_cast<int>(std::floor((bearing + pi / 2) / pi * n_sectors));
  return std::clamp(k, 0, n_sectors - 1);
}

std::vector<Awv> sector_codebook(const PhasedArray& arr, int n_sectors) {
  validate(arr);
  require(n_sectors >= 1, "sector_codebook: n_sectors must be >= 1");
  std::vector<Awv> book;
  book.reserve(n_sectors);
  for (int k = 0; k < n_sectors; ++k)
    book.push_back(quantize(steer(arr, sector_center(n_sectors, k)),
                            arr.phase_bits, arr.amp_bits));
  return book;
}

double beam_width_3db(const Awv& awv, const PhasedArray& arr) {
  validate(arr);
  require(awv.size() == arr.elements, "beam_width_3db: AWV length mismatch");
  constexpr int n = 4097;
  std::vector<double> bearings(n);
  for (int i = 0; i < n; ++i) bearings[i] = -pi / 2 + pi * i / (n - 1);
  std::vector<double> g = gain_sweep_serial(awv, arr, bearings);

  int peak = 0;
  for (int i = 1; i < n; ++i)
    if (g[i] > g[peak]) peak = i;
  const double half = g[peak] - 10.0 * std::log10(2.0);

  auto crossing = [&](int dir) {
    int i = peak;
    while (i + dir >= 0 && i + dir < n && g[i + dir] >= half) i += dir;
    if (i + dir < 0 || i + dir >= n) return bearings[i];  // clipped at span edge
    // linear interpolation in dB between the last in-band and first
    // out-of-band samples
    const double g0 = g[i], g1 = g[i + dir];
    const double frac = (g0 - half) / (g0 - g1);
    return bearings[i] + dir * frac * (pi / (n - 1));
  };

  return crossing(+1) - crossing(-1);
}

Awv widen_beam(const PhasedArray& arr, double center, double target_width) {
  validate(arr);
  require_bearing(center, "widen_beam");
  require(target_width > 0.0 && target_width <= pi,
          "widen_beam: target_width must be in (0, pi]");

  // Shrinking the active aperture widens the beam; keep as many elements as
  // the width target allows. A single element is pseudo-omni, so some subset
  // always qualifies.
  for (int m = arr.elements; m >= 1; --m) {
    PhasedArray sub = arr;
    sub.elements = m;
    Awv w = steer(sub, center);
    w.w.resize(arr.elements, cxd(0.0, 0.0));
    if (beam_width_3db(w, arr) >= target_width)
      return quantize(w, arr.phase_bits, arr.amp_bits);
  }
  throw numerical_error("widen_beam: no feasible aperture");  // unreachable
}

}  // namespace isac
