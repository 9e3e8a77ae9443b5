// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Uniform linear array model: steering, sector codebooks, antenna weight
// vector (AWV) quantization and aperture-reduction beam widening.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "isac/common.hpp"

namespace isac {

struct PhasedArray {
  int elements = 16;
  double spacing = 0.5;   // element pitch in wavelengths
  int phase_bits = 4;     // AWV phase LUT resolution
  int amp_bits = 4;       // AWV amplitude LUT resolution
};

// Antenna weight vector. Amplitudes stay in [0, 1]; an exact zero means the
// element is switched off (not a quantizer level).
struct Awv {
  std::vector<cxd> w;

  int size() const { return static_cast<int>(w.size()); }
};

void validate(const PhasedArray& arr);

// Array response a_m(theta) = exp(i 2 pi d m sin theta), m = 0..M-1.
Eigen::VectorXcd steering_vector(const PhasedArray& arr, double bearing);

// Unquantized conjugate-steering weights toward `bearing`.
Awv steer(const PhasedArray& arr, double bearing);

// Power gain |w^H a(theta)|^2 in dB, floored at db_floor.
double array_gain_db(const Awv& awv, const PhasedArray& arr, double bearing);

// Gains over a bearing grid. The parallel variant must produce bit-identical
// output to the serial one; it exists for large grids and the benchmark.
std::vector<double> gain_sweep_serial(const Awv& awv, const PhasedArray& arr,
                                      const std::vector<double>& bearings);
std::vector<double> gain_sweep(const Awv& awv, const PhasedArray& arr,
                               const std::vector<double>& bearings);

// Snaps phases to 2^phase_bits uniform levels on [0, 2pi) (0 is a level) and
// nonzero amplitudes to the 2^amp_bits mid-rise levels (k + 0.5) / 2^amp_bits
// on [0, 1]. Exact zeros are preserved. Idempotent; per-entry errors are
// bounded by pi / 2^phase_bits in phase and 2^-(amp_bits + 1) in amplitude.
Awv quantize(const Awv& awv, int phase_bits, int amp_bits);

// Pseudo-omnidirectional pattern: a single active element.
Awv quasi_omni(const PhasedArray& arr);

// Sector k of n covers [-pi/2 + k pi/n, -pi/2 + (k+1) pi/n).
double sector_width(int n_sectors);
double sector_center(int n_sectors, int k);
int nearest_sector(int n_sectors, double bearing);

// Quantized steering codebook with n_sectors equally spaced centers covering
// [-pi/2, pi/2].
std::vector<Awv> sector_codebook(const PhasedArray& arr, int n_sectors);

// 3 dB (half-power) beamwidth of the pattern, measured numerically. Patterns
// whose half-power points fall outside the visible span are clipped to it.
double beam_width_3db(const Awv& awv, const PhasedArray& arr);

// Widest-aperture contiguous subset whose 3 dB beamwidth is at least
// target_width, steered at `center` and quantized. Peak gain is
// non-increasing in target_width.
Awv widen_beam(const PhasedArray& arr, double center, double target_width);

}  // namespace isac
