// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Link establishment and environment probing: codebook sector sweeps,
// per-sector Tx-leakage estimation, and range/bearing extraction from CIRs.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "isac/channel.hpp"

namespace isac {

struct ProbeConfig {
  int n_sectors = 32;
  double tx_power_dbm = 40.0;
  double probe_backoff_db = 30.0;   // leakage probing runs this far below
  double noise_power_dbm = -90.0;   // per element, per subcarrier
  CommChannelParams comm;           // propagation used for sweeps
};

// Linear MMSE estimate of one coefficient h from pilot observations
// y_l = h s_l + n_l:  h_hat = prior_var sum(conj(s) y) /
//                             (prior_var sum|s|^2 + noise_var).
cxd mmse_estimate(const Eigen::VectorXcd& y, const Eigen::VectorXcd& s,
                  double noise_var, double prior_var);

struct SweepEntry {
  int sector;
  double rssi_db;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  // ascending sector order
  int best_sector = -1;
  double best_rssi_db = db_floor;
};

// One sweep direction: tx transmits every codebook sector in turn while rx
// listens quasi-omni. The channel stays fixed across the sweep; noise is
// redrawn per sector.
SweepReport sector_sweep(const Node& tx, const Node& rx,
                         const OfdmConfig& ofdm, const ProbeConfig& probe,
                         std::uint64_t seed);

struct BeamTrainingResult {
  SweepReport ap_side;  // AP transmits, UE listens
  SweepReport ue_side;  // UE transmits, AP listens
};

// Two-stage initial access: AP-side sector sweep, then UE-side.
BeamTrainingResult beam_training(const Node& ap, const Node& ue,
                                 const OfdmConfig& ofdm,
                                 const ProbeConfig& probe, std::uint64_t seed);

// Bearing from a sweep report: best sector center refined by a three-point
// quadratic fit on the dB profile (offset clamped to half a sector).
double estimate_bearing(const SweepReport& report, int n_sectors);

// Leakage estimates for one operating sector, taken through a set of probing
// weights. per_weight[j] holds the effective tensor observed through weight j:
// [rx elements x tx chains x n_subcarriers].
struct TiEstimate {
  std::vector<CxTensor> per_weight;

  // Recovers the element-level leakage tensor by solving the linear system
  // stacked over probing weights; needs at least as many weights as Tx
  // elements.
  CxTensor element_level(const PhasedArray& arr,
                         const std::vector<Awv>& weights) const;
};

// Probes the operating sector's leakage at reduced power: Tx chains take
// turns sending TRN through each probing weight in turn while the Rx side
// listens element by element, and each coefficient is MMSE-estimated. The
// leakage is quasi-static, so the whole probe runs within one slot.
TiEstimate ti_probe(const Node& ap, TxInterference& ti, int sector,
                    const std::vector<Awv>& weights, const OfdmConfig& ofdm,
                    const ProbeConfig& probe, int slot, std::uint64_t seed);

// Normalized slow-time correlation |<h_t, h_{t+lag}>| / (|h_t| |h_{t+lag}|)
// for consecutive tensor snapshots.
std::vector<double> ti_correlation(const std::vector<CxTensor>& snapshots,
                                   int lag = 1);

// Range from a monostatic CIR: peak tap times c / (2B) minus the calibrated
// sampling offset. Raises detection_error when the peak does not clear the
// median tap power by min_peak_to_median_db.
double estimate_range(const Eigen::VectorXcd& cir, const OfdmConfig& cfg,
                      double calibration_taps = 0.0,
                      double min_peak_to_median_db = 15.0);

struct Detection {
  int sector;
  int tap;
  double range_m;
  double bearing_rad;
  double energy_db;
};

// Moving-subject detection over per-sector slow-time CIR stacks. Each stack
// is Hann-windowed in frequency (off-grid delay skirts would fragment into
// ghosts), background-removed, and reduced to per-tap motion energy. Taps
// above median + k robust sigmas form runs; runs shorter than two taps are
// noise spikes. Same-delay detections adjacent to a stronger one are merged,
// and ones more than dominance_gate_db below the strongest at that delay are
// discarded as sidelobe ghosts.
std::vector<Detection> detect_subjects(const std::vector<CirMatrix>& sectors,
                                       const OfdmConfig& cfg, int n_sectors,
                                       double k = 5.0,
                                       double dominance_gate_db = 22.0);

// Monostatic detection scan: for every codebook sector the node transmits
// n_packets TRN packets through the sector beam with a matched Rx beam, and
// the estimated CSI of each packet is converted to a CIR row. Optional Tx
// leakage is composed in per sector and packet.
std::vector<CirMatrix> monostatic_scan(const Node& ap,
                                       const std::vector<Subject>& subjects,
                                       const OfdmConfig& ofdm,
                                       const ProbeConfig& probe, int n_packets,
                                       std::uint64_t seed,
                                       TxInterference* ti = nullptr);

}  // namespace isac
