// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Self-interference suppression: analog nulling of the Tx-to-Rx leakage under
// mainlobe constraints, residual digital subtraction, and the end-to-end
// pipeline that turns a contaminated monostatic link into clean CIR stacks.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "isac/channel.hpp"
#include "isac/probing.hpp"

namespace isac {

// Composite array gain of the hybrid beamformer toward one bearing, mapping
// unit far-field excitation through the digital and analog stages on the
// respective side (sum over streams, dB).
double composite_tx_gain_db(const HybridBeamformers& bf, const PhasedArray& arr,
                            double bearing);
double composite_rx_gain_db(const HybridBeamformers& bf, const PhasedArray& arr,
                            double bearing);

// Lower bound on the composite gain toward a bearing. tx_side selects which
// pattern the bound applies to.
struct MainlobeTarget {
  double bearing_rad = 0.0;
  double min_gain_db = 0.0;
  bool tx_side = true;
};

struct BeamNullConfig {
  double tol = 1e-6;             // relative improvement deemed progress
  int patience = 5;              // consecutive stalls before stopping
  int max_iters = 2000;
  int max_restore_failures = 10;  // consecutive mainlobe repair failures
  bool quantize = true;           // project the result onto the AWV grid
  int polish_passes = 2;          // coordinate sweeps on the quantized grid
  int digital_iters = 200;        // digital-only refinement after quantizing
};

struct BeamNullResult {
  HybridBeamformers bf;
  double objective_init = 0.0;   // leakage power through the initial weights
  double objective_final = 0.0;  // never exceeds objective_init
  int iterations = 0;
  bool converged = false;
  double nulling_gain_db() const {
    return db10(objective_init) - db10(objective_final);
  }
};

// Minimizes the leakage power sum_k |A B H_k C D|_F^2 over the analog AWVs
// and digital matrices by projected gradient descent. Projections keep every
// analog amplitude within [0, 1] with each chain's strongest element pinned
// to full scale, hold the digital Frobenius norms at their initial values,
// and repair mainlobe targets by blending back toward the initial weights.
// Raises infeasible_error when the initial weights already violate a target
// or when repair fails max_restore_failures times in a row. The returned
// objective is never worse than the initial one.
BeamNullResult beam_null(const CxTensor& h_ti, const PhasedArray& arr,
                         const HybridBeamformers& init,
                         const std::vector<MainlobeTarget>& targets,
                         const BeamNullConfig& cfg = {});

// Subtracts the best single complex multiple of the predicted leakage:
// beta = <yhat, y> / |yhat|^2, residual = y - beta yhat.
struct DigitalCancelResult {
  Eigen::MatrixXcd residual;
  cxd beta{0.0, 0.0};
};
DigitalCancelResult digital_cancel(const Eigen::MatrixXcd& y,
                                   const Eigen::MatrixXcd& yhat);

struct CancellationReport {
  double ti_before_db = db_floor;         // through the initial beams
  double ti_after_null_db = db_floor;     // through the nulled beams
  double ti_after_digital_db = db_floor;  // after subtraction
  double sensing_before_db = db_floor;    // subject return, initial beams
  double sensing_after_db = db_floor;     // subject return, nulled beams
  double noise_floor_db = db_floor;
  int iterations = 0;
  bool feasible = true;
  bool converged = false;
  double nulling_gain_db() const { return ti_before_db - ti_after_null_db; }
  double digital_gain_db() const {
    return ti_after_null_db - ti_after_digital_db;
  }
  double total_gain_db() const { return ti_before_db - ti_after_digital_db; }
};

struct PipelineConfig {
  ProbeConfig probe;
  TiParams ti;
  BeamNullConfig null_cfg;
  int sector = -1;                 // operating sector, required
  int n_packets = 64;
  double mainlobe_slack_db = 3.0;  // allowed composite-gain loss
  int null_decimation = 8;         // subcarrier stride for the null objective
  int probe_repeats = 4;           // probe symbols averaged per packet
  // Asymmetric operating beams: a joint sensing/communication Tx beam may be
  // wider than one sector while the Rx side stays fine. Zero keeps the Tx
  // beam at the plain sector beam; -1 keeps Rx on the operating sector.
  double tx_width_rad = 0.0;
  int rx_sector = -1;
};

struct PipelineResult {
  HybridBeamformers bf;
  CancellationReport report;
  CirMatrix cir;  // residual slow-time stack, one row per packet
};

// Full monostatic sensing pipeline on one operating sector: probe the
// element-level leakage, null it in the analog domain while preserving the
// sector mainlobe, then per packet subtract a per-subcarrier digital estimate
// refreshed from a reduced-power leakage-only probe window, and convert the
// residual to CIR rows. The leakage-only probe models the self-calibration
// interval in which scene returns are gated out.
PipelineResult cancel_pipeline(const Node& ap,
                               const std::vector<Subject>& subjects,
                               const OfdmConfig& ofdm,
                               const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace isac
