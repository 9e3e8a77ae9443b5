// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Frequency-domain channel snapshots between phased-array nodes: LoS/Rician
// communication links, point-scatterer sensing paths, cross-chain Tx leakage
// and the hybrid (analog + digital) beamforming that ties them together.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "isac/array.hpp"
#include "isac/common.hpp"
#include "isac/tensor.hpp"

namespace isac {

struct OfdmConfig {
  double carrier_hz = 60e9;
  double bandwidth_hz = 2e9;
  int n_subcarriers = 512;    // must be a power of two
  double slow_time_hz = 20.0; // sensing snapshot (packet) rate
};

void validate(const OfdmConfig& cfg);
double wavelength_m(const OfdmConfig& cfg);
double range_bin_m(const OfdmConfig& cfg);  // c / (2 B), monostatic

struct Motion {
  enum class Kind { Static, ConstantVelocity, Sinusoid };
  Kind kind = Kind::Static;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();   // m/s
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();  // displacement, m
  double freq_hz = 0.0;
  double phase = 0.0;
};

struct Subject {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double rcs = 1.0;  // m^2
  Motion motion;
  // Micro-motion magnitude response: fractional reflected-amplitude change
  // per meter of displacement projected on the illumination bisector (the
  // line of sight when monostatic). Motion aligned with the reflection
  // direction modulates the return hardest; transverse motion barely at all.
  double mag_mod_per_m = 0.0;
};

Eigen::Vector3d position_at(const Subject& s, double t);

struct Node {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double boresight_rad = 0.0;  // azimuth the array normal points at
  PhasedArray array;
  int n_tx_chains = 1;
  int n_rx_chains = 1;
};

void validate(const Node& node);

// World azimuth convention: 0 along +y, positive toward +x.
double azimuth_of(const Eigen::Vector3d& v);
// Bearing/elevation of a world point in the node's array frame.
double node_bearing(const Node& node, const Eigen::Vector3d& target);
double node_elevation(const Node& node, const Eigen::Vector3d& target);

struct Scene {
  std::vector<Node> aps;
  std::vector<Node> ues;
  std::vector<Subject> subjects;
};

// ----- hybrid beamformers ---------------------------------------------------

// AWVs store the array response they are matched to (beam descriptors);
// both analog stages apply the conjugate, so a beam steered with
// steer(arr, theta) is coherent at theta on either side.
struct HybridBeamformers {
  std::vector<Awv> tx_awv;      // one AWV per Tx chain
  std::vector<Awv> rx_awv;      // one AWV per Rx chain
  Eigen::MatrixXcd tx_digital;  // n_tx_chains x n_streams
  Eigen::MatrixXcd rx_digital;  // n_streams x n_rx_chains

  int n_tx_chains() const { return static_cast<int>(tx_awv.size()); }
  int n_rx_chains() const { return static_cast<int>(rx_awv.size()); }

  // Block-diagonal conjugated analog stages.
  Eigen::MatrixXcd tx_analog() const;  // (M n_tx) x n_tx
  Eigen::MatrixXcd rx_analog() const;  // n_rx x (M n_rx)
  Eigen::MatrixXcd tx_effective() const { return tx_analog() * tx_digital; }
  Eigen::MatrixXcd rx_effective() const { return rx_digital * rx_analog(); }
};

void validate(const HybridBeamformers& bf);

// All chains steered at one bearing each side, identity digital weights.
HybridBeamformers steered_beamformers(const PhasedArray& arr, int n_tx_chains,
                                      int n_rx_chains, double tx_bearing,
                                      double rx_bearing, bool quantized = true);

// ----- path-loss primitives -------------------------------------------------

// One-way free-space field amplitude lambda / (4 pi d).
double friis_amplitude(double wavelength, double distance);
// Point-scatterer field amplitude lambda sqrt(rcs) / ((4 pi)^1.5 r_tx r_rx).
double radar_amplitude(double wavelength, double rcs, double r_tx,
                       double r_rx);

// ----- channel generators ---------------------------------------------------

struct CommChannelParams {
  double k_factor_db = 10.0;   // Rician LoS-to-scatter power ratio
  int n_scatter_paths = 4;     // 0 = pure LoS
  double excess_delay_s = 30e-9;
};

// Frequency-domain link tensor [rx elements x tx elements x n_subcarriers].
// Deterministic in (nodes, cfg, params, seed).
CxTensor gen_comm_channel(const Node& tx, const Node& rx,
                          const OfdmConfig& cfg,
                          const CommChannelParams& params, std::uint64_t seed);

struct SensingImpairments {
  bool bistatic = false;
  // Monostatic timing error is constant and calibratable; bistatic links get
  // a fresh random phase and timing offset every packet.
  double mono_timing_offset_taps = 0.0;
  double bistatic_jitter_taps = 2.0;
};

// Reflection paths off every subject at scene time t. tx and rx may be the
// same node (monostatic). Per-packet impairments are derived from
// (seed, packet index = round(t * slow_time_hz)).
CxTensor gen_sensing_channel(const Node& tx, const Node& rx,
                             const std::vector<Subject>& subjects,
                             const OfdmConfig& cfg, double t,
                             std::uint64_t seed,
                             const SensingImpairments& imp = {});

// ----- Tx interference ------------------------------------------------------

struct TiParams {
  double rho = 0.9;           // lag-1 slow-time correlation
  double margin_db = 50.0;    // power above ref_power_db
  double ref_power_db = 0.0;  // strongest sensing-path power to exceed
  int spatial_modes = 2;      // leakage stays spatially low-rank
  double delay_decay_taps = 32.0;
  double bearing_slope_db = 24.0;  // power falloff from 0 deg to +-90 deg
  double ripple_db = 0.5;          // per-sector deviation from symmetry
};

// Cross-chain Tx-to-Rx leakage at the AP while it transmits on one codebook
// sector. Slow-time evolution is AR(1) with coefficient rho; the tensor for
// (sector, slot) is a pure function of (ap, cfg, params, seed, sector, slot).
class TxInterference {
 public:
  TxInterference(const Node& ap, const OfdmConfig& cfg, const TiParams& params,
                 int n_sectors, std::uint64_t seed);

  const CxTensor& at(int sector, int slot);
  double sector_power_db(int sector);  // expected power of the static part
  int n_sectors() const { return n_sectors_; }

 private:
  struct Mode {
    CxTensor base;  // unit-power spatial/delay signature
  };
  struct SectorState {
    std::vector<Mode> modes;
    std::vector<cxd> coeff;  // AR(1) state per mode
    int slot = -1;
    CxTensor cached;
    double power_scale = 0.0;
  };

  void ensure_sector(int sector);
  void advance_to(SectorState& st, int sector, int slot);

  Node ap_;
  OfdmConfig cfg_;
  TiParams params_;
  int n_sectors_;
  std::uint64_t seed_;
  std::vector<SectorState> sectors_;
};

// Convenience matching the generator vocabulary: one (sector, slot) tensor.
CxTensor gen_tx_interference(const Node& ap, const OfdmConfig& cfg,
                             const TiParams& params, int n_sectors, int sector,
                             int slot, std::uint64_t seed);

// ----- composition and the received signal ----------------------------------

// Element-wise sum of channel components (same shape required).
CxTensor compose(const std::vector<const CxTensor*>& parts);

// y_k = Rx_eff H_k Tx_eff s_k + Rx_eff n_k for every subcarrier.
// s is n_streams x n_subcarriers; noise_power_dbm is the per-element,
// per-subcarrier complex noise variance. Returns n_streams x n_subcarriers.
Eigen::MatrixXcd apply_link(const CxTensor& h, const HybridBeamformers& bf,
                            const Eigen::MatrixXcd& s, double noise_power_dbm,
                            std::uint64_t seed);

// Constant-modulus pseudo-random training field, unit power per entry.
Eigen::MatrixXcd trn_field(int n_streams, int n_subcarriers,
                           std::uint64_t seed);

// ----- delay domain ---------------------------------------------------------

// Unitary IDFT along the subcarrier axis (CSI -> CIR). Parseval holds to
// machine precision. Lengths must be powers of two.
Eigen::VectorXcd csi_to_cir(const Eigen::VectorXcd& csi);
Eigen::VectorXcd cir_to_csi(const Eigen::VectorXcd& cir);
CxTensor csi_to_cir(const CxTensor& csi);

// Slow-time stack of CIRs: rows = packets, cols = delay taps.
using CirMatrix = Eigen::MatrixXcd;

// Removes the static background: subtracts the per-tap slow-time mean.
CirMatrix background_removal(const CirMatrix& cir);

}  // namespace isac
