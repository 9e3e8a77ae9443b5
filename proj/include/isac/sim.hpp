// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Scenario engine: composes probing, cancellation, scheduling and fusion per
// slot, maps post-beamforming SNR to throughput, runs the SO/CO/RR baselines
// against the BC-Set scheduler, and executes the large-scale trend sweeps.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isac/cancellation.hpp"
#include "isac/channel.hpp"
#include "isac/fusion.hpp"
#include "isac/scheduling.hpp"

namespace isac {

// ----- configuration ----------------------------------------------------------

enum class Scheduler { BcSet, RoundRobin, SenseOnly, CommOnly };

const char* scheduler_name(Scheduler s);
Scheduler parse_scheduler(const std::string& name);

struct SweepParams {
  std::vector<int> ue_counts = {1, 2, 5, 10, 20, 35, 50};
  std::vector<int> ap_counts = {1, 2, 3, 4, 6, 8};
  int trials = 500;        // per grid setting
  int n_subjects = 10;
  double area_range_m = 9.0;   // entity placement radius in front of the AP row
  double snr_ref_db = 28.0;    // post-beamforming comm SNR at ref_range
  double ref_range_m = 4.0;
  double sense_ref_db = 14.0;  // per-modality sensing SNR at ref_range
  double gesture_duration_s = 20.0;
};

// One simulated deployment. The bearing codebook size is sched.k_d; the
// cancellation pipeline's sector count is forced to match at run time.
struct ScenarioConfig {
  Scene scene;
  OfdmConfig ofdm;
  SchedParams sched;
  PipelineConfig pipeline;  // sector / tx width / rx sector set per BC-Set
  CommChannelParams comm;
  double slot_duration_s = 0.05;
  double duration_s = 60.0;
  Scheduler scheduler = Scheduler::BcSet;
  std::uint64_t seed = 1;
  double efficiency = 0.8;       // spectral efficiency fraction of Shannon
  double cap_bps = 8e9;          // modulation ceiling
  double comm_noise_db = -65.0;  // post-beamforming noise reference power
  double band_lo_hz = 0.1;       // motion band for S-SNR / respiration
  double band_hi_hz = 0.5;
  double rebeam_interval_s = 0.5;  // re-schedule cadence for moving subjects
  double track_q = 0.5;            // EKF process noise intensity
  SweepParams sweep;
};

// Throws invalid_argument listing every violated constraint, not just the
// first one.
void validate(const ScenarioConfig& cfg);

// ----- metrics ------------------------------------------------------------------

struct SubjectSensing {
  int subject = 0;
  double duty = 0.0;  // fraction of slots with a sensing receive on it
  double s_snr_db = db_floor;
  std::optional<double> range_error_m;
  std::optional<double> bearing_error_rad;
  std::optional<double> rate_bpm;
  std::optional<double> rate_error_bpm;
};

// One filter posterior along a moving-subject track.
struct TrackPoint {
  double t_s = 0.0;
  double x_m = 0.0;
  double y_m = 0.0;
  double vx_mps = 0.0;
  double vy_mps = 0.0;
  double trace_p = 0.0;  // posterior covariance trace
};

struct Metrics {
  Scheduler scheduler = Scheduler::BcSet;
  int span_slots = 0;  // schedule cycle length
  int n_slots = 0;     // slots simulated
  std::vector<double> ue_throughput_bps;
  std::vector<double> ue_snr_db;
  double mean_throughput_bps = 0.0;
  double mean_s_snr_db = db_floor;  // over subjects that were sensed
  std::vector<SubjectSensing> sensing;
  std::optional<double> tracking_rmse_m;
  std::vector<TrackPoint> track;  // filter history, moving scenes only
  std::vector<CancellationReport> cancellation;
  // Smallest gap between the link-budget ceiling (path amplitudes times both
  // array gains, with fading headroom) and the realized post-beamforming
  // power; negative means the energy accounting is broken.
  double min_budget_margin_db = 1e9;
};

void validate(const Metrics& m);

// ----- rate map -----------------------------------------------------------------

// efficiency * bandwidth * log2(1 + snr), capped at cap_bps.
double throughput_bps(double snr_db, double bandwidth_hz, double efficiency,
                      double cap_bps = 8e9);

// ----- scenario runs --------------------------------------------------------------

// Simulates one deployment under cfg.scheduler. Work-conserving: a scheduler
// whose preferred class is absent serves the other one, so all four coincide
// on a subject-free single-UE scene. Deterministic in cfg.seed.
Metrics run_scenario(const ScenarioConfig& cfg);

struct BaselineTable {
  Metrics bcset, rr, so, co;
};

// All four schedulers on the same scene and seed.
BaselineTable run_baselines(const ScenarioConfig& cfg);

// ----- large-scale trend sweeps ----------------------------------------------------

struct TrendRow {
  int setting = 0;  // UE count (case 1) or AP count (case 2)
  double mean_throughput_bps = 0.0;
  double mean_s_snr_db = 0.0;
};

struct TrendTable {
  int case_id = 1;
  std::vector<TrendRow> rows;
};

// Measurement-level deployment sweep. Case 1 grows the UE population under
// one AP; case 2 grows the AP count under a fixed UE population. Comm links
// fade Rician; sensing modalities replay the bundled push-pull gesture trace
// at each link's schedule-decimated sampling rate and combine energies across
// the monostatic and UE-assisted bistatic modes. Trials parallelize across
// OpenMP threads with bit-identical reduction order.
TrendTable sweep_large_scale(int case_id, const ScenarioConfig& cfg,
                             bool parallel = true);

// ----- gesture trace ----------------------------------------------------------------

// Push-pull hand gesture displacement at time t: a 1.5 Hz stroke with a
// second-harmonic push asymmetry and a slow amplitude envelope.
double synthetic_gesture_displacement(double t_s);

// The trace sampled at fs_hz for duration_s seconds (the file shipped under
// data/ is this series at 20 Hz for 20 s).
std::vector<double> synthetic_gesture_trace(double fs_hz, double duration_s);

// ----- point-cloud scan ----------------------------------------------------------------

struct ScanParams {
  int n_az = 33;
  double az_lo_rad = deg2rad(-40.0);
  double az_hi_rad = deg2rad(40.0);
  int n_el = 17;
  double el_lo_rad = deg2rad(-20.0);
  double el_hi_rad = deg2rad(20.0);
  int el_elements = 8;        // independent vertical axis array
  int dwell_packets = 8;
  double tx_width_rad = pi / 4.0;  // floodlight Tx; the Rx sweep resolves
  double noise_db = -110.0;   // per-cell additive noise power
};

// Fine receive scan over (azimuth, elevation) with the transmit beam held at
// the wide joint pattern: per cell, dwell-averaged post-beamforming power and
// the peak-tap range. Elevation acts as an independent second axis.
ScanGrid scan_scene(const Scene& scene, const OfdmConfig& ofdm,
                    const ScanParams& params, std::uint64_t seed);

// ----- helpers ---------------------------------------------------------------------------

// Subject as seen at absolute time t0: position advanced, oscillation phase
// shifted, so motion generated from the result at local time tau matches the
// original at t0 + tau.
Subject subject_at_time(const Subject& s, double t0);

// Spearman rank correlation with average ranks on ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// ----- standard scenes --------------------------------------------------------------------

// One UE one bearing bin away from a breathing subject: the joint scheduler
// must widen one beam to hold both.
Scene respiration_scene();

// A subject walking across the field of view while a UE streams.
Scene tracking_scene();

// Two static reflectors at distinct azimuth/elevation/range plus one UE.
Scene pointcloud_scene();

}  // namespace isac
