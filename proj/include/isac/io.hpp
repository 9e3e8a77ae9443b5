// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Serialization for every exported artifact: fixed-schema CSV and JSON
// emitters at 9 significant digits, XYZ point clouds, a raw binary tensor
// layout, and a strict flat key=value scenario config format.

#pragma once

#include <string>
#include <vector>

#include "isac/array.hpp"
#include "isac/cancellation.hpp"
#include "isac/fusion.hpp"
#include "isac/probing.hpp"
#include "isac/sim.hpp"
#include "isac/tensor.hpp"

namespace isac {

// All floating-point output goes through this: %.9g, so every number carries
// at most 9 significant digits and re-parses to the same printed value.
// Non-finite values are a bug in the producing code and throw.
std::string fmt_g9(double v);

// The double whose shortest decimal form fmt_g9(v) prints; used to pre-round
// values handed to the JSON builder so dumps stay at 9 significant digits.
double round_g9(double v);

// ----- array ----------------------------------------------------------------

// One AWV as a JSON array of [amplitude, phase] pairs, phase in (-pi, pi].
std::string awv_json(const Awv& awv);
// A codebook as a JSON array of AWV dumps, sector order.
std::string codebook_json(const std::vector<Awv>& codebook);

// ----- channel tensors ------------------------------------------------------

// Binary layout: header of three little-endian uint64 {rx, tx, nsc}, then
// rx*tx*nsc complex doubles interleaved (re, im), subcarrier-major with each
// rx-by-tx slice in column-major order.
void write_tensor_bin(const std::string& path, const CxTensor& t);
CxTensor read_tensor_bin(const std::string& path);

// Small-case JSON: {"shape": [rx, tx, nsc], "re": [...], "im": [...]} with
// the arrays in binary-body element order.
std::string tensor_json(const CxTensor& t);
CxTensor tensor_from_json(const std::string& text);

// ----- probing --------------------------------------------------------------

// {"entries": [{"sector": k, "rssi_db": x}, ...], "best_sector": k,
//  "best_rssi_db": x}
std::string sweep_report_json(const SweepReport& r);
// Columns: sector,rssi_db,best (best = 1 on the winning row).
std::string sweep_report_csv(const SweepReport& r);

// ----- cancellation ---------------------------------------------------------

// One row per report. Columns: ti_before_db,ti_after_null_db,
// ti_after_digital_db,sensing_before_db,sensing_after_db,noise_floor_db,
// iterations,feasible,converged.
std::string cancellation_csv(const std::vector<CancellationReport>& rows);
std::string cancellation_json(const std::vector<CancellationReport>& rows);

// ----- fusion ---------------------------------------------------------------

// One point per line: "x y z" in meters at 6 decimal places.
std::string xyz_text(const std::vector<Point3>& pts);
std::string pointcloud_json(const std::vector<Point3>& pts);

// Columns: t,x,y,vx,vy,trace_p.
std::string track_csv(const std::vector<TrackPoint>& track);
std::string track_json(const std::vector<TrackPoint>& track);

// ----- sim ------------------------------------------------------------------

// Complete run summary: scalars, per-UE arrays, per-subject sensing,
// cancellation reports and the track history.
std::string metrics_json(const Metrics& m);

// Fixed-column comparative row, one per scheduler. Columns: scheduler,
// span_slots,mean_throughput_bps,mean_s_snr_db,rate_bpm,rate_error_bpm,
// range_error_m,bearing_error_rad,min_budget_margin_db. Optionals that were
// not measured leave the cell empty.
std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);
std::string baselines_csv(const BaselineTable& t);
std::string baselines_json(const BaselineTable& t);

// Columns: setting,mean_throughput_bps,mean_s_snr_db.
std::string trend_csv(const TrendTable& t);
std::string trend_json(const TrendTable& t);

// Columns: t_s,displacement_m; the shipped data/gesture_trace.csv is
// gesture_csv(synthetic_gesture_trace(20, 20), 20).
std::string gesture_csv(const std::vector<double>& trace, double fs_hz);

// ----- scenario config ------------------------------------------------------

// Flat "key = value" lines, '#' comments, blank lines ignored. Keys mirror
// ScenarioConfig (see README for the full schema); entities use indexed
// groups ap.N.*, ue.N.*, subject.N.* with indices contiguous from 0. Unknown
// or duplicate keys, malformed numbers and gaps in entity indices are all
// collected and reported in one invalid_argument. The parsed scene is not
// validated here; run validate(cfg) before use.
struct ParsedConfig {
  ScenarioConfig config;
  bool has_seed = false;  // seed key present (the CLI insists on one)
};

ParsedConfig parse_config(const std::string& text);
ParsedConfig load_config(const std::string& path);

// Writer for the same schema; parse_config(config_text(cfg)) reproduces cfg
// up to the 9-significant-digit float grid.
std::string config_text(const ScenarioConfig& cfg);

// ----- file helper ----------------------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& data);

}  // namespace isac
