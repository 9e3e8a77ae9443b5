// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors
//
// Sensing diversity exploitation: EKF track filtering, grid-likelihood
// location fusion across monostatic and multi-static measurements, sensing
// SNR, and the application-layer extractors (respiration rate, point clouds).

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "isac/channel.hpp"

namespace isac {

// ----- tracks and measurements -----------------------------------------------

// Planar constant-velocity track. mean = (x m, y m, vx m/s, vy m/s).
struct TrackState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double time_s = 0.0;
};

// Covariance must be symmetric within 1e-10 and positive definite.
void validate(const TrackState& st);

enum class SenseMode { Monostatic, Bistatic };

// One polar observation of a subject. A bistatic receiver shares no clock
// with the transmitter, so it carries bearing only; range is monostatic-only.
struct Measurement {
  int source = 0;  // observing node id, metadata only
  SenseMode mode = SenseMode::Monostatic;
  std::optional<double> range_m;  // required monostatic, forbidden bistatic
  double bearing_rad = 0.0;       // world azimuth seen from the sensor
  double sigma_range_m = 0.1;
  double sigma_bearing_rad = 0.02;
};

void validate(const Measurement& m);

// Cartesian position implied by one monostatic measurement alone.
Eigen::Vector2d position_fix(const Measurement& m,
                             const Eigen::Vector2d& sensor_pos);

// Predicted observation h(x): (range, bearing) from sensor_pos for a
// monostatic link, bearing only for bistatic. Throws numerical_error when
// the state sits on the sensor.
Eigen::VectorXd measurement_model(const TrackState& st, SenseMode mode,
                                  const Eigen::Vector2d& sensor_pos);

// Analytic Jacobian dh/dx of measurement_model, sized 2x4 or 1x4.
Eigen::MatrixXd measurement_jacobian(const TrackState& st, SenseMode mode,
                                     const Eigen::Vector2d& sensor_pos);

struct Innovation {
  Eigen::VectorXd residual;    // z - h(x), bearing component wrapped
  Eigen::MatrixXd covariance;  // S = H P H^T + R
  double nis = 0.0;            // residual^T S^-1 residual, for gating
};

// Constant-velocity prediction over dt_s with white-acceleration process
// noise of intensity q. The result is symmetrized; a non-positive-definite
// input covariance is a contract violation.
TrackState ekf_predict(const TrackState& st, double dt_s, double q);

// Measurement update with the analytic Jacobian of h(x) = (range, bearing)
// from sensor_pos, or bearing only for bistatic. Throws numerical_error when
// the innovation covariance is singular or the track sits on the sensor.
TrackState ekf_update(const TrackState& st, const Measurement& meas,
                      const Eigen::Vector2d& sensor_pos,
                      Innovation* innovation = nullptr);

// Plain linear Kalman update z = h x + v, v ~ N(0, r). The EKF update above
// reduces to this path once the Jacobian is fixed, so a linear measurement
// model reproduces a textbook Kalman filter exactly.
TrackState linear_update(const TrackState& st, const Eigen::MatrixXd& h,
                         const Eigen::VectorXd& z, const Eigen::MatrixXd& r,
                         Innovation* innovation = nullptr);

// ----- grid-likelihood fusion -------------------------------------------------

struct GridSpec {
  double x0_m = -5.0;
  double x1_m = 5.0;
  double y0_m = 0.0;
  double y1_m = 10.0;
  double resolution_m = 0.05;
};

// Nonnegative per-cell weights, normalized so the best cell holds 1.0.
// weights(iy, ix) covers the cell centered at (x0 + (ix+0.5) res,
// y0 + (iy+0.5) res); the linear cell index is iy * nx + ix.
struct LikelihoodGrid {
  int nx = 0, ny = 0;
  double x0_m = 0.0, y0_m = 0.0, resolution_m = 0.0;
  Eigen::MatrixXd weights;  // ny x nx

  double cell_x(int ix) const { return x0_m + (ix + 0.5) * resolution_m; }
  double cell_y(int iy) const { return y0_m + (iy + 0.5) * resolution_m; }
};

struct SensorMeasurement {
  Measurement meas;
  Eigen::Vector2d sensor_pos = Eigen::Vector2d::Zero();
};

struct FusionEstimate {
  LikelihoodGrid grid;
  Eigen::Vector2d map_point = Eigen::Vector2d::Zero();  // argmax cell center
  double halfmax_area_m2 = 0.0;  // cells with weight >= 1/2, times cell area
};

// Sums per-cell Gaussian log-likelihood terms over all measurements (range
// and bearing for monostatic, bearing only for bistatic) and exponentiates
// against the best cell. Ties on the argmax go to the lowest linear index.
// The parallel flag only distributes rows; output is bit-identical.
FusionEstimate grid_fuse(const std::vector<SensorMeasurement>& measurements,
                         const GridSpec& spec, bool parallel = false);

// ----- sensing SNR ------------------------------------------------------------

// Ratio of motion-band power in the mean-removed magnitude series of the
// signal taps to the same-band power of the residual-plus-noise taps, in dB.
// Both series come from the subject's delay tap over slow time. Throws
// invalid_argument when the denominator band power is zero.
double s_snr(const Eigen::VectorXcd& signal_taps,
             const Eigen::VectorXcd& residual_plus_noise_taps,
             double slow_time_hz, double band_lo_hz = 0.1,
             double band_hi_hz = 0.5);

// ----- respiration ------------------------------------------------------------

// Breath rate in breaths per minute from a slow-time CIR stack: the subject
// tap's magnitude series is mean-removed, its band-limited spectrum taken
// with a rectangular window, and the dominant line refined by a three-point
// parabolic fit. Needs at least 30 s of packets; throws detection_error when
// no band line clears the median band power by min_peak_to_median_db.
double respiration_rate(const CirMatrix& cir, int subject_tap,
                        double slow_time_hz, double band_lo_hz = 0.1,
                        double band_hi_hz = 0.5,
                        double min_peak_to_median_db = 12.0);

// ----- point cloud ------------------------------------------------------------

// One-shot fine scan: reflected power and peak-tap range per (azimuth,
// elevation) cell. Tx and Rx patterns may differ; only the resulting powers
// matter here.
struct ScanGrid {
  std::vector<double> az_rad;  // strictly ascending
  std::vector<double> el_rad;  // strictly ascending
  Eigen::MatrixXd power_db;    // az x el
  Eigen::MatrixXd range_m;     // az x el, peak-tap range per cell
};

void validate(const ScanGrid& scan);

struct Point3 {
  double x_m = 0.0, y_m = 0.0, z_m = 0.0;
};

// Cells whose power exceeds threshold_db become Cartesian points at the
// cell's peak-tap range. Azimuth 0 points along +y (toward +x for positive
// angles); elevation lifts toward +z.
std::vector<Point3> point_cloud(const ScanGrid& scan, double threshold_db);

}  // namespace isac
