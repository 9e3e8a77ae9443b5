// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace isac {

namespace {
constexpr double kSymTol = 1e-10;
}

// ----- tracks and measurements -----------------------------------------------

void validate(const TrackState& st) {
  require(std::isfinite(st.mean.sum()) && st.covariance.allFinite(),
          "TrackState: non-finite entries");
  const double asym =
      (st.covariance - st.covariance.transpose()).cwiseAbs().maxCoeff();
  require(asym <= kSymTol, "TrackState: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(st.covariance);
  require(eig.eigenvalues().minCoeff() > 0.0,
          "TrackState: covariance not positive definite");
}

void validate(const Measurement& m) {
  if (m.mode == SenseMode::Bistatic)
    require(!m.range_m.has_value(),
            "Measurement: bistatic measurements carry no range");
  else
    require(m.range_m.has_value() && *m.range_m > 0.0,
            "Measurement: monostatic measurements need a positive range");
  require(m.sigma_bearing_rad > 0.0, "Measurement: sigma_bearing must be > 0");
  if (m.mode == SenseMode::Monostatic)
    require(m.sigma_range_m > 0.0, "Measurement: sigma_range must be > 0");
  require(std::isfinite(m.bearing_rad), "Measurement: bearing must be finite");
}

Eigen::Vector2d position_fix(const Measurement& m,
                             const Eigen::Vector2d& sensor_pos) {
  validate(m);
  require(m.mode == SenseMode::Monostatic,
          "position_fix: needs a monostatic (range and bearing) measurement");
  return sensor_pos + *m.range_m * Eigen::Vector2d(std::sin(m.bearing_rad),
                                                   std::cos(m.bearing_rad));
}

TrackState ekf_predict(const TrackState& st, double dt_s, double q) {
  validate(st);
  require(dt_s > 0.0, "ekf_predict: dt must be positive");
  require(q >= 0.0, "ekf_predict: process noise intensity must be >= 0");

  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt_s;
  f(1, 3) = dt_s;

  // White-acceleration process noise, one block per axis.
  const double q3 = q * dt_s * dt_s * dt_s / 3.0;
  const double q2 = q * dt_s * dt_s / 2.0;
  const double q1 = q * dt_s;
  Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
  qm(0, 0) = qm(1, 1) = q3;
  qm(2, 2) = qm(3, 3) = q1;
  qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = q2;

  TrackState out;
  out.mean = f * st.mean;
  Eigen::Matrix4d p = f * st.covariance * f.transpose() + qm;
  out.covariance = 0.5 * (p + p.transpose());
  out.time_s = st.time_s + dt_s;
  return out;
}

namespace {

// Range and bearing of the track as seen from the sensor; the shared
// geometry behind the measurement model and its Jacobian.
struct Polar {
  double dx, dy, r2, rng, bearing;
};

Polar polar_of(const TrackState& st, const Eigen::Vector2d& sensor_pos) {
  Polar p;
  p.dx = st.mean(0) - sensor_pos.x();
  p.dy = st.mean(1) - sensor_pos.y();
  p.r2 = p.dx * p.dx + p.dy * p.dy;
  p.rng = std::sqrt(p.r2);
  if (!(p.rng > 1e-9))
    throw numerical_error("ekf_update: track collapsed onto the sensor");
  p.bearing = std::atan2(p.dx, p.dy);
  return p;
}

// Shared gain/update path: given the linearized model (h, residual, r),
// applies the Kalman gain with the Joseph-form covariance update.
TrackState kalman_step(const TrackState& st, const Eigen::MatrixXd& h,
                       const Eigen::VectorXd& residual,
                       const Eigen::MatrixXd& r, Innovation* innovation) {
  const Eigen::MatrixXd s = h * st.covariance * h.transpose() + r;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw numerical_error("ekf_update: singular innovation covariance");

  const Eigen::MatrixXd k =
      llt.solve(h * st.covariance.transpose()).transpose();
  TrackState out = st;
  out.mean += k * residual;
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  Eigen::Matrix4d p =
      ikh * st.covariance * ikh.transpose() + k * r * k.transpose();
  out.covariance = 0.5 * (p + p.transpose());

  if (innovation) {
    innovation->residual = residual;
    innovation->covariance = s;
    innovation->nis = residual.dot(llt.solve(residual));
  }
  return out;
}

}  // namespace

Eigen::VectorXd measurement_model(const TrackState& st, SenseMode mode,
                                  const Eigen::Vector2d& sensor_pos) {
  const Polar p = polar_of(st, sensor_pos);
  if (mode == SenseMode::Monostatic) {
    Eigen::VectorXd z(2);
    z << p.rng, p.bearing;
    return z;
  }
  Eigen::VectorXd z(1);
  z << p.bearing;
  return z;
}

Eigen::MatrixXd measurement_jacobian(const TrackState& st, SenseMode mode,
                                     const Eigen::Vector2d& sensor_pos) {
  const Polar p = polar_of(st, sensor_pos);
  if (mode == SenseMode::Monostatic) {
    Eigen::MatrixXd h(2, 4);
    h << p.dx / p.rng, p.dy / p.rng, 0, 0, p.dy / p.r2, -p.dx / p.r2, 0, 0;
    return h;
  }
  Eigen::MatrixXd h(1, 4);
  h << p.dy / p.r2, -p.dx / p.r2, 0, 0;
  return h;
}

TrackState ekf_update(const TrackState& st, const Measurement& meas,
                      const Eigen::Vector2d& sensor_pos,
                      Innovation* innovation) {
  validate(st);
  validate(meas);

  const Eigen::VectorXd pred = measurement_model(st, meas.mode, sensor_pos);
  const Eigen::MatrixXd h = measurement_jacobian(st, meas.mode, sensor_pos);
  if (meas.mode == SenseMode::Monostatic) {
    Eigen::VectorXd residual(2);
    residual << *meas.range_m - pred(0),
        wrap_angle(meas.bearing_rad - pred(1));
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
    r(0, 0) = meas.sigma_range_m * meas.sigma_range_m;
    r(1, 1) = meas.sigma_bearing_rad * meas.sigma_bearing_rad;
    return kalman_step(st, h, residual, r, innovation);
  }
  Eigen::VectorXd residual(1);
  residual << wrap_angle(meas.bearing_rad - pred(0));
  Eigen::MatrixXd r(1, 1);
  r(0, 0) = meas.sigma_bearing_rad * meas.sigma_bearing_rad;
  return kalman_step(st, h, residual, r, innovation);
}

TrackState linear_update(const TrackState& st, const Eigen::MatrixXd& h,
                         const Eigen::VectorXd& z, const Eigen::MatrixXd& r,
                         Innovation* innovation) {
  validate(st);
  require(h.cols() == 4, "linear_update: h must have 4 columns");
  require(z.size() == h.rows(), "linear_update: z size != h rows");
  require(r.rows() == h.rows() && r.cols() == h.rows(),
          "linear_update: r shape mismatch");
  return kalman_step(st, h, z - h * st.mean, r, innovation);
}

// ----- grid-likelihood fusion -------------------------------------------------

FusionEstimate grid_fuse(const std::vector<SensorMeasurement>& measurements,
                         const GridSpec& spec, bool parallel) {
  require(!measurements.empty(), "grid_fuse: needs at least one measurement");
  require(spec.x1_m > spec.x0_m && spec.y1_m > spec.y0_m,
          "grid_fuse: grid extents must be positive");
  require(spec.resolution_m > 0.0, "grid_fuse: resolution must be positive");
  for (const SensorMeasurement& sm : measurements) validate(sm.meas);

  const int nx =
      static_cast<int>(std::llround((spec.x1_m - spec.x0_m) /
                                    spec.resolution_m));
  const int ny =
      static_cast<int>(std::llround((spec.y1_m - spec.y0_m) /
                                    spec.resolution_m));
  require(nx >= 1 && ny >= 1, "grid_fuse: grid has no cells");

  LikelihoodGrid grid;
  grid.nx = nx;
  grid.ny = ny;
  grid.x0_m = spec.x0_m;
  grid.y0_m = spec.y0_m;
  grid.resolution_m = spec.resolution_m;

  Eigen::MatrixXd loglik(ny, nx);
#pragma omp parallel for schedule(static) if (parallel)
  for (int iy = 0; iy < ny; ++iy) {
    const double cy = grid.cell_y(iy);
    for (int ix = 0; ix < nx; ++ix) {
      const double cx = grid.cell_x(ix);
      double ll = 0.0;
      for (const SensorMeasurement& sm : measurements) {
        const double dx = cx - sm.sensor_pos.x();
        const double dy = cy - sm.sensor_pos.y();
        const double rng = std::hypot(dx, dy);
        const double bearing = std::atan2(dx, dy);
        const double db =
            wrap_angle(bearing - sm.meas.bearing_rad) / sm.meas.sigma_bearing_rad;
        ll -= 0.5 * db * db;
        if (sm.meas.mode == SenseMode::Monostatic) {
          const double dr = (rng - *sm.meas.range_m) / sm.meas.sigma_range_m;
          ll -= 0.5 * dr * dr;
        }
      }
      loglik(iy, ix) = ll;
    }
  }

  // Normalize against the best cell; first maximum in linear-index order.
  int best_ix = 0, best_iy = 0;
  double best = loglik(0, 0);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      if (loglik(iy, ix) > best) {
        best = loglik(iy, ix);
        best_iy = iy;
        best_ix = ix;
      }

  grid.weights = (loglik.array() - best).exp().matrix();

  FusionEstimate out;
  out.map_point = {grid.cell_x(best_ix), grid.cell_y(best_iy)};
  const auto above = (grid.weights.array() >= 0.5).count();
  out.halfmax_area_m2 =
      static_cast<double>(above) * spec.resolution_m * spec.resolution_m;
  out.grid = std::move(grid);
  return out;
}

// ----- spectral helpers -------------------------------------------------------

namespace {

struct BandBins {
  int lo = 0, hi = -1;
  int count() const { return hi - lo + 1; }
};

BandBins band_bins(int n, double fs, double lo_hz, double hi_hz) {
  require(n >= 2, "band spectrum: need at least two samples");
  require(fs > 0.0, "band spectrum: sample rate must be positive");
  require(lo_hz > 0.0 && hi_hz > lo_hz,
          "band spectrum: need 0 < band_lo < band_hi");
  require(hi_hz <= fs / 2.0 + 1e-12,
          "band spectrum: band exceeds the Nyquist rate");
  BandBins b;
  b.lo = std::max(1, static_cast<int>(std::ceil(lo_hz * n / fs - 1e-9)));
  b.hi = std::min(n / 2, static_cast<int>(std::floor(hi_hz * n / fs + 1e-9)));
  require(b.hi >= b.lo, "band spectrum: band holds no spectral bins");
  return b;
}

// Mean-removed magnitude series of one slow-time tap.
Eigen::VectorXd magnitude_series(const Eigen::VectorXcd& taps) {
  Eigen::VectorXd m = taps.cwiseAbs();
  return m.array() - m.mean();
}

// Rectangular-window power spectrum on the band bins only (direct DFT; the
// series length is not constrained to a power of two).
Eigen::VectorXd band_power(const Eigen::VectorXd& u, const BandBins& b) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd p(b.count());
  for (int k = b.lo; k <= b.hi; ++k) {
    cxd acc(0.0, 0.0);
    const double w = -2.0 * pi * k / n;
    for (int t = 0; t < n; ++t) acc += u(t) * std::polar(1.0, w * t);
    p(k - b.lo) = std::norm(acc);
  }
  return p;
}

}  // namespace

// ----- sensing SNR ------------------------------------------------------------

double s_snr(const Eigen::VectorXcd& signal_taps,
             const Eigen::VectorXcd& residual_plus_noise_taps,
             double slow_time_hz, double band_lo_hz, double band_hi_hz) {
  require(signal_taps.size() == residual_plus_noise_taps.size(),
          "s_snr: series lengths differ");
  const BandBins b = band_bins(static_cast<int>(signal_taps.size()),
                               slow_time_hz, band_lo_hz, band_hi_hz);
  const double num = band_power(magnitude_series(signal_taps), b).sum();
  const double den =
      band_power(magnitude_series(residual_plus_noise_taps), b).sum();
  require(den > 0.0, "s_snr: residual band power is zero");
  return db10(num / den);
}

// ----- respiration ------------------------------------------------------------

double respiration_rate(const CirMatrix& cir, int subject_tap,
                        double slow_time_hz, double band_lo_hz,
                        double band_hi_hz, double min_peak_to_median_db) {
  require(subject_tap >= 0 && subject_tap < cir.cols(),
          "respiration_rate: subject tap out of range");
  require(slow_time_hz > 0.0, "respiration_rate: slow_time_hz must be > 0");
  const int n = static_cast<int>(cir.rows());
  require(n >= 2 && n / slow_time_hz >= 30.0,
          "respiration_rate: need at least 30 s of packets");

  const BandBins b = band_bins(n, slow_time_hz, band_lo_hz, band_hi_hz);
  const Eigen::VectorXd p = band_power(magnitude_series(cir.col(subject_tap)), b);

  int peak = 0;
  for (int i = 1; i < p.size(); ++i)
    if (p(i) > p(peak)) peak = i;
  if (!(p(peak) > 0.0))
    throw detection_error("respiration_rate: no motion at the subject tap");

  std::vector<double> sorted(p.data(), p.data() + p.size());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (db10(p(peak) / median) < min_peak_to_median_db)
    throw detection_error(
        "respiration_rate: band peak does not clear the band noise");

  // Three-point parabolic refinement on the line amplitude; exact-bin lines
  // keep delta at zero because their neighbor bins vanish under the
  // rectangular window.
  double delta = 0.0;
  if (peak > 0 && peak + 1 < p.size()) {
    const double am = std::sqrt(p(peak - 1));
    const double a0 = std::sqrt(p(peak));
    const double ap = std::sqrt(p(peak + 1));
    const double denom = am - 2.0 * a0 + ap;
    if (denom != 0.0)
      delta = std::clamp(0.5 * (am - ap) / denom, -0.5, 0.5);
  }
  const double freq_hz = (b.lo + peak + delta) * slow_time_hz / n;
  return freq_hz * 60.0;
}

// ----- point cloud ------------------------------------------------------------

void validate(const ScanGrid& scan) {
  require(!scan.az_rad.empty() && !scan.el_rad.empty(),
          "ScanGrid: empty axes");
  for (std::size_t i = 1; i < scan.az_rad.size(); ++i)
    require(scan.az_rad[i] > scan.az_rad[i - 1],
            "ScanGrid: azimuth axis must be strictly ascending");
  for (std::size_t i = 1; i < scan.el_rad.size(); ++i)
    require(scan.el_rad[i] > scan.el_rad[i - 1],
            "ScanGrid: elevation axis must be strictly ascending");
  require(scan.power_db.rows() == static_cast<long>(scan.az_rad.size()) &&
              scan.power_db.cols() == static_cast<long>(scan.el_rad.size()),
          "ScanGrid: power shape does not match the axes");
  require(scan.range_m.rows() == scan.power_db.rows() &&
              scan.range_m.cols() == scan.power_db.cols(),
          "ScanGrid: range shape does not match power");
}

std::vector<Point3> point_cloud(const ScanGrid& scan, double threshold_db) {
  validate(scan);
  std::vector<Point3> points;
  for (std::size_t i = 0; i < scan.az_rad.size(); ++i)
    for (std::size_t j = 0; j < scan.el_rad.size(); ++j) {
      const long li = static_cast<long>(i), lj = static_cast<long>(j);
      if (scan.power_db(li, lj) <= threshold_db) continue;
      const double r = scan.range_m(li, lj);
      require(r > 0.0, "point_cloud: nonpositive range at a kept cell");
      const double az = scan.az_rad[i], el = scan.el_rad[j];
      points.push_back({r * std::cos(el) * std::sin(az),
                        r * std::cos(el) * std::cos(az), r * std::sin(el)});
    }
  return points;
}

}  // namespace isac
