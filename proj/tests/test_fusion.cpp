// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "isac/array.hpp"
#include "isac/fusion.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

TrackState diag_state(double px, double py, double vx, double vy,
                      double p_pos = 1.0, double p_vel = 1.0) {
  TrackState st;
  st.mean << px, py, vx, vy;
  st.covariance =
      Eigen::Vector4d(p_pos, p_pos, p_vel, p_vel).asDiagonal();
  return st;
}

Measurement mono_meas(double range, double bearing, double sr = 0.1,
                      double sb = 0.02) {
  Measurement m;
  m.range_m = range;
  m.bearing_rad = bearing;
  m.sigma_range_m = sr;
  m.sigma_bearing_rad = sb;
  return m;
}

Measurement bi_meas(double bearing, double sb = 0.02) {
  Measurement m;
  m.mode = SenseMode::Bistatic;
  m.bearing_rad = bearing;
  m.sigma_bearing_rad = sb;
  return m;
}

// Exact monostatic observation of `target` from `sensor`.
Measurement observe(const Eigen::Vector2d& target,
                    const Eigen::Vector2d& sensor, double sr = 0.1,
                    double sb = 0.02) {
  const Eigen::Vector2d d = target - sensor;
  return mono_meas(d.norm(), std::atan2(d.x(), d.y()), sr, sb);
}

// Perimeter walk of a 4 m x 3 m rectangle starting at (-2, 2), ccw.
Eigen::Vector2d rect_pos(double t, double v) {
  const double w = 4.0, h = 3.0, per = 2 * (w + h);
  double s = std::fmod(t * v, per);
  if (s < w) return {-2.0 + s, 2.0};
  s -= w;
  if (s < h) return {2.0, 2.0 + s};
  s -= h;
  if (s < w) return {2.0 - s, 5.0};
  s -= w;
  return {-2.0, 5.0 - s};
}

}  // namespace

// ----- validation ---------------------------------------------------------

TEST_CASE("track and measurement contracts are enforced") {
  TrackState st;
  CHECK_NOTHROW(validate(st));

  TrackState asym = st;
  asym.covariance(0, 1) = 1e-6;  // not mirrored
  CHECK_THROWS_AS(validate(asym), std::invalid_argument);

  TrackState indef = st;
  indef.covariance(2, 2) = -0.5;
  CHECK_THROWS_AS(validate(indef), std::invalid_argument);

  CHECK_NOTHROW(validate(mono_meas(2.0, 0.3)));
  CHECK_NOTHROW(validate(bi_meas(0.3)));

  Measurement bad = bi_meas(0.3);
  bad.range_m = 1.0;  // bistatic links share no clock, range is forbidden
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  Measurement no_range = mono_meas(2.0, 0.3);
  no_range.range_m.reset();
  CHECK_THROWS_AS(validate(no_range), std::invalid_argument);
  CHECK_THROWS_AS(validate(mono_meas(-1.0, 0.3)), std::invalid_argument);
  CHECK_THROWS_AS(validate(mono_meas(2.0, 0.3, -0.1)), std::invalid_argument);
  CHECK_THROWS_AS(validate(bi_meas(0.3, 0.0)), std::invalid_argument);
}

TEST_CASE("position_fix inverts the polar observation") {
  const Measurement m = mono_meas(std::sqrt(2.0), deg2rad(45.0));
  const Eigen::Vector2d p = position_fix(m, {1.0, 1.0});
  CHECK(p.x() == doctest::Approx(2.0));
  CHECK(p.y() == doctest::Approx(2.0));
  CHECK_THROWS_AS(position_fix(bi_meas(0.0), {0, 0}), std::invalid_argument);
}

// ----- ekf_predict ----------------------------------------------------------

TEST_CASE("predict advances the constant-velocity model") {
  TrackState st = diag_state(1.0, 2.0, 1.0, 0.0);
  const TrackState out = ekf_predict(st, 1.0, 0.0);
  CHECK(out.mean(0) == doctest::Approx(2.0));
  CHECK(out.mean(1) == doctest::Approx(2.0));
  CHECK(out.mean(2) == doctest::Approx(1.0));
  CHECK(out.time_s == doctest::Approx(1.0));

  // dt -> 0 limit: state unchanged.
  const TrackState tiny = ekf_predict(st, 1e-12, 1.0);
  CHECK((tiny.mean - st.mean).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((tiny.covariance - st.covariance).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK_THROWS_AS(ekf_predict(st, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ekf_predict(st, 1.0, -1.0), std::invalid_argument);
  st.covariance(3, 3) = -1.0;
  CHECK_THROWS_AS(ekf_predict(st, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("predict never shrinks the covariance trace along a track") {
  // Diagonal priors first, then covariances produced by the filter itself.
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    TrackState st = diag_state(rng.uniform(-3, 3), rng.uniform(1, 5),
                               rng.normal(), rng.normal(),
                               rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0));
    const TrackState out = ekf_predict(st, rng.uniform(0.01, 1.0),
                                       rng.uniform(0.0, 5.0));
    CHECK(out.covariance.trace() >= st.covariance.trace() - 1e-12);
  }

  TrackState st = diag_state(-2.0, 2.0, 1.0, 0.0, 0.25, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const TrackState pred = ekf_predict(st, 0.05, 0.5);
    REQUIRE(pred.covariance.trace() >= st.covariance.trace() - 1e-12);
    const Eigen::Vector2d p(rng.uniform(-3, 3), rng.uniform(1, 5));
    Measurement m = observe(p, {0, 0}, 0.1, 0.03);
    *m.range_m = std::max(0.01, *m.range_m + 0.1 * rng.normal());
    m.bearing_rad += 0.03 * rng.normal();
    st = ekf_update(pred, m, {0, 0});
  }
}

// ----- ekf_update -----------------------------------------------------------

TEST_CASE("repeated exact measurements pull the mean onto the target") {
  const Eigen::Vector2d target(1.0, 2.0), sensor(0, 0);
  const Measurement m = observe(target, sensor, 0.05, 0.02);
  TrackState st = diag_state(1.5, 1.3, 0.0, 0.0, 1.0, 0.5);
  for (int k = 0; k < 20; ++k) {
    st = ekf_predict(st, 0.05, 0.5);
    st = ekf_update(st, m, sensor);
  }
  CHECK((st.mean.head<2>() - target).norm() <= 0.01);
}

TEST_CASE("analytic jacobian matches central finite differences") {
  Rng rng(17);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    TrackState st = diag_state(rng.uniform(-5, 5), rng.uniform(0.5, 8),
                               rng.normal(), rng.normal());
    const Eigen::Vector2d sensor(rng.uniform(-2, 2), rng.uniform(-2, 0.2));
    if ((st.mean.head<2>() - sensor).norm() < 0.3) continue;
    for (SenseMode mode : {SenseMode::Monostatic, SenseMode::Bistatic}) {
      const Eigen::MatrixXd h = measurement_jacobian(st, mode, sensor);
      Eigen::MatrixXd fd(h.rows(), 4);
      const double eps = 1e-6;
      for (int j = 0; j < 4; ++j) {
        TrackState lo = st, hi = st;
        lo.mean(j) -= eps;
        hi.mean(j) += eps;
        Eigen::VectorXd diff = measurement_model(hi, mode, sensor) -
                               measurement_model(lo, mode, sensor);
        if (h.rows() == 2) diff(1) = wrap_angle(diff(1));
        else diff(0) = wrap_angle(diff(0));
        fd.col(j) = diff / (2 * eps);
      }
      const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
      worst = std::max(worst, (h - fd).cwiseAbs().maxCoeff() / scale);
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("linear measurement model reproduces a textbook kalman filter") {
  Rng rng(23);
  TrackState st = diag_state(0.5, 2.0, 1.0, -0.3, 0.8, 0.4);
  for (int k = 0; k < 50; ++k) {
    // Observe both positions directly: h = [I2 0].
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 4);
    h(0, 0) = h(1, 1) = 1.0;
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
    r(0, 0) = 0.01;
    r(1, 1) = 0.02;
    Eigen::VectorXd z(2);
    z << st.mean(0) + 0.1 * rng.normal(), st.mean(1) + 0.1 * rng.normal();

    // Textbook update written out longhand.
    const Eigen::MatrixXd s = h * st.covariance * h.transpose() + r;
    const Eigen::MatrixXd gain = st.covariance * h.transpose() * s.inverse();
    const Eigen::Vector4d mean_ref = st.mean + gain * (z - h * st.mean);
    const Eigen::Matrix4d p_ref =
        (Eigen::Matrix4d::Identity() - gain * h) * st.covariance;

    Innovation innov;
    const TrackState out = linear_update(st, h, z, r, &innov);
    CHECK((out.mean - mean_ref).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((out.covariance - p_ref).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(innov.nis ==
          doctest::Approx((z - h * st.mean)
                              .dot(s.inverse() * (z - h * st.mean))));
    st = ekf_predict(out, 0.1, 0.3);
  }

  // Shape contracts.
  const Eigen::MatrixXd h3 = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(linear_update(st, h3, Eigen::VectorXd::Zero(2),
                                Eigen::MatrixXd::Identity(2, 2), nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(linear_update(st, Eigen::MatrixXd::Zero(2, 4),
                                Eigen::VectorXd::Zero(1),
                                Eigen::MatrixXd::Identity(2, 2), nullptr),
                  std::invalid_argument);
}

TEST_CASE("degenerate updates raise numerical errors") {
  TrackState st = diag_state(1.0, 2.0, 0.0, 0.0);
  // Zero measurement map with zero noise: singular innovation covariance.
  CHECK_THROWS_AS(linear_update(st, Eigen::MatrixXd::Zero(1, 4),
                                Eigen::VectorXd::Zero(1),
                                Eigen::MatrixXd::Zero(1, 1), nullptr),
                  numerical_error);
  // Track sitting on the sensor has no defined bearing.
  CHECK_THROWS_AS(ekf_update(st, mono_meas(1.0, 0.0), {1.0, 2.0}),
                  numerical_error);
}

TEST_CASE("covariance stays symmetric positive definite through random cycles") {
  Rng rng(31);
  TrackState st = diag_state(0.0, 3.0, 0.5, 0.2);
  for (int k = 0; k < 10000; ++k) {
    st = ekf_predict(st, rng.uniform(0.01, 0.5), rng.uniform(0.0, 2.0));
    const Eigen::Vector2d sensor(rng.uniform(-4, 4), rng.uniform(-4, 0));
    Measurement m;
    if (rng.uniform() < 0.5) {
      m = observe({rng.uniform(-3, 3), rng.uniform(1, 6)}, sensor,
                  rng.uniform(0.02, 0.3), rng.uniform(0.005, 0.1));
    } else {
      m = bi_meas(rng.uniform(-1.2, 1.2), rng.uniform(0.005, 0.1));
    }
    st = ekf_update(st, m, sensor);
    // validate() checks symmetry within 1e-10 and positive eigenvalues.
    REQUIRE_NOTHROW(validate(st));
  }
}

TEST_CASE("filtering beats raw position fixes on the rectangle path") {
  double se_raw = 0, se_ekf = 0;
  int n = 0;
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(99, seed));
    const double dt = 0.05, v = 1.0;
    TrackState st;
    bool init = false;
    for (int k = 0; k < 560; ++k) {
      const Eigen::Vector2d p = rect_pos(k * dt, v);
      Measurement m = observe(p, {0, 0}, 0.1, 0.0349);
      *m.range_m = std::max(0.01, *m.range_m + 0.1 * rng.normal());
      m.bearing_rad += 0.0349 * rng.normal();
      const Eigen::Vector2d fix = position_fix(m, {0, 0});
      if (!init) {
        st = diag_state(fix.x(), fix.y(), 0.0, 0.0, 0.25, 1.0);
        init = true;
      } else {
        st = ekf_predict(st, dt, 0.5);
        st = ekf_update(st, m, {0, 0});
      }
      if (k >= 40) {  // settle-in
        se_raw += (fix - p).squaredNorm();
        se_ekf += (st.mean.head<2>() - p).squaredNorm();
        ++n;
      }
    }
  }
  REQUIRE(n > 0);
  const double ratio = std::sqrt(se_ekf / se_raw);
  CHECK(ratio <= 0.7);  // observed 0.511 on this scene
}

// ----- grid_fuse ------------------------------------------------------------

TEST_CASE("a single bearing fans out into a wedge along the ray") {
  const double bearing = deg2rad(30.0);
  GridSpec spec{-5, 5, 0, 6, 0.05};
  const FusionEstimate e =
      grid_fuse({{bi_meas(bearing, 0.03), Eigen::Vector2d(0, 0)}}, spec);

  CHECK(e.grid.weights.allFinite());
  CHECK(e.grid.weights.maxCoeff() == doctest::Approx(1.0));
  CHECK(e.grid.weights.minCoeff() >= 0.0);

  // MAP sits on the bearing line.
  const double map_bearing = std::atan2(e.map_point.x(), e.map_point.y());
  CHECK(std::abs(wrap_angle(map_bearing - bearing)) <= 0.03);

  // Halfmax cells stay within ~1.2 sigma of the ray but span many ranges.
  double rmin = 1e9, rmax = 0;
  for (int iy = 0; iy < e.grid.ny; ++iy)
    for (int ix = 0; ix < e.grid.nx; ++ix)
      if (e.grid.weights(iy, ix) >= 0.5) {
        const double cx = e.grid.cell_x(ix), cy = e.grid.cell_y(iy);
        const double cb = std::atan2(cx, cy);
        CHECK(std::abs(wrap_angle(cb - bearing)) <= 1.2 * 0.03 + 0.05);
        const double r = std::hypot(cx, cy);
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
      }
  CHECK(rmax - rmin > 3.0);  // ray-shaped, not a blob

  CHECK_THROWS_AS(grid_fuse({}, spec), std::invalid_argument);
}

TEST_CASE("one orthogonal bistatic bearing cuts the monostatic hot spot") {
  const Eigen::Vector2d target(0.0, 3.0), ap(0, 0), ue(3.0, 3.0);
  GridSpec spec{-5, 5, 0, 6, 0.04};
  std::vector<SensorMeasurement> ms = {{observe(target, ap, 0.12, 0.0524), ap}};
  const double mono_area = grid_fuse(ms, spec).halfmax_area_m2;

  const Eigen::Vector2d d = target - ue;  // ray arrives 90 degrees off the LoS
  ms.push_back({bi_meas(std::atan2(d.x(), d.y()), 0.0524), ue});
  const double both_area = grid_fuse(ms, spec).halfmax_area_m2;
  CHECK(both_area < mono_area);
}

TEST_CASE("hot spot shrinks with each added sensing modality") {
  const Eigen::Vector2d target(1.2, 2.6), ap(0, 0);
  const std::vector<Eigen::Vector2d> ues = {{3.0, 1.0}, {-2.5, 2.0},
                                            {1.5, 5.0}};
  GridSpec spec{-5, 5, 0, 6, 0.04};
  std::vector<SensorMeasurement> ms = {{observe(target, ap, 0.12, 0.0524), ap}};

  std::vector<double> areas = {grid_fuse(ms, spec).halfmax_area_m2};
  for (const Eigen::Vector2d& ue : ues) {
    const Eigen::Vector2d d = target - ue;
    ms.push_back({bi_meas(std::atan2(d.x(), d.y()), 0.0524), ue});
    areas.push_back(grid_fuse(ms, spec).halfmax_area_m2);
  }

  REQUIRE(areas.size() == 4);
  for (std::size_t i = 1; i < areas.size(); ++i) CHECK(areas[i] < areas[i - 1]);
  // Calibrated values for this fixed geometry.
  CHECK(areas[0] == doctest::Approx(0.0832).epsilon(0.05));
  CHECK(areas[3] == doctest::Approx(0.0400).epsilon(0.05));

  const FusionEstimate last = grid_fuse(ms, spec);
  CHECK((last.map_point - target).norm() <= 0.06);  // within ~1.5 cells
}

TEST_CASE("consistent appends never grow the halfmax area") {
  GridSpec spec{-5, 5, 0, 6, 0.05};
  for (int trial = 0; trial < 300; ++trial) {
    Rng rng(derive_seed(11, trial));
    const Eigen::Vector2d target(rng.uniform(-3, 3), rng.uniform(1.5, 5.5));
    std::vector<SensorMeasurement> ms;
    double prev = -1;
    for (int j = 0; j < 5; ++j) {
      const Eigen::Vector2d sensor(rng.uniform(-5, 5), rng.uniform(-1, 1));
      const Eigen::Vector2d d = target - sensor;
      Measurement m;
      if (j == 0) {
        m = observe(target, sensor, rng.uniform(0.05, 0.2),
                    rng.uniform(0.02, 0.08));
      } else {
        m = bi_meas(std::atan2(d.x(), d.y()), rng.uniform(0.02, 0.08));
      }
      ms.push_back({m, sensor});
      const double area = grid_fuse(ms, spec).halfmax_area_m2;
      if (prev >= 0) REQUIRE(area <= prev + 1e-12);
      prev = area;
    }
    // A flat likelihood (near-infinite noise) must leave the area unchanged.
    ms.push_back({bi_meas(rng.uniform(-1, 1), 1e9),
                  Eigen::Vector2d(rng.uniform(-5, 5), -1.0)});
    REQUIRE(grid_fuse(ms, spec).halfmax_area_m2 == prev);
  }
}

TEST_CASE("argmax ties resolve to the lowest linear cell index") {
  // A bearing of 0 from far below the grid is symmetric in x, so the two
  // center columns tie exactly; the winner must be the leftmost of the top
  // row (highest likelihood row, lowest linear index within it).
  GridSpec spec{-1, 1, 0, 2, 0.5};
  const FusionEstimate e =
      grid_fuse({{bi_meas(0.0, 0.05), Eigen::Vector2d(0, -100)}}, spec);
  CHECK(e.grid.nx == 4);
  CHECK(e.grid.ny == 4);
  CHECK(e.grid.weights(3, 1) == e.grid.weights(3, 2));  // exact mirror pair
  CHECK(e.map_point.x() == doctest::Approx(-0.25));
  CHECK(e.map_point.y() == doctest::Approx(1.75));
}

TEST_CASE("parallel grid fusion is bit-identical to serial") {
  Rng rng(41);
  std::vector<SensorMeasurement> ms;
  const Eigen::Vector2d target(0.7, 3.4);
  for (int j = 0; j < 4; ++j) {
    const Eigen::Vector2d sensor(rng.uniform(-4, 4), rng.uniform(-2, 0));
    const Eigen::Vector2d d = target - sensor;
    Measurement m;
    if (j == 0) m = observe(target, sensor, 0.1, 0.03);
    else m = bi_meas(std::atan2(d.x(), d.y()) + 0.02 * rng.normal(), 0.03);
    ms.push_back({m, sensor});
  }
  GridSpec spec{-5, 5, 0, 8, 0.05};
  const FusionEstimate serial = grid_fuse(ms, spec, false);
  const FusionEstimate par = grid_fuse(ms, spec, true);
  REQUIRE(serial.grid.weights.rows() == par.grid.weights.rows());
  CHECK((serial.grid.weights.array() == par.grid.weights.array()).all());
  CHECK(serial.map_point == par.map_point);
  CHECK(serial.halfmax_area_m2 == par.halfmax_area_m2);
}

// ----- s_snr ----------------------------------------------------------------

TEST_CASE("s_snr reports exact ratios for constructed series") {
  const int n = 200;
  const double fs = 20.0;
  Eigen::VectorXcd sig(n), noise(n);
  Rng rng(7);
  for (int t = 0; t < n; ++t) {
    sig(t) = cxd(1.0 + 0.3 * std::sin(2 * pi * 0.25 * t / fs), 0.0);
    noise(t) = 0.05 * rng.cnormal();
  }
  CHECK(s_snr(sig, sig, fs) == doctest::Approx(0.0));
  // Scaling the signal magnitudes by sqrt(10) adds exactly 10 dB.
  const Eigen::VectorXcd boosted = std::sqrt(10.0) * sig;
  CHECK(s_snr(boosted, sig, fs) ==
        doctest::Approx(s_snr(sig, sig, fs) + 10.0).epsilon(1e-9));

  // Constant denominator has zero band power after mean removal.
  const Eigen::VectorXcd flat = Eigen::VectorXcd::Constant(n, cxd(1.0, 0.0));
  CHECK_THROWS_AS(s_snr(sig, flat, fs), std::invalid_argument);
  CHECK_THROWS_AS(s_snr(sig, noise.head(n - 1), fs), std::invalid_argument);
  CHECK_THROWS_AS(s_snr(sig, noise, fs, 0.1, 11.0), std::invalid_argument);
}

TEST_CASE("bistatic geometry recovers a transverse gesture the monostatic link misses") {
  OfdmConfig ofdm;
  ofdm.n_subcarriers = 64;
  Node apn, uen;
  apn.position = {0, 0, 0};
  apn.n_tx_chains = apn.n_rx_chains = 1;
  uen.position = {4, 3, 0};
  uen.n_tx_chains = uen.n_rx_chains = 1;
  Subject s;
  s.position = {0, 3, 0};
  s.motion.kind = Motion::Kind::Sinusoid;
  s.motion.freq_hz = 1.5;
  s.motion.amplitude = {0.02, 0, 0};  // transverse to the AP line of sight
  s.mag_mod_per_m = 20.0;
  uen.boresight_rad = azimuth_of(s.position - uen.position);

  const double az_ap = azimuth_of(s.position - apn.position);
  HybridBeamformers bf_mono = steered_beamformers(apn.array, 1, 1, az_ap, az_ap);
  HybridBeamformers bf_bi = steered_beamformers(apn.array, 1, 1, az_ap, 0.0);
  bf_bi.rx_awv[0] = quantize(steer(uen.array, node_bearing(uen, s.position)),
                             uen.array.phase_bits, uen.array.amp_bits);
  SensingImpairments bi_imp;
  bi_imp.bistatic = true;

  const int n_pkt = 256, nsc = ofdm.n_subcarriers;
  const Eigen::MatrixXcd tm = bf_mono.tx_effective(), rm = bf_mono.rx_effective();
  const Eigen::MatrixXcd tb = bf_bi.tx_effective(), rb = bf_bi.rx_effective();
  Eigen::VectorXcd mono_series(n_pkt), bi_series(n_pkt);
  for (int pk = 0; pk < n_pkt; ++pk) {
    const double t = pk / ofdm.slow_time_hz;
    CxTensor hm = gen_sensing_channel(apn, apn, {s}, ofdm, t, 42);
    CxTensor hb = gen_sensing_channel(apn, uen, {s}, ofdm, t, 42, bi_imp);
    Eigen::VectorXcd cm(nsc), cb(nsc);
    for (int k = 0; k < nsc; ++k) {
      cm(k) = (rm * hm.slice(k) * tm)(0, 0);
      cb(k) = (rb * hb.slice(k) * tb)(0, 0);
    }
    const Eigen::VectorXcd girm = csi_to_cir(cm), girb = csi_to_cir(cb);
    // The bistatic link jitters in timing, so track the per-packet peak tap.
    int tap = 0;
    girm.cwiseAbs().maxCoeff(&tap);
    mono_series(pk) = girm(tap);
    girb.cwiseAbs().maxCoeff(&tap);
    bi_series(pk) = girb(tap);
  }

  // Common noise reference scaled to the link budget.
  const double floor_amp = 1e-2 * mono_series.cwiseAbs().mean();
  Rng nrng(5);
  Eigen::VectorXcd noise(n_pkt);
  for (int pk = 0; pk < n_pkt; ++pk) noise(pk) = floor_amp * nrng.cnormal();

  const double ssnr_m = s_snr(mono_series, noise, ofdm.slow_time_hz, 1.0, 2.0);
  const double ssnr_b = s_snr(bi_series, noise, ofdm.slow_time_hz, 1.0, 2.0);
  CHECK(std::isfinite(ssnr_m));
  CHECK(ssnr_b >= ssnr_m + 2.0);
}

// ----- respiration ------------------------------------------------------------

namespace {

// Slow-time CIR stack of one breathing subject seen by a steered AP.
CirMatrix breathing_cir(double freq_hz, double amp_m, int n_pkt,
                        const OfdmConfig& ofdm, int* tap_out) {
  Node apn;
  apn.position = {0, 0, 0};
  apn.n_tx_chains = apn.n_rx_chains = 1;
  const double bearing = deg2rad(15.0), range = 3.0;
  Subject s;
  s.position = {range * std::sin(bearing), range * std::cos(bearing), 0};
  if (amp_m != 0.0) {
    s.motion.kind = Motion::Kind::Sinusoid;
    s.motion.freq_hz = freq_hz;
    s.motion.amplitude = -amp_m * s.position.normalized();  // chest toward AP
  }
  s.mag_mod_per_m = 20.0;
  *tap_out = static_cast<int>(std::lround(range / range_bin_m(ofdm)));

  const HybridBeamformers bf =
      steered_beamformers(apn.array, 1, 1, bearing, bearing);
  const Eigen::MatrixXcd t_eff = bf.tx_effective(), r_eff = bf.rx_effective();
  CirMatrix cir(n_pkt, ofdm.n_subcarriers);
  Rng noise_rng(123);
  for (int pk = 0; pk < n_pkt; ++pk) {
    const double t = pk / ofdm.slow_time_hz;
    CxTensor h = gen_sensing_channel(apn, apn, {s}, ofdm, t, 42);
    Eigen::VectorXcd csi(ofdm.n_subcarriers);
    for (int k = 0; k < ofdm.n_subcarriers; ++k)
      csi(k) = (r_eff * h.slice(k) * t_eff)(0, 0) + 1e-9 * noise_rng.cnormal();
    cir.row(pk) = csi_to_cir(csi).transpose();
  }
  return cir;
}

}  // namespace

TEST_CASE("a quarter-hertz chest motion reads fifteen breaths per minute") {
  OfdmConfig ofdm;
  ofdm.n_subcarriers = 64;
  int tap = 0;
  const CirMatrix cir = breathing_cir(0.25, 0.003, 1200, ofdm, &tap);
  const double bpm = respiration_rate(cir, tap, ofdm.slow_time_hz);
  CHECK(std::abs(bpm - 15.0) <= 0.5);

  // Rate only depends on where the band peak sits, not on overall scale.
  CHECK(respiration_rate(3.7 * cir, tap, ofdm.slow_time_hz) == bpm);

  CHECK_THROWS_AS(respiration_rate(cir, -1, ofdm.slow_time_hz),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      respiration_rate(cir.topRows(400), tap, ofdm.slow_time_hz),
      std::invalid_argument);  // 20 s of packets, below the 30 s floor
}

TEST_CASE("a static subject yields no respiration line") {
  OfdmConfig ofdm;
  ofdm.n_subcarriers = 64;
  int tap = 0;
  const CirMatrix cir = breathing_cir(0.25, 0.0, 640, ofdm, &tap);
  CHECK_THROWS_AS(respiration_rate(cir, tap, ofdm.slow_time_hz),
                  detection_error);
}

// ----- point cloud ------------------------------------------------------------

TEST_CASE("spherical cells map to cartesian points") {
  ScanGrid scan;
  scan.az_rad = {deg2rad(30.0)};
  scan.el_rad = {deg2rad(10.0)};
  scan.power_db = Eigen::MatrixXd::Constant(1, 1, 5.0);
  scan.range_m = Eigen::MatrixXd::Constant(1, 1, 2.0);

  const auto pts = point_cloud(scan, 0.0);
  REQUIRE(pts.size() == 1);
  const double az = deg2rad(30.0), el = deg2rad(10.0);
  CHECK(pts[0].x_m == doctest::Approx(2.0 * std::cos(el) * std::sin(az)));
  CHECK(pts[0].y_m == doctest::Approx(2.0 * std::cos(el) * std::cos(az)));
  CHECK(pts[0].z_m == doctest::Approx(2.0 * std::sin(el)));

  CHECK(point_cloud(scan, 5.0).empty());  // threshold is strict

  ScanGrid bad = scan;
  bad.range_m(0, 0) = 0.0;
  CHECK_THROWS_AS(point_cloud(bad, 0.0), std::invalid_argument);
  bad = scan;
  bad.az_rad = {0.3, 0.2};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = scan;
  bad.power_db.resize(2, 1);
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = scan;
  bad.az_rad.clear();
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("a single reflector survives thresholding near its true location") {
  // Separable az/el power pattern of a 16-element array looking at a point
  // reflector at azimuth 10 degrees, elevation 0, range 2 m.
  PhasedArray arr;
  const double az_true = deg2rad(10.0), el_true = 0.0, r_true = 2.0;
  const double range_bin = 0.075;
  ScanGrid scan;
  for (int i = 0; i < 33; ++i) scan.az_rad.push_back(deg2rad(-40 + 2.5 * i));
  for (int j = 0; j < 17; ++j) scan.el_rad.push_back(deg2rad(-20 + 2.5 * j));
  const int na = static_cast<int>(scan.az_rad.size());
  const int ne = static_cast<int>(scan.el_rad.size());
  scan.power_db.resize(na, ne);
  scan.range_m.resize(na, ne);
  for (int i = 0; i < na; ++i) {
    const Awv wa = quantize(steer(arr, scan.az_rad[i]), arr.phase_bits,
                            arr.amp_bits);
    const double ga = array_gain_db(wa, arr, az_true);
    for (int j = 0; j < ne; ++j) {
      const Awv we = quantize(steer(arr, scan.el_rad[j]), arr.phase_bits,
                              arr.amp_bits);
      scan.power_db(i, j) = ga + array_gain_db(we, arr, el_true) - 48.0;
      scan.range_m(i, j) = std::round(r_true / range_bin) * range_bin;
    }
  }

  const double peak = scan.power_db.maxCoeff();
  const auto pts = point_cloud(scan, peak - 3.0);
  REQUIRE(!pts.empty());
  const double snapped_r = std::round(r_true / range_bin) * range_bin;
  bool near_truth = false;
  for (const Point3& p : pts) {
    const double r = std::hypot(std::hypot(p.x_m, p.y_m), p.z_m);
    CHECK(std::abs(r - snapped_r) <= 1e-9);  // all share the peak-tap range
    const double az = std::atan2(p.x_m, p.y_m);
    const double el = std::asin(p.z_m / r);
    if (std::abs(az - az_true) <= deg2rad(1.3) &&
        std::abs(el - el_true) <= deg2rad(1.3))
      near_truth = true;
  }
  CHECK(near_truth);

  // Point count is non-increasing in the threshold.
  std::size_t prev = point_cloud(scan, peak - 20.0).size();
  for (double rel : {15.0, 10.0, 6.0, 3.0, 1.0, 0.0}) {
    const std::size_t count = point_cloud(scan, peak - rel).size();
    CHECK(count <= prev);
    prev = count;
  }
  CHECK(point_cloud(scan, peak).empty());
}
