// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/probing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isac/rng.hpp"

namespace isac {

cxd mmse_estimate(const Eigen::VectorXcd& y, const Eigen::VectorXcd& s,
                  double noise_var, double prior_var) {
  require(y.size() == s.size() && y.size() >= 1,
          "mmse_estimate: y and s must have equal nonzero length");
  require(noise_var >= 0 && prior_var >= 0,
          "mmse_estimate: variances must be >= 0");
  const cxd num = prior_var * s.dot(y);  // s.dot conjugates s
  const double den = prior_var * s.squaredNorm() + noise_var;
  if (den == 0.0) return cxd(0.0, 0.0);
  return num / den;
}

namespace {

void validate_probe(const ProbeConfig& probe) {
  require(probe.n_sectors >= 1, "ProbeConfig: n_sectors must be >= 1");
  require(probe.probe_backoff_db >= 0,
          "ProbeConfig: probe_backoff_db must be >= 0");
}

}  // namespace

SweepReport sector_sweep(const Node& tx, const Node& rx,
                         const OfdmConfig& ofdm, const ProbeConfig& probe,
                         std::uint64_t seed) {
  validate(ofdm);
  validate_probe(probe);
  validate(tx);
  validate(rx);

  const CxTensor h =
      gen_comm_channel(tx, rx, ofdm, probe.comm, derive_seed(seed, 0x5EEF));
  const double amp =
      std::sqrt(undb10(probe.tx_power_dbm) / ofdm.n_subcarriers /
                tx.n_tx_chains);
  Eigen::MatrixXcd s =
      amp * trn_field(1, ofdm.n_subcarriers, derive_seed(seed, 0x7121));

  const std::vector<Awv> book = sector_codebook(tx.array, probe.n_sectors);
  SweepReport report;
  report.entries.reserve(probe.n_sectors);
  for (int i = 0; i < probe.n_sectors; ++i) {
    HybridBeamformers bf;
    bf.tx_awv.assign(tx.n_tx_chains, book[i]);
    bf.rx_awv.assign(rx.n_rx_chains, quasi_omni(rx.array));
    bf.tx_digital = Eigen::MatrixXcd::Ones(tx.n_tx_chains, 1);
    bf.rx_digital = Eigen::MatrixXcd::Zero(1, rx.n_rx_chains);
    bf.rx_digital(0, 0) = 1.0;
    Eigen::MatrixXcd y =
        apply_link(h, bf, s, probe.noise_power_dbm, derive_seed(seed, 2, i));
    const double rssi = db10(y.cwiseAbs2().sum());
    report.entries.push_back({i, rssi});
    if (rssi > report.best_rssi_db) {
      report.best_rssi_db = rssi;
      report.best_sector = i;
    }
  }
  return report;
}

BeamTrainingResult beam_training(const Node& ap, const Node& ue,
                                 const OfdmConfig& ofdm,
                                 const ProbeConfig& probe,
                                 std::uint64_t seed) {
  BeamTrainingResult result;
  result.ap_side = sector_sweep(ap, ue, ofdm, probe, derive_seed(seed, 1));
  result.ue_side = sector_sweep(ue, ap, ofdm, probe, derive_seed(seed, 2));
  return result;
}

double estimate_bearing(const SweepReport& report, int n_sectors) {
  require(static_cast<int>(report.entries.size()) == n_sectors,
          "estimate_bearing: report does not cover the codebook");
  require(report.best_sector >= 0, "estimate_bearing: empty report");
  const int b = report.best_sector;
  const double center = sector_center(n_sectors, b);
  if (b == 0 || b == n_sectors - 1) return center;

  const double r0 = report.entries[b - 1].rssi_db;
  const double r1 = report.entries[b].rssi_db;
  const double r2 = report.entries[b + 1].rssi_db;
  const double denom = r0 - 2.0 * r1 + r2;
  double delta = 0.0;
  if (denom < 0.0) delta = 0.5 * (r0 - r2) / denom;
  delta = std::clamp(delta, -0.5, 0.5);
  return center + delta * sector_width(n_sectors);
}

TiEstimate ti_probe(const Node& ap, TxInterference& ti, int sector,
                    const std::vector<Awv>& weights, const OfdmConfig& ofdm,
                    const ProbeConfig& probe, int slot, std::uint64_t seed) {
  validate(ofdm);
  validate_probe(probe);
  require(!weights.empty(), "ti_probe: no probing weights");
  require(sector >= 0 && sector < ti.n_sectors(),
          "ti_probe: sector out of range");

  const int m = ap.array.elements;
  const int m_rx = m * ap.n_rx_chains;
  const int nsc = ofdm.n_subcarriers;
  const CxTensor& h = ti.at(sector, slot);
  const double p_probe =
      undb10(probe.tx_power_dbm - probe.probe_backoff_db) / nsc;
  const double noise_var = undb10(probe.noise_power_dbm);

  TiEstimate est;
  est.per_weight.reserve(weights.size());
  for (int j = 0; j < static_cast<int>(weights.size()); ++j) {
    require(static_cast<int>(weights[j].w.size()) == m,
            "ti_probe: probing weight length != array size");
    CxTensor eff(m_rx, ap.n_tx_chains, nsc);

    for (int n = 0; n < ap.n_tx_chains; ++n) {
      // Chains take turns: the radiated vector is the conjugated probing
      // weight in chain n's block.
      Eigen::VectorXcd t = Eigen::VectorXcd::Zero(m * ap.n_tx_chains);
      for (int e = 0; e < m; ++e) t(n * m + e) = std::conj(weights[j].w[e]);

      Rng rng(derive_seed(seed, 0x7150 + j, n));
      for (int k = 0; k < nsc; ++k) {
        const cxd s =
            std::sqrt(p_probe) * std::polar(1.0, 2 * pi * rng.uniform());
        const Eigen::VectorXcd g = h.slice(k) * t;  // true effective column
        for (int r = 0; r < m_rx; ++r) {
          const cxd y = g(r) * s + std::sqrt(noise_var) * rng.cnormal();
          // Empirical prior: coefficient power inferred from the observation.
          const double prior = std::max(
              std::norm(y) / std::max(std::norm(s), 1e-300) * 0.5, 1e-30);
          Eigen::VectorXcd yv(1), sv(1);
          yv(0) = y;
          sv(0) = s;
          eff.at(r, n, k) = mmse_estimate(yv, sv, noise_var, prior);
        }
      }
    }
    est.per_weight.push_back(std::move(eff));
  }
  return est;
}

CxTensor TiEstimate::element_level(const PhasedArray& arr,
                                   const std::vector<Awv>& weights) const {
  const int m = arr.elements;
  const int n_weights = static_cast<int>(per_weight.size());
  require(n_weights > 0, "element_level: no per-weight estimates");
  require(static_cast<int>(weights.size()) == n_weights,
          "element_level: weight count mismatch");
  require(n_weights >= m,
          "element_level: need at least as many weights as elements");

  const int m_rx = per_weight[0].rx();
  const int n_tx_chains = per_weight[0].tx();
  const int nsc = per_weight[0].nsc();

  // x_j = h_block conj(w_j) for every weight j; stack into h_block W = x and
  // solve with the pseudo-inverse of W = [conj(w_0) ... conj(w_{J-1})].
  Eigen::MatrixXcd w(m, n_weights);
  for (int j = 0; j < n_weights; ++j)
    for (int e = 0; e < m; ++e) w(e, j) = std::conj(weights[j].w[e]);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(m - 1) < 1e-8 * svd.singularValues()(0))
    throw numerical_error("element_level: probing weights are rank-deficient");
  // pinv(W), weights x elements
  Eigen::MatrixXcd pinv = svd.matrixV() *
                          svd.singularValues().cwiseInverse().asDiagonal() *
                          svd.matrixU().adjoint();

  CxTensor h(m_rx, m * n_tx_chains, nsc);
  Eigen::RowVectorXcd x(n_weights);
  for (int r = 0; r < m_rx; ++r)
    for (int n = 0; n < n_tx_chains; ++n)
      for (int k = 0; k < nsc; ++k) {
        for (int j = 0; j < n_weights; ++j) x(j) = per_weight[j].at(r, n, k);
        Eigen::RowVectorXcd row = x * pinv;  // 1 x elements
        for (int e = 0; e < m; ++e) h.at(r, n * m + e, k) = row(e);
      }
  return h;
}

std::vector<double> ti_correlation(const std::vector<CxTensor>& snapshots,
                                   int lag) {
  require(lag >= 1, "ti_correlation: lag must be >= 1");
  require(static_cast<int>(snapshots.size()) > lag,
          "ti_correlation: not enough snapshots");
  std::vector<double> corr;
  corr.reserve(snapshots.size() - lag);
  for (std::size_t i = 0; i + lag < snapshots.size(); ++i) {
    const CxTensor& a = snapshots[i];
    const CxTensor& b = snapshots[i + lag];
    const double denom = std::sqrt(a.power() * b.power());
    corr.push_back(denom > 0 ? std::abs(dot(a, b)) / denom : 0.0);
  }
  return corr;
}

double estimate_range(const Eigen::VectorXcd& cir, const OfdmConfig& cfg,
                      double calibration_taps, double min_peak_to_median_db) {
  validate(cfg);
  require(cir.size() >= 4, "estimate_range: CIR too short");

  int peak = 0;
  for (int i = 1; i < cir.size(); ++i)
    if (std::norm(cir(i)) > std::norm(cir(peak))) peak = i;
  const double peak_power = std::norm(cir(peak));
  if (peak_power <= 0.0)
    throw detection_error("estimate_range: empty CIR");

  std::vector<double> powers(cir.size());
  for (int i = 0; i < cir.size(); ++i) powers[i] = std::norm(cir(i));
  std::nth_element(powers.begin(), powers.begin() + powers.size() / 2,
                   powers.end());
  const double median = powers[powers.size() / 2];
  if (median > 0.0 &&
      db10(peak_power / median) < min_peak_to_median_db)
    throw detection_error("estimate_range: no peak above the noise floor");

  const double taps = static_cast<double>(peak) - calibration_taps;
  if (taps < 0)
    throw detection_error("estimate_range: peak before calibration offset");
  return taps * range_bin_m(cfg);
}

std::vector<Detection> detect_subjects(const std::vector<CirMatrix>& sectors,
                                       const OfdmConfig& cfg, int n_sectors,
                                       double k, double dominance_gate_db) {
  validate(cfg);
  require(static_cast<int>(sectors.size()) == n_sectors,
          "detect_subjects: one CIR stack per sector required");
  require(k > 0, "detect_subjects: k must be positive");

  std::vector<Detection> raw;
  for (int sec = 0; sec < n_sectors; ++sec) {
    require(sectors[sec].rows() >= 2,
            "detect_subjects: need at least two packets");
    require(sectors[sec].cols() == cfg.n_subcarriers,
            "detect_subjects: CIR length != subcarrier count");

    // Hann window in the frequency domain: an off-grid reflector's delay
    // skirts would otherwise fragment into ghost runs above threshold.
    CirMatrix cir = sectors[sec];
    Eigen::ArrayXd hann(cfg.n_subcarriers);
    for (int kk = 0; kk < cfg.n_subcarriers; ++kk)
      hann(kk) = 0.5 * (1.0 - std::cos(2.0 * pi * kk / cfg.n_subcarriers));
    for (int p = 0; p < cir.rows(); ++p) {
      Eigen::VectorXcd csi = cir_to_csi(cir.row(p).transpose());
      csi.array() *= hann;
      cir.row(p) = csi_to_cir(csi).transpose();
    }

    const CirMatrix moving = background_removal(cir);
    const int n_taps = static_cast<int>(moving.cols());

    Eigen::VectorXd energy(n_taps);
    for (int tap = 0; tap < n_taps; ++tap)
      energy(tap) = moving.col(tap).squaredNorm() / moving.rows();

    // Robust noise statistics: median and MAD ignore the few signal taps.
    std::vector<double> sorted(energy.data(), energy.data() + n_taps);
    std::sort(sorted.begin(), sorted.end());
    const double mu = sorted[n_taps / 2];
    std::vector<double> dev(n_taps);
    for (int i = 0; i < n_taps; ++i) dev[i] = std::abs(sorted[i] - mu);
    std::nth_element(dev.begin(), dev.begin() + n_taps / 2, dev.end());
    const double sigma = 1.4826 * dev[n_taps / 2];
    const double threshold = mu + k * sigma;

    // Contiguous above-threshold runs collapse to their strongest tap. The
    // windowed mainlobe of a real reflector spans at least two taps, so
    // single-tap runs are discarded as noise spikes.
    int tap = 0;
    while (tap < n_taps) {
      if (!(energy(tap) > threshold) || sigma == 0.0) {
        ++tap;
        continue;
      }
      int best = tap, run = 0;
      while (tap < n_taps && energy(tap) > threshold) {
        if (energy(tap) > energy(best)) best = tap;
        ++tap;
        ++run;
      }
      if (run >= 2)
        raw.push_back({sec, best, best * range_bin_m(cfg),
                       sector_center(n_sectors, sec), db10(energy(best))});
    }
  }

  // A strong reflector leaks into neighbouring sectors through the mainlobe
  // shoulder and into farther ones through sidelobes. Suppress same-delay
  // detections next to a stronger one, then gate distant sidelobe ghosts.
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return raw[a].energy_db > raw[b].energy_db;
  });
  std::vector<bool> keep(raw.size(), true);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (!keep[i]) continue;
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (j == i || !keep[j]) continue;
      if (std::abs(raw[j].tap - raw[i].tap) > 1) continue;
      const int dsec = std::abs(raw[j].sector - raw[i].sector);
      const bool weaker = raw[j].energy_db <= raw[i].energy_db;
      if (weaker && (dsec <= 1 ||
                     raw[j].energy_db < raw[i].energy_db - dominance_gate_db))
        keep[j] = false;
    }
  }

  std::vector<Detection> out;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (keep[i]) out.push_back(raw[i]);
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.sector != b.sector ? a.sector < b.sector : a.tap < b.tap;
  });
  return out;
}

std::vector<CirMatrix> monostatic_scan(const Node& ap,
                                       const std::vector<Subject>& subjects,
                                       const OfdmConfig& ofdm,
                                       const ProbeConfig& probe, int n_packets,
                                       std::uint64_t seed, TxInterference* ti) {
  validate(ofdm);
  validate_probe(probe);
  validate(ap);
  require(n_packets >= 2, "monostatic_scan: need at least two packets");

  const int nsc = ofdm.n_subcarriers;
  const std::vector<Awv> book = sector_codebook(ap.array, probe.n_sectors);
  const double amp = std::sqrt(undb10(probe.tx_power_dbm) / nsc /
                               ap.n_tx_chains);
  Eigen::MatrixXcd s =
      amp * trn_field(1, nsc, derive_seed(seed, 0x7121));

  std::vector<CirMatrix> out(probe.n_sectors,
                             CirMatrix(n_packets, nsc));
  for (int p = 0; p < n_packets; ++p) {
    const double t = p / ofdm.slow_time_hz;
    const CxTensor h_s = gen_sensing_channel(ap, ap, subjects, ofdm, t,
                                             derive_seed(seed, 0x5E25));
    for (int sec = 0; sec < probe.n_sectors; ++sec) {
      const CxTensor* h = &h_s;
      CxTensor composed;
      if (ti != nullptr) {
        composed = compose({&h_s, &ti->at(sec, p)});
        h = &composed;
      }
      HybridBeamformers bf;
      bf.tx_awv.assign(ap.n_tx_chains, book[sec]);
      bf.rx_awv.assign(ap.n_rx_chains, book[sec]);
      bf.tx_digital = Eigen::MatrixXcd::Ones(ap.n_tx_chains, 1);
      bf.rx_digital = Eigen::MatrixXcd::Zero(1, ap.n_rx_chains);
      bf.rx_digital(0, 0) = 1.0;
      Eigen::MatrixXcd y = apply_link(*h, bf, s, probe.noise_power_dbm,
                                      derive_seed(seed, 3 + sec, p));
      Eigen::VectorXcd csi(nsc);
      for (int kk = 0; kk < nsc; ++kk) csi(kk) = y(0, kk) / s(0, kk);
      out[sec].row(p) = csi_to_cir(csi).transpose();
    }
  }
  return out;
}

}  // namespace isac
