// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/channel.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "isac/rng.hpp"

namespace isac {

void validate(const OfdmConfig& cfg) {
  require(cfg.carrier_hz > 0, "OfdmConfig: carrier_hz must be positive");
  require(cfg.bandwidth_hz > 0, "OfdmConfig: bandwidth_hz must be positive");
  require(cfg.n_subcarriers >= 2 &&
              (cfg.n_subcarriers & (cfg.n_subcarriers - 1)) == 0,
          "OfdmConfig: n_subcarriers must be a power of two");
  require(cfg.slow_time_hz > 0, "OfdmConfig: slow_time_hz must be positive");
}

double wavelength_m(const OfdmConfig& cfg) {
  return speed_of_light / cfg.carrier_hz;
}

double range_bin_m(const OfdmConfig& cfg) {
  return speed_of_light / (2.0 * cfg.bandwidth_hz);
}

Eigen::Vector3d position_at(const Subject& s, double t) {
  switch (s.motion.kind) {
    case Motion::Kind::Static:
      return s.position;
    case Motion::Kind::ConstantVelocity:
      return s.position + s.motion.velocity * t;
    case Motion::Kind::Sinusoid:
      return s.position + s.motion.amplitude *
                              std::sin(2.0 * pi * s.motion.freq_hz * t +
                                       s.motion.phase);
  }
  throw std::invalid_argument("position_at: unknown motion kind");
}

void validate(const Node& node) {
  validate(node.array);
  require(node.n_tx_chains >= 0 && node.n_rx_chains >= 0 &&
              node.n_tx_chains + node.n_rx_chains > 0,
          "Node: needs at least one chain");
}

double azimuth_of(const Eigen::Vector3d& v) { return std::atan2(v.x(), v.y()); }

double node_bearing(const Node& node, const Eigen::Vector3d& target) {
  return wrap_angle(azimuth_of(target - node.position) - node.boresight_rad);
}

double node_elevation(const Node& node, const Eigen::Vector3d& target) {
  Eigen::Vector3d v = target - node.position;
  return std::atan2(v.z(), std::hypot(v.x(), v.y()));
}

// ----- hybrid beamformers ---------------------------------------------------

void validate(const HybridBeamformers& bf) {
  require(!bf.tx_awv.empty() && !bf.rx_awv.empty(),
          "HybridBeamformers: need at least one chain per side");
  const int m_tx = bf.tx_awv[0].size();
  const int m_rx = bf.rx_awv[0].size();
  for (const Awv& w : bf.tx_awv)
    require(w.size() == m_tx, "HybridBeamformers: ragged Tx AWVs");
  for (const Awv& w : bf.rx_awv)
    require(w.size() == m_rx, "HybridBeamformers: ragged Rx AWVs");
  require(bf.tx_digital.rows() == bf.n_tx_chains(),
          "HybridBeamformers: tx_digital rows != Tx chains");
  require(bf.rx_digital.cols() == bf.n_rx_chains(),
          "HybridBeamformers: rx_digital cols != Rx chains");
  require(bf.tx_digital.cols() == bf.rx_digital.rows(),
          "HybridBeamformers: stream count mismatch");
  auto amp_ok = [](const Awv& w) {
    for (const cxd& v : w.w)
      if (std::abs(v) > 1.0 + 1e-9) return false;
    return true;
  };
  for (const Awv& w : bf.tx_awv)
    require(amp_ok(w), "HybridBeamformers: Tx AWV amplitude exceeds 1");
  for (const Awv& w : bf.rx_awv)
    require(amp_ok(w), "HybridBeamformers: Rx AWV amplitude exceeds 1");
}

Eigen::MatrixXcd HybridBeamformers::tx_analog() const {
  const int n = n_tx_chains();
  const int m = tx_awv.empty() ? 0 : tx_awv[0].size();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(static_cast<long>(m) * n, n);
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < m; ++i) a(c * m + i, c) = std::conj(tx_awv[c].w[i]);
  return a;
}

Eigen::MatrixXcd HybridBeamformers::rx_analog() const {
  const int n = n_rx_chains();
  const int m = rx_awv.empty() ? 0 : rx_awv[0].size();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, static_cast<long>(m) * n);
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < m; ++i) a(c, c * m + i) = std::conj(rx_awv[c].w[i]);
  return a;
}

HybridBeamformers steered_beamformers(const PhasedArray& arr, int n_tx_chains,
                                      int n_rx_chains, double tx_bearing,
                                      double rx_bearing, bool quantized) {
  require(n_tx_chains >= 1 && n_rx_chains >= 1,
          "steered_beamformers: chain counts must be >= 1");
  Awv tx = steer(arr, tx_bearing);
  Awv rx = steer(arr, rx_bearing);
  if (quantized) {
    tx = quantize(tx, arr.phase_bits, arr.amp_bits);
    rx = quantize(rx, arr.phase_bits, arr.amp_bits);
  }
  HybridBeamformers bf;
  bf.tx_awv.assign(n_tx_chains, tx);
  bf.rx_awv.assign(n_rx_chains, rx);
  bf.tx_digital = Eigen::MatrixXcd::Ones(n_tx_chains, 1);
  bf.rx_digital = Eigen::MatrixXcd::Ones(1, n_rx_chains);
  return bf;
}

// ----- path-loss primitives -------------------------------------------------

double friis_amplitude(double wavelength, double distance) {
  require(wavelength > 0 && distance > 0,
          "friis_amplitude: wavelength and distance must be positive");
  return wavelength / (4.0 * pi * distance);
}

double radar_amplitude(double wavelength, double rcs, double r_tx,
                       double r_rx) {
  require(wavelength > 0 && rcs > 0 && r_tx > 0 && r_rx > 0,
          "radar_amplitude: all arguments must be positive");
  return wavelength * std::sqrt(rcs) /
         (std::pow(4.0 * pi, 1.5) * r_tx * r_rx);
}

// ----- generators -----------------------------------------------------------

namespace {

// Steering response of every element of a node's Tx or Rx bank (chains are
// co-located, so per-chain blocks repeat).
Eigen::VectorXcd bank_steering(const Node& node, int n_chains,
                               double bearing) {
  Eigen::VectorXcd a = steering_vector(node.array, bearing);
  Eigen::VectorXcd full(static_cast<long>(a.size()) * n_chains);
  for (int c = 0; c < n_chains; ++c) full.segment(c * a.size(), a.size()) = a;
  return full;
}

void add_path(CxTensor& h, const Eigen::VectorXcd& a_rx,
              const Eigen::VectorXcd& a_tx, cxd gain, double delay_carrier_s,
              double delay_baseband_s, const OfdmConfig& cfg) {
  const double df = cfg.bandwidth_hz / cfg.n_subcarriers;
  const cxd carrier =
      std::polar(1.0, -2.0 * pi * cfg.carrier_hz * delay_carrier_s);
  for (int k = 0; k < cfg.n_subcarriers; ++k) {
    const cxd ph =
        gain * carrier *
        std::polar(1.0, -2.0 * pi * k * df * delay_baseband_s);
    h.slice(k).noalias() += ph * (a_rx * a_tx.transpose());
  }
}

}  // namespace

CxTensor gen_comm_channel(const Node& tx, const Node& rx,
                          const OfdmConfig& cfg,
                          const CommChannelParams& params,
                          std::uint64_t seed) {
  validate(cfg);
  validate(tx);
  validate(rx);
  require(params.n_scatter_paths >= 0,
          "CommChannelParams: n_scatter_paths must be >= 0");
  require(params.excess_delay_s >= 0,
          "CommChannelParams: excess_delay_s must be >= 0");

  const double lambda = wavelength_m(cfg);
  const double d = (rx.position - tx.position).norm();
  require(d > 0, "gen_comm_channel: coincident nodes");
  const double theta_tx = node_bearing(tx, rx.position);
  const double theta_rx = node_bearing(rx, tx.position);
  require_bearing(theta_tx, "gen_comm_channel (Tx side)");
  require_bearing(theta_rx, "gen_comm_channel (Rx side)");

  const int m_rx = rx.array.elements * rx.n_rx_chains;
  const int m_tx = tx.array.elements * tx.n_tx_chains;
  CxTensor h(m_rx, m_tx, cfg.n_subcarriers);

  const double alpha = friis_amplitude(lambda, d);
  const double tau = d / speed_of_light;
  add_path(h, bank_steering(rx, rx.n_rx_chains, theta_rx),
           bank_steering(tx, tx.n_tx_chains, theta_tx), cxd(alpha, 0.0), tau,
           tau, cfg);

  if (params.n_scatter_paths > 0) {
    const double k_lin = undb10(params.k_factor_db);
    const double per_path =
        alpha / std::sqrt(k_lin * params.n_scatter_paths);
    for (int p = 0; p < params.n_scatter_paths; ++p) {
      Rng rng(derive_seed(seed, 0xC0111, p));
      const double aod = rng.uniform(-0.44 * pi, 0.44 * pi);
      const double aoa = rng.uniform(-0.44 * pi, 0.44 * pi);
      const double tau_p = tau + rng.uniform(0.0, params.excess_delay_s);
      const cxd g = per_path * rng.cnormal();
      add_path(h, bank_steering(rx, rx.n_rx_chains, aoa),
               bank_steering(tx, tx.n_tx_chains, aod), g, tau_p, tau_p, cfg);
    }
  }
  return h;
}

CxTensor gen_sensing_channel(const Node& tx, const Node& rx,
                             const std::vector<Subject>& subjects,
                             const OfdmConfig& cfg, double t,
                             std::uint64_t seed,
                             const SensingImpairments& imp) {
  validate(cfg);
  validate(tx);
  validate(rx);
  require(t >= 0, "gen_sensing_channel: t must be >= 0");

  const double lambda = wavelength_m(cfg);
  const int m_rx = rx.array.elements * rx.n_rx_chains;
  const int m_tx = tx.array.elements * tx.n_tx_chains;
  CxTensor h(m_rx, m_tx, cfg.n_subcarriers);

  // Packet-level impairments: a bistatic receiver is not phase- or
  // time-locked to the transmitter, so both offsets are redrawn per packet.
  // A monostatic receiver shares the clock; only a fixed calibratable
  // sampling offset remains.
  double offset_taps = imp.mono_timing_offset_taps;
  cxd packet_phase(1.0, 0.0);
  if (imp.bistatic) {
    const long packet = std::lround(t * cfg.slow_time_hz);
    Rng prng(derive_seed(seed, 0xB157A7 + static_cast<std::uint64_t>(packet)));
    offset_taps = prng.uniform(-imp.bistatic_jitter_taps,
                               imp.bistatic_jitter_taps);
    packet_phase = prng.unit_phase();
  }
  const double offset_s = offset_taps / cfg.bandwidth_hz;

  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Eigen::Vector3d pos = position_at(subjects[i], t);
    const double r_tx = (pos - tx.position).norm();
    const double r_rx = (pos - rx.position).norm();
    require(r_tx > 0 && r_rx > 0, "gen_sensing_channel: subject on a node");
    const double theta_tx = node_bearing(tx, pos);
    const double theta_rx = node_bearing(rx, pos);
    require_bearing(theta_tx, "gen_sensing_channel (Tx side)");
    require_bearing(theta_rx, "gen_sensing_channel (Rx side)");

    double alpha = radar_amplitude(lambda, subjects[i].rcs, r_tx, r_rx);
    if (subjects[i].mag_mod_per_m != 0.0) {
      // First-order magnitude response to micro-motion: the return strength
      // follows the displacement projected on the bisector of the two
      // illumination directions (the line of sight when tx == rx). Clamped
      // so macro-scale drifts cannot push the factor negative.
      const Eigen::Vector3d disp = pos - subjects[i].position;
      Eigen::Vector3d bis = (tx.position - pos).normalized() +
                            (rx.position - pos).normalized();
      const double bn = bis.norm();
      if (bn > 0) {
        const double proj = disp.dot(bis / bn);
        alpha *= std::clamp(1.0 + subjects[i].mag_mod_per_m * proj, 0.0, 2.0);
      }
    }
    const double tau = (r_tx + r_rx) / speed_of_light;
    add_path(h, bank_steering(rx, rx.n_rx_chains, theta_rx),
             bank_steering(tx, tx.n_tx_chains, theta_tx),
             packet_phase * alpha, tau, tau + offset_s, cfg);
  }
  return h;
}

// ----- Tx interference ------------------------------------------------------

TxInterference::TxInterference(const Node& ap, const OfdmConfig& cfg,
                               const TiParams& params, int n_sectors,
                               std::uint64_t seed)
    : ap_(ap), cfg_(cfg), params_(params), n_sectors_(n_sectors), seed_(seed) {
  validate(cfg_);
  validate(ap_);
  require(ap_.n_tx_chains >= 1 && ap_.n_rx_chains >= 1,
          "TxInterference: AP needs Tx and Rx chains");
  require(n_sectors >= 1, "TxInterference: n_sectors must be >= 1");
  require(params.rho >= 0.0 && params.rho < 1.0,
          "TiParams: rho must be in [0, 1)");
  require(params.spatial_modes >= 1, "TiParams: spatial_modes must be >= 1");
  require(params.delay_decay_taps > 0,
          "TiParams: delay_decay_taps must be positive");
  sectors_.resize(n_sectors);
}

void TxInterference::ensure_sector(int sector) {
  require(sector >= 0 && sector < n_sectors_,
          "TxInterference: sector out of range");
  SectorState& st = sectors_[sector];
  if (!st.modes.empty()) return;

  const int m_rx = ap_.array.elements * ap_.n_rx_chains;
  const int m_tx = ap_.array.elements * ap_.n_tx_chains;
  const int nsc = cfg_.n_subcarriers;

  Rng rng(derive_seed(seed_, 0x71, sector));
  st.modes.resize(params_.spatial_modes);
  for (Mode& mode : st.modes) {
    Eigen::VectorXcd u(m_rx), v(m_tx), taps(nsc);
    for (int r = 0; r < m_rx; ++r) u(r) = rng.cnormal();
    for (int c = 0; c < m_tx; ++c) v(c) = rng.cnormal();
    for (int n = 0; n < nsc; ++n)
      taps(n) = rng.cnormal() * std::exp(-n / (2.0 * params_.delay_decay_taps));
    Eigen::VectorXcd g = cir_to_csi(taps);

    mode.base = CxTensor(m_rx, m_tx, nsc);
    for (int k = 0; k < nsc; ++k)
      mode.base.slice(k) = g(k) * (u * v.transpose());
    const double norm = std::sqrt(mode.base.power());
    if (norm > 0) mode.base *= cxd(1.0 / norm, 0.0);
  }

  // Power profile over the transmit sector bearing: peaked at broadside,
  // linear falloff in |bearing| plus a small deterministic ripple.
  const double theta = sector_center(n_sectors_, sector);
  const double profile_db =
      -params_.bearing_slope_db * std::abs(theta) / (pi / 2) +
      params_.ripple_db * (2.0 * rng.uniform() - 1.0);
  st.power_scale =
      undb10(params_.ref_power_db + params_.margin_db + profile_db);
  st.coeff.assign(params_.spatial_modes, cxd(0.0, 0.0));
  st.slot = -1;
}

void TxInterference::advance_to(SectorState& st, int sector, int slot) {
  if (slot < st.slot) {  // random access backwards: replay from scratch
    st.coeff.assign(params_.spatial_modes, cxd(0.0, 0.0));
    st.slot = -1;
  }
  while (st.slot < slot) {
    ++st.slot;
    Rng rng(derive_seed(seed_, 0x7157 + static_cast<std::uint64_t>(sector),
                        st.slot));
    for (int p = 0; p < params_.spatial_modes; ++p) {
      const cxd w = rng.cnormal();
      st.coeff[p] = (st.slot == 0)
                        ? w
                        : params_.rho * st.coeff[p] +
                              std::sqrt(1.0 - params_.rho * params_.rho) * w;
    }
  }
}

const CxTensor& TxInterference::at(int sector, int slot) {
  require(slot >= 0, "TxInterference: slot must be >= 0");
  ensure_sector(sector);
  SectorState& st = sectors_[sector];
  if (st.slot == slot && !st.cached.empty()) return st.cached;
  advance_to(st, sector, slot);

  const double mode_scale =
      std::sqrt(st.power_scale / params_.spatial_modes);
  CxTensor out(st.modes[0].base.rx(), st.modes[0].base.tx(),
               st.modes[0].base.nsc());
  for (int p = 0; p < params_.spatial_modes; ++p) {
    const cxd c = mode_scale * st.coeff[p];
    const CxTensor& b = st.modes[p].base;
    for (std::size_t i = 0; i < out.size(); ++i)
      out.data()[i] += c * b.data()[i];
  }
  st.cached = std::move(out);
  return st.cached;
}

double TxInterference::sector_power_db(int sector) {
  ensure_sector(sector);
  return db10(sectors_[sector].power_scale);
}

CxTensor gen_tx_interference(const Node& ap, const OfdmConfig& cfg,
                             const TiParams& params, int n_sectors, int sector,
                             int slot, std::uint64_t seed) {
  TxInterference model(ap, cfg, params, n_sectors, seed);
  return model.at(sector, slot);
}

// ----- composition and the received signal ----------------------------------

CxTensor compose(const std::vector<const CxTensor*>& parts) {
  require(!parts.empty(), "compose: no parts");
  CxTensor sum = *parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) sum += *parts[i];
  return sum;
}

Eigen::MatrixXcd apply_link(const CxTensor& h, const HybridBeamformers& bf,
                            const Eigen::MatrixXcd& s, double noise_power_dbm,
                            std::uint64_t seed) {
  validate(bf);
  const int m_tx = bf.tx_awv[0].size() * bf.n_tx_chains();
  const int m_rx = bf.rx_awv[0].size() * bf.n_rx_chains();
  require(h.tx() == m_tx, "apply_link: channel Tx size != beamformer");
  require(h.rx() == m_rx, "apply_link: channel Rx size != beamformer");
  require(s.rows() == bf.tx_digital.cols(),
          "apply_link: stream count mismatch");
  require(s.cols() == h.nsc(), "apply_link: subcarrier count mismatch");

  const Eigen::MatrixXcd t_eff = bf.tx_effective();
  const Eigen::MatrixXcd r_eff = bf.rx_effective();
  const double sigma = std::sqrt(undb10(noise_power_dbm));

  Rng rng(derive_seed(seed, 0xA11D));
  Eigen::MatrixXcd y(r_eff.rows(), h.nsc());
  Eigen::VectorXcd noise(m_rx);
  for (int k = 0; k < h.nsc(); ++k) {
    for (int r = 0; r < m_rx; ++r) noise(r) = sigma * rng.cnormal();
    y.col(k).noalias() = r_eff * (h.slice(k) * (t_eff * s.col(k)) + noise);
  }
  return y;
}

Eigen::MatrixXcd trn_field(int n_streams, int n_subcarriers,
                           std::uint64_t seed) {
  require(n_streams >= 1 && n_subcarriers >= 1,
          "trn_field: dimensions must be >= 1");
  Rng rng(derive_seed(seed, 0x7121));
  Eigen::MatrixXcd s(n_streams, n_subcarriers);
  for (int i = 0; i < n_streams; ++i)
    for (int k = 0; k < n_subcarriers; ++k) s(i, k) = rng.unit_phase();
  return s;
}

// ----- delay domain ---------------------------------------------------------

namespace {

// FFTW plans are cached per (size, direction); creation is serialized because
// the planner is not thread-safe, execution on caller buffers is.
fftw_plan cached_plan(int n, int sign) {
  static std::map<std::pair<int, int>, fftw_plan> plans;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find({n, sign});
  if (it != plans.end()) return it->second;
  std::vector<cxd> in(n), out(n);
  fftw_plan p = fftw_plan_dft_1d(
      n, reinterpret_cast<fftw_complex*>(in.data()),
      reinterpret_cast<fftw_complex*>(out.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans[{n, sign}] = p;
  return p;
}

Eigen::VectorXcd unitary_dft(const Eigen::VectorXcd& x, int sign) {
  const int n = static_cast<int>(x.size());
  require(n >= 2 && (n & (n - 1)) == 0,
          "csi_to_cir: length must be a power of two");
  Eigen::VectorXcd out(n);
  std::vector<cxd> in(x.data(), x.data() + n);
  fftw_execute_dft(cached_plan(n, sign),
                   reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out / std::sqrt(static_cast<double>(n));
}

}  // namespace

Eigen::VectorXcd csi_to_cir(const Eigen::VectorXcd& csi) {
  return unitary_dft(csi, FFTW_BACKWARD);
}

Eigen::VectorXcd cir_to_csi(const Eigen::VectorXcd& cir) {
  return unitary_dft(cir, FFTW_FORWARD);
}

CxTensor csi_to_cir(const CxTensor& csi) {
  CxTensor out(csi.rx(), csi.tx(), csi.nsc());
  Eigen::VectorXcd line(csi.nsc());
  for (int r = 0; r < csi.rx(); ++r)
    for (int t = 0; t < csi.tx(); ++t) {
      for (int k = 0; k < csi.nsc(); ++k) line(k) = csi.at(r, t, k);
      Eigen::VectorXcd cir = csi_to_cir(line);
      for (int k = 0; k < csi.nsc(); ++k) out.at(r, t, k) = cir(k);
    }
  return out;
}

CirMatrix background_removal(const CirMatrix& cir) {
  require(cir.rows() >= 1, "background_removal: empty CIR matrix");
  return cir.rowwise() - cir.colwise().mean();
}

}  // namespace isac
