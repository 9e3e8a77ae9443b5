// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "isac/channel.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

OfdmConfig cfg_default() { return {}; }  // 60 GHz, 2 GHz, 512 subcarriers

Node make_node(double x, double y, double boresight_deg, int m = 16) {
  Node n;
  n.position = {x, y, 0.0};
  n.boresight_rad = deg2rad(boresight_deg);
  n.array.elements = m;
  return n;
}

double tensor_mean_entry_power(const CxTensor& h) {
  return h.power() / static_cast<double>(h.size());
}

}  // namespace

TEST_CASE("range bin and wavelength constants") {
  OfdmConfig cfg = cfg_default();
  CHECK(range_bin_m(cfg) == doctest::Approx(0.0749481145).epsilon(1e-9));
  CHECK(wavelength_m(cfg) == doctest::Approx(4.99654097e-3).epsilon(1e-9));
}

TEST_CASE("node geometry: bearing and elevation in the array frame") {
  Node ap = make_node(0, 0, 0);
  CHECK(node_bearing(ap, {0, 3, 0}) == doctest::Approx(0.0));
  CHECK(node_bearing(ap, {3, 3, 0}) == doctest::Approx(pi / 4));
  CHECK(node_bearing(ap, {-3, 3, 0}) == doctest::Approx(-pi / 4));
  Node ue = make_node(0, 5, 180);  // facing back at the AP
  CHECK(node_bearing(ue, {0, 0, 0}) == doctest::Approx(0.0));
  CHECK(node_elevation(ap, {0, 3, 3}) == doctest::Approx(pi / 4));
}

TEST_CASE("LoS path loss at 3 m matches free space") {
  OfdmConfig cfg = cfg_default();
  Node tx = make_node(0, 0, 0, 1);
  Node rx = make_node(0, 3, 180, 1);
  CommChannelParams p;
  p.n_scatter_paths = 0;
  CxTensor h = gen_comm_channel(tx, rx, cfg, p, 1);

  const double expect = friis_amplitude(wavelength_m(cfg), 3.0);
  // 20 log10(4 pi d / lambda) = 77.55 dB at 3 m, 60 GHz
  CHECK(db20(1.0 / expect) == doctest::Approx(77.55).epsilon(0.001));
  for (int k = 0; k < cfg.n_subcarriers; k += 37)
    CHECK(std::abs(h.at(0, 0, k)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("Rician K-factor is respected in ensemble power") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 64;
  Node tx = make_node(0, 0, 0, 4);
  Node rx = make_node(1, 4, 170, 4);
  CommChannelParams p;
  p.k_factor_db = 10.0;

  CommChannelParams los_only = p;
  los_only.n_scatter_paths = 0;
  CxTensor h_los = gen_comm_channel(tx, rx, cfg, los_only, 0);
  const double p_los = h_los.power();

  double p_scatter = 0.0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    CxTensor h = gen_comm_channel(tx, rx, cfg, p, derive_seed(42, i));
    for (std::size_t j = 0; j < h.size(); ++j)
      p_scatter += std::norm(h.data()[j] - h_los.data()[j]);
  }
  p_scatter /= trials;
  CHECK(db10(p_los / p_scatter) == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("monostatic subject at 3 m peaks at delay tap 40") {
  OfdmConfig cfg = cfg_default();
  Node ap = make_node(0, 0, 0, 1);
  Subject s;
  s.position = {0, 3, 0};
  CxTensor h = gen_sensing_channel(ap, ap, {s}, cfg, 0.0, 7);

  Eigen::VectorXcd csi(cfg.n_subcarriers);
  for (int k = 0; k < cfg.n_subcarriers; ++k) csi(k) = h.at(0, 0, k);
  Eigen::VectorXcd cir = csi_to_cir(csi);
  int peak = 0;
  for (int i = 1; i < cir.size(); ++i)
    if (std::abs(cir(i)) > std::abs(cir(peak))) peak = i;
  CHECK(peak == 40);  // 2 * 3 m / c * 2 GHz = 40.03 taps
}

TEST_CASE("constant monostatic timing offset shifts the peak") {
  OfdmConfig cfg = cfg_default();
  Node ap = make_node(0, 0, 0, 1);
  Subject s;
  s.position = {0, 3, 0};
  SensingImpairments imp;
  imp.mono_timing_offset_taps = 3.0;
  CxTensor h = gen_sensing_channel(ap, ap, {s}, cfg, 0.0, 7, imp);

  Eigen::VectorXcd csi(cfg.n_subcarriers);
  for (int k = 0; k < cfg.n_subcarriers; ++k) csi(k) = h.at(0, 0, k);
  Eigen::VectorXcd cir = csi_to_cir(csi);
  int peak = 0;
  for (int i = 1; i < cir.size(); ++i)
    if (std::abs(cir(i)) > std::abs(cir(peak))) peak = i;
  CHECK(peak == 43);
}

TEST_CASE("sensing power follows the fourth-power range law") {
  OfdmConfig cfg = cfg_default();
  Node ap = make_node(0, 0, 0, 1);
  Subject near;
  near.position = {0, 2, 0};
  Subject far = near;
  far.position = {0, 4, 0};
  CxTensor h_near = gen_sensing_channel(ap, ap, {near}, cfg, 0.0, 1);
  CxTensor h_far = gen_sensing_channel(ap, ap, {far}, cfg, 0.0, 1);
  CHECK(db10(h_near.power() / h_far.power()) ==
        doctest::Approx(12.0411998).epsilon(1e-6));
}

TEST_CASE("monostatic snapshots of a static scene repeat exactly") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 64;
  Node ap = make_node(0, 0, 0, 4);
  Subject s;
  s.position = {1, 3, 0};
  CxTensor a = gen_sensing_channel(ap, ap, {s}, cfg, 0.0, 3);
  CxTensor b = gen_sensing_channel(ap, ap, {s}, cfg, 0.35, 3);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("bistatic packets carry fresh phase and timing impairments") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 64;
  Node ap = make_node(0, 0, 0, 4);
  Node ue = make_node(3, 3, -135, 4);
  Subject s;
  s.position = {-1, 3, 0};
  SensingImpairments imp;
  imp.bistatic = true;
  CxTensor a = gen_sensing_channel(ap, ue, {s}, cfg, 0.0, 3, imp);
  CxTensor b = gen_sensing_channel(ap, ue, {s}, cfg, 0.05, 3, imp);  // next packet
  const double corr =
      std::abs(dot(a, b)) / std::sqrt(a.power() * b.power());
  CHECK(corr < 0.999);
  // same packet index reproduces bit-exactly
  CxTensor c = gen_sensing_channel(ap, ue, {s}, cfg, 0.0, 3, imp);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == c.data()[i]);
}

TEST_CASE("subject behind the array is a geometry error") {
  OfdmConfig cfg = cfg_default();
  Node ap = make_node(0, 0, 0, 2);
  Subject s;
  s.position = {0, -3, 0};
  CHECK_THROWS_AS(gen_sensing_channel(ap, ap, {s}, cfg, 0.0, 1),
                  std::domain_error);
}

TEST_CASE("Tx interference: AR(1) slow-time correlation near rho") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 32;
  Node ap = make_node(0, 0, 0, 8);
  TiParams params;  // rho = 0.9
  TxInterference ti(ap, cfg, params, 16, 99);

  double acc = 0.0;
  int count = 0;
  CxTensor prev = ti.at(8, 0);
  for (int slot = 1; slot < 200; ++slot) {
    const CxTensor& cur = ti.at(8, slot);
    acc += std::abs(dot(prev, cur)) / std::sqrt(prev.power() * cur.power());
    prev = cur;
    ++count;
  }
  CHECK(acc / count == doctest::Approx(0.9).epsilon(0.034));
}

TEST_CASE("Tx interference: correlations mostly above 0.8") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 32;
  Node ap = make_node(0, 0, 0, 8);
  TxInterference ti(ap, cfg, {}, 16, 7);
  int above = 0, total = 0;
  for (int sector = 0; sector < 16; sector += 3) {
    CxTensor prev = ti.at(sector, 0);
    for (int slot = 1; slot < 50; ++slot) {
      const CxTensor& cur = ti.at(sector, slot);
      double corr =
          std::abs(dot(prev, cur)) / std::sqrt(prev.power() * cur.power());
      above += (corr > 0.8);
      ++total;
      prev = cur;
    }
  }
  CHECK(static_cast<double>(above) / total > 0.8);
}

TEST_CASE("Tx interference: sector power profile peaks at broadside") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 32;
  Node ap = make_node(0, 0, 0, 8);
  TxInterference ti(ap, cfg, {}, 32, 123);
  const int broadside = nearest_sector(32, 0.0);
  double peak_db = ti.sector_power_db(broadside);
  for (int k = 0; k < 32; ++k) {
    if (k == broadside || k == broadside - 1) continue;  // ripple-level ties
    CHECK(ti.sector_power_db(k) < peak_db + 0.5);
  }
  CHECK(ti.sector_power_db(0) < peak_db - 15.0);    // strong falloff at -90
  CHECK(ti.sector_power_db(31) < peak_db - 15.0);
}

TEST_CASE("Tx interference: margin above the sensing reference holds") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 32;
  Node ap = make_node(0, 0, 0, 8);
  TiParams params;
  params.ref_power_db = -70.0;
  TxInterference ti(ap, cfg, params, 32, 5);
  const int broadside = nearest_sector(32, 0.0);
  double mean_power = 0.0;
  for (int slot = 0; slot < 400; ++slot)
    mean_power += ti.at(broadside, slot).power();
  mean_power /= 400;
  CHECK(db10(mean_power) - params.ref_power_db ==
        doctest::Approx(50.0).epsilon(0.03));
}

TEST_CASE("Tx interference: tensors are pure in (seed, sector, slot)") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 16;
  Node ap = make_node(0, 0, 0, 4);
  TxInterference warm(ap, cfg, {}, 8, 11);
  warm.at(3, 7);
  warm.at(3, 2);  // backwards
  warm.at(5, 1);
  const CxTensor a = warm.at(3, 5);
  const CxTensor b = gen_tx_interference(ap, cfg, {}, 8, 3, 5, 11);
  REQUIRE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("Tx interference stays spatially low-rank") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 16;
  Node ap = make_node(0, 0, 0, 8);
  TiParams params;  // 2 spatial modes
  CxTensor h = gen_tx_interference(ap, cfg, params, 8, 4, 3, 21);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h.slice(0));
  const auto& sv = svd.singularValues();
  REQUIRE(sv.size() >= 3);
  CHECK(sv(2) < 1e-9 * sv(0));
}

TEST_CASE("compose sums channel components") {
  CxTensor a(2, 2, 4), b(2, 2, 4);
  a.at(0, 0, 0) = cxd(1, 0);
  b.at(0, 0, 0) = cxd(0, 2);
  b.at(1, 1, 3) = cxd(3, 0);
  CxTensor sum = compose({&a, &b});
  CHECK(sum.at(0, 0, 0) == cxd(1, 2));
  CHECK(sum.at(1, 1, 3) == cxd(3, 0));
  CxTensor bad(2, 2, 8);
  CHECK_THROWS_AS(compose({&a, &bad}), std::invalid_argument);
}

TEST_CASE("apply_link: steered beams on both sides realize full array gain") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 16;
  Node tx = make_node(0, 0, 0);
  Node rx = make_node(2, 4, -160);
  CommChannelParams p;
  p.n_scatter_paths = 0;
  CxTensor h = gen_comm_channel(tx, rx, cfg, p, 1);

  HybridBeamformers bf = steered_beamformers(
      tx.array, 1, 1, node_bearing(tx, rx.position),
      node_bearing(rx, tx.position), /*quantized=*/false);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Ones(1, cfg.n_subcarriers);
  Eigen::MatrixXcd y = apply_link(h, bf, s, -300.0, 0);

  const double d = (rx.position - tx.position).norm();
  const double expect = 256.0 * friis_amplitude(wavelength_m(cfg), d);
  for (int k = 0; k < cfg.n_subcarriers; ++k)
    CHECK(std::abs(y(0, k)) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("apply_link: noise passes through the Rx combiner") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 256;
  Node n = make_node(0, 0, 0, 1);
  CxTensor h(1, 1, cfg.n_subcarriers);  // zero channel: output is pure noise
  HybridBeamformers bf = steered_beamformers(n.array, 1, 1, 0.0, 0.0, false);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(1, cfg.n_subcarriers);
  double p = 0.0;
  const int reps = 60;
  for (int r = 0; r < reps; ++r) {
    Eigen::MatrixXcd y = apply_link(h, bf, s, -10.0, derive_seed(1, r));
    p += y.cwiseAbs2().sum() / cfg.n_subcarriers;
  }
  CHECK(db10(p / reps) == doctest::Approx(-10.0).epsilon(0.02));
}

TEST_CASE("TRN field is constant-modulus and reproducible") {
  Eigen::MatrixXcd a = trn_field(2, 64, 9);
  Eigen::MatrixXcd b = trn_field(2, 64, 9);
  CHECK(a == b);
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k)
      CHECK(std::abs(a(i, k)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unitary IDFT: Parseval holds to machine precision") {
  Rng rng(31);
  for (int n : {16, 64, 512}) {
    Eigen::VectorXcd csi(n);
    for (int k = 0; k < n; ++k) csi(k) = rng.cnormal();
    Eigen::VectorXcd cir = csi_to_cir(csi);
    CHECK(std::abs(csi.squaredNorm() - cir.squaredNorm()) <=
          1e-10 * csi.squaredNorm());
    Eigen::VectorXcd back = cir_to_csi(cir);
    CHECK((back - csi).norm() <= 1e-12 * csi.norm());
  }
  Eigen::VectorXcd bad(12);
  CHECK_THROWS_AS(csi_to_cir(bad), std::invalid_argument);
}

TEST_CASE("background removal nulls a static scene and is mean-free") {
  OfdmConfig cfg = cfg_default();
  cfg.n_subcarriers = 64;
  Node ap = make_node(0, 0, 0, 2);
  Subject s;
  s.position = {1, 2, 0};

  CirMatrix cir(10, cfg.n_subcarriers);
  for (int p = 0; p < 10; ++p) {
    CxTensor h = gen_sensing_channel(ap, ap, {s}, cfg, p * 0.05, 3);
    Eigen::VectorXcd csi(cfg.n_subcarriers);
    for (int k = 0; k < cfg.n_subcarriers; ++k) csi(k) = h.at(0, 0, k);
    cir.row(p) = csi_to_cir(csi).transpose();
  }
  CirMatrix cleaned = background_removal(cir);
  CHECK(cleaned.cwiseAbs().maxCoeff() < 1e-15);
}
