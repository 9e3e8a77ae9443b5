// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "isac/probing.hpp"
#include "isac/rng.hpp"

namespace isac {

// ----- names and validation -----------------------------------------------

const char* scheduler_name(Scheduler s) {
  switch (s) {
    case Scheduler::BcSet: return "bcset";
    case Scheduler::RoundRobin: return "rr";
    case Scheduler::SenseOnly: return "so";
    case Scheduler::CommOnly: return "co";
  }
  throw std::invalid_argument("scheduler_name: unknown scheduler");
}

Scheduler parse_scheduler(const std::string& name) {
  if (name == "bcset") return Scheduler::BcSet;
  if (name == "rr") return Scheduler::RoundRobin;
  if (name == "so") return Scheduler::SenseOnly;
  if (name == "co") return Scheduler::CommOnly;
  throw std::invalid_argument("unknown scheduler '" + name +
                              "' (expect bcset|rr|so|co)");
}

void validate(const ScenarioConfig& cfg) {
  std::vector<std::string> errs;
  auto check = [&errs](bool ok, const char* msg) {
    if (!ok) errs.emplace_back(msg);
  };

  check(cfg.scene.aps.size() == 1, "scene needs exactly one AP");
  check(!cfg.scene.ues.empty() || !cfg.scene.subjects.empty(),
        "scene needs at least one UE or subject");
  check(cfg.slot_duration_s > 0, "slot_duration must be positive");
  check(cfg.duration_s >= cfg.slot_duration_s,
        "duration must cover at least one slot");
  check(cfg.efficiency > 0 && cfg.efficiency <= 1,
        "efficiency must lie in (0, 1]");
  check(cfg.cap_bps > 0, "cap_bps must be positive");
  check(cfg.band_lo_hz > 0 && cfg.band_hi_hz > cfg.band_lo_hz,
        "motion band must satisfy 0 < lo < hi");
  check(cfg.rebeam_interval_s >= cfg.slot_duration_s,
        "rebeam interval must cover at least one slot");
  check(cfg.track_q >= 0, "track_q must be >= 0");
  check(cfg.sched.k_d >= 1 && cfg.sched.k_r >= 1, "grid needs positive bins");
  check(cfg.sweep.trials >= 1, "sweep trials must be >= 1");
  check(cfg.sweep.n_subjects >= 1, "sweep subject count must be >= 1");
  check(!cfg.sweep.ue_counts.empty(), "sweep ue_counts must not be empty");
  check(!cfg.sweep.ap_counts.empty(), "sweep ap_counts must not be empty");
  for (int n : cfg.sweep.ue_counts)
    if (n < 1) {
      errs.emplace_back("sweep ue_counts entries must be >= 1");
      break;
    }
  for (int n : cfg.sweep.ap_counts)
    if (n < 1) {
      errs.emplace_back("sweep ap_counts entries must be >= 1");
      break;
    }

  if (cfg.scene.aps.size() == 1) {
    const Node& ap = cfg.scene.aps[0];
    for (std::size_t i = 0; i < cfg.scene.ues.size(); ++i) {
      const double b = node_bearing(ap, cfg.scene.ues[i].position);
      if (std::abs(b) > 0.5 * cfg.sched.fov_rad)
        errs.emplace_back("ue " + std::to_string(i) +
                          " lies outside the field of view");
    }
    for (std::size_t i = 0; i < cfg.scene.subjects.size(); ++i) {
      const double b = node_bearing(ap, cfg.scene.subjects[i].position);
      if (std::abs(b) > 0.5 * cfg.sched.fov_rad)
        errs.emplace_back("subject " + std::to_string(i) +
                          " lies outside the field of view");
    }
  }

  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid scenario config: ";
    for (std::size_t i = 0; i < errs.size(); ++i)
      os << (i ? "; " : "") << errs[i];
    throw std::invalid_argument(os.str());
  }
}

void validate(const Metrics& m) {
  for (double t : m.ue_throughput_bps)
    require(std::isfinite(t) && t >= 0, "Metrics: throughput must be >= 0");
  require(std::isfinite(m.mean_throughput_bps) && m.mean_throughput_bps >= 0,
          "Metrics: mean throughput must be >= 0");
  require(m.span_slots >= 1 || m.ue_throughput_bps.empty(),
          "Metrics: span must be >= 1");
}

// ----- rate map -------------------------------------------------------------

double throughput_bps(double snr_db, double bandwidth_hz, double efficiency,
                      double cap_bps) {
  require(efficiency > 0 && efficiency <= 1,
          "throughput: efficiency must lie in (0, 1]");
  require(bandwidth_hz > 0, "throughput: bandwidth must be positive");
  require(cap_bps > 0, "throughput: cap must be positive");
  const double rate =
      efficiency * bandwidth_hz * std::log2(1.0 + undb10(snr_db));
  return std::min(rate, cap_bps);
}

// ----- gesture trace ----------------------------------------------------------

double synthetic_gesture_displacement(double t_s) {
  // Push-pull stroke near 1.5 Hz with a push-side second harmonic. Human
  // strokes are not metronomic: two slow incommensurate frequency drifts and
  // an amplitude envelope spread the line spectrum into a dense comb, so a
  // fixed share of any alias band carries stroke energy.
  const double stroke = 2 * pi * 1.5 * t_s +
                        1.5 * std::sin(2 * pi * 0.073 * t_s) +
                        0.9 * std::sin(2 * pi * 0.047 * t_s + 1.1);
  const double env = 1.0 + 0.2 * std::sin(2 * pi * 0.11 * t_s);
  return 0.04 * env * std::sin(stroke) + 0.008 * std::sin(2 * stroke + 0.7);
}

std::vector<double> synthetic_gesture_trace(double fs_hz, double duration_s) {
  require(fs_hz > 0 && duration_s > 0,
          "gesture trace: fs and duration must be positive");
  const int n = static_cast<int>(std::floor(fs_hz * duration_s));
  std::vector<double> d(n);
  for (int k = 0; k < n; ++k)
    d[k] = synthetic_gesture_displacement(k / fs_hz);
  return d;
}

// ----- helpers -------------------------------------------------------------------

Subject subject_at_time(const Subject& s, double t0) {
  Subject out = s;
  switch (s.motion.kind) {
    case Motion::Kind::Static: break;
    case Motion::Kind::ConstantVelocity:
      out.position += s.motion.velocity * t0;
      break;
    case Motion::Kind::Sinusoid:
      out.motion.phase += 2 * pi * s.motion.freq_hz * t0;
      break;
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&v](int a, int b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;  // average rank of the tie run
    for (int k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2,
          "spearman_rho: need two equal-length samples of size >= 2");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0 && syy > 0, "spearman_rho: a sample is constant");
  return sxy / std::sqrt(sxx * syy);
}

// ----- standard scenes ------------------------------------------------------------

namespace {

Node default_ap() {
  Node ap;
  ap.position = {0, 0, 0};
  ap.n_tx_chains = 2;
  ap.n_rx_chains = 2;
  return ap;
}

Node ue_at(const Eigen::Vector3d& pos) {
  Node ue;
  ue.position = pos;
  ue.boresight_rad = azimuth_of(-pos);  // face the AP at the origin
  ue.n_tx_chains = 1;
  ue.n_rx_chains = 1;
  return ue;
}

Eigen::Vector3d polar_pos(double bearing_rad, double range_m,
                          double height_m = 0.0) {
  return {range_m * std::sin(bearing_rad), range_m * std::cos(bearing_rad),
          height_m};
}

}  // namespace

Scene respiration_scene() {
  Scene sc;
  sc.aps.push_back(default_ap());
  // Subject and UE one bearing bin apart (32 sectors over pi).
  const double sub_bearing = sector_center(32, 16);  // 2.8125 degrees
  const double ue_bearing = sector_center(32, 17);   // 8.4375 degrees
  Subject s;
  s.position = polar_pos(sub_bearing, 3.0);
  s.motion.kind = Motion::Kind::Sinusoid;
  s.motion.freq_hz = 0.25;
  s.motion.amplitude = -0.003 * s.position.normalized();  // chest toward AP
  s.mag_mod_per_m = 20.0;
  sc.subjects.push_back(s);
  sc.ues.push_back(ue_at(polar_pos(ue_bearing, 4.0)));
  return sc;
}

Scene tracking_scene() {
  Scene sc;
  sc.aps.push_back(default_ap());
  Subject s;
  s.position = {-2.0, 4.5, 0};
  s.motion.kind = Motion::Kind::ConstantVelocity;
  s.motion.velocity = {0.6, 0, 0};
  s.mag_mod_per_m = 20.0;
  sc.subjects.push_back(s);
  sc.ues.push_back(ue_at(polar_pos(sector_center(32, 20), 5.0)));
  return sc;
}

Scene pointcloud_scene() {
  Scene sc;
  sc.aps.push_back(default_ap());
  Subject a, b;
  a.position = polar_pos(deg2rad(-10.0), 2.5, 2.5 * std::sin(deg2rad(0.0)));
  b.position = polar_pos(deg2rad(15.0), 3.5, 3.5 * std::sin(deg2rad(5.0)));
  sc.subjects = {a, b};
  sc.ues.push_back(ue_at(polar_pos(sector_center(32, 10), 4.5)));
  return sc;
}

// ----- scheduling glue -----------------------------------------------------------

namespace {

struct ServingPlan {
  std::vector<BcSet> sets;  // slot assigned; ues/subjects hold entity ids
  int span = 1;
  // Per entity id: index of the serving set, -1 when unserved.
  std::vector<int> serving_set;
};

// Entity ids follow grid insertion order: UEs first, then subjects.
RangeBearingGrid make_grid(const SchedParams& p, const Node& ap,
                           const std::vector<Node>& ues,
                           const std::vector<Subject>& subjects) {
  RangeBearingGrid grid(p.k_r, p.k_d, p.range_extent_m, p.fov_rad);
  for (const Node& ue : ues)
    grid.add_entity((ue.position - ap.position).norm(),
                    node_bearing(ap, ue.position), true);
  for (const Subject& s : subjects)
    grid.add_entity((s.position - ap.position).norm(),
                    node_bearing(ap, s.position), false);
  return grid;
}

BcSet singleton_set(const RangeBearingGrid& grid, int id,
                    const LinkBudget& budget) {
  const GridEntity& e = grid.entities()[id];
  BcSet set;
  (e.is_ue ? set.ues : set.subjects).push_back(id);
  set.beam = make_beam(
      grid.bin_center_bearing(grid.bearing_bin(e.bearing_rad)),
      budget.min_width_rad, budget);
  return set;
}

ServingPlan build_plan(const RangeBearingGrid& grid, Scheduler scheduler,
                       const SchedParams& p, int n_chains) {
  ServingPlan plan;
  plan.serving_set.assign(grid.n_entities(), -1);

  if (scheduler == Scheduler::BcSet) {
    const CommSets comm =
        group_comm_sets(grid, p.budget, p.r_max_width_rad, p.ue_capacity);
    BuildResult built =
        build_bc_sets(grid, comm, p.r_max_width_rad, p.budget);
    plan.span = std::max(1, schedule(built.sets, n_chains));
    plan.sets = std::move(built.sets);
  } else {
    // The three baselines serve entities individually on fine beams. A
    // scheduler whose preferred class is absent serves the other class, so
    // all four coincide on a subject-free single-UE scene.
    std::vector<int> ids;
    for (int id = 0; id < grid.n_entities(); ++id) {
      const bool is_ue = grid.entities()[id].is_ue;
      const bool wanted = scheduler == Scheduler::RoundRobin ||
                          (scheduler == Scheduler::CommOnly) == is_ue;
      if (wanted) ids.push_back(id);
    }
    if (ids.empty())
      for (int id = 0; id < grid.n_entities(); ++id) ids.push_back(id);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      BcSet set = singleton_set(grid, ids[i], p.budget);
      set.slot = static_cast<int>(i) / std::max(1, n_chains);
      set.chain = static_cast<int>(i) % std::max(1, n_chains);
      plan.sets.push_back(std::move(set));
    }
    plan.span = std::max(
        1, static_cast<int>((ids.size() + n_chains - 1) /
                            std::max<std::size_t>(1, n_chains)));
  }

  for (std::size_t si = 0; si < plan.sets.size(); ++si) {
    for (int id : plan.sets[si].ues)
      if (plan.serving_set[id] < 0) plan.serving_set[id] = static_cast<int>(si);
    for (int id : plan.sets[si].subjects)
      if (plan.serving_set[id] < 0) plan.serving_set[id] = static_cast<int>(si);
  }
  return plan;
}

Awv beam_awv(const PhasedArray& arr, const BeamSpec& beam,
             const LinkBudget& budget) {
  if (beam.width_rad > budget.min_width_rad + 1e-9)
    return widen_beam(arr, beam.center_rad, beam.width_rad);
  return quantize(steer(arr, beam.center_rad), arr.phase_bits, arr.amp_bits);
}

int sector_of(double bearing_rad, int n_sectors) {
  const int k = static_cast<int>(
      std::floor((bearing_rad + 0.5 * pi) / sector_width(n_sectors)));
  return std::clamp(k, 0, n_sectors - 1);
}

// ----- comm link evaluation --------------------------------------------------------

struct CommLink {
  CxTensor h;          // AP -> UE tensor
  Eigen::MatrixXcd rx; // UE-side effective receive combiner
  double ceiling_db;   // link-budget ceiling on post-beamforming power
};

CommLink make_comm_link(const Node& ap, const Node& ue, const OfdmConfig& ofdm,
                        const CommChannelParams& comm, std::uint64_t seed) {
  // Per-beam link: the serving chain's view of the AP is single-chain.
  Node tx_ap = ap;
  tx_ap.n_tx_chains = 1;
  tx_ap.n_rx_chains = 1;
  CommLink link{gen_comm_channel(tx_ap, ue, ofdm, comm, seed),
                Eigen::MatrixXcd(),
                0.0};
  const HybridBeamformers ue_bf = steered_beamformers(
      ue.array, 1, 1, node_bearing(ue, ap.position),
      node_bearing(ue, ap.position));
  link.rx = ue_bf.rx_effective();

  // Ceiling: every element weight is at most 1, so the post-beamforming
  // amplitude cannot exceed (sum of path amplitudes) x M_tx x M_rx. The
  // scatter sum gets a 5 sigma headroom factor on its Rayleigh draws.
  const double alpha =
      friis_amplitude(wavelength_m(ofdm), (ue.position - ap.position).norm());
  const double k_lin = undb10(comm.k_factor_db);
  const double scatter =
      comm.n_scatter_paths > 0
          ? 5.0 * std::sqrt(static_cast<double>(comm.n_scatter_paths) / k_lin)
          : 0.0;
  const double m_tx = ap.array.elements, m_rx = ue.array.elements;
  link.ceiling_db = db20(alpha * (1.0 + scatter) * m_tx * m_rx);
  return link;
}

// Mean per-subcarrier post-beamforming power through the given Tx AWV.
double post_bf_power(const CommLink& link, const Awv& tx_awv) {
  HybridBeamformers ap_bf;
  ap_bf.tx_awv = {tx_awv};
  ap_bf.tx_digital = Eigen::MatrixXcd::Ones(1, 1);
  const Eigen::MatrixXcd t = ap_bf.tx_effective();
  double p = 0.0;
  for (int k = 0; k < link.h.nsc(); ++k)
    p += std::norm((link.rx * link.h.slice(k) * t)(0, 0));
  return p / link.h.nsc();
}

// ----- sensing helpers ----------------------------------------------------------------

// Slow-time motion energy per tap after background removal; peak tap or -1
// when the stack carries no energy.
int motion_peak_tap(const CirMatrix& cir) {
  const Eigen::RowVectorXcd mean = cir.colwise().mean();
  int best = -1;
  double best_e = 0.0;
  for (int tap = 0; tap < cir.cols(); ++tap) {
    const double e = (cir.col(tap).array() - mean(tap)).abs2().sum();
    if (e > best_e) {
      best_e = e;
      best = tap;
    }
  }
  return best;
}

// Reference tap for the residual-plus-noise series: farthest from every
// subject tap.
int empty_tap(const std::vector<int>& subject_taps, int n_taps) {
  int best = 0;
  double best_d = -1.0;
  for (int tap = 0; tap < n_taps; ++tap) {
    double d = std::numeric_limits<double>::infinity();
    for (int st : subject_taps) d = std::min(d, std::abs(double(tap - st)));
    if (d > best_d) {
      best_d = d;
      best = tap;
    }
  }
  return best;
}

struct SegmentSense {
  CirMatrix cir;
  double fs_hz = 0.0;
  int rx_sector = 0;
  double t0_s = 0.0;  // segment start in scene time
  CancellationReport report;
};

}  // namespace

// ----- run_scenario ---------------------------------------------------------------------

Metrics run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  const Node& ap = cfg.scene.aps[0];
  const int n_ues = static_cast<int>(cfg.scene.ues.size());
  const int n_subj = static_cast<int>(cfg.scene.subjects.size());
  const int n_chains = std::max(1, ap.n_tx_chains);
  const double slot_rate = 1.0 / cfg.slot_duration_s;

  Metrics m;
  m.scheduler = cfg.scheduler;
  m.n_slots = static_cast<int>(std::floor(cfg.duration_s * slot_rate));
  m.ue_throughput_bps.assign(n_ues, 0.0);
  m.ue_snr_db.assign(n_ues, db_floor);
  m.sensing.resize(n_subj);
  for (int j = 0; j < n_subj; ++j) m.sensing[j].subject = j;

  // Moving-position scenes re-schedule every rebeam interval; scenes whose
  // subjects only oscillate in place keep one plan for the whole run.
  bool rebeam = false;
  for (const Subject& s : cfg.scene.subjects)
    if (s.motion.kind == Motion::Kind::ConstantVelocity) rebeam = true;
  const double seg_len =
      rebeam ? cfg.rebeam_interval_s : cfg.duration_s;
  const int n_segments =
      std::max(1, static_cast<int>(std::floor(cfg.duration_s / seg_len)));

  // Comm channels are static; generate one tensor per UE up front.
  std::vector<CommLink> links;
  links.reserve(n_ues);
  for (int u = 0; u < n_ues; ++u)
    links.push_back(make_comm_link(ap, cfg.scene.ues[u], cfg.ofdm, cfg.comm,
                                   derive_seed(cfg.seed, 0xC011, u)));

  std::vector<double> ue_rate_sum(n_ues, 0.0);
  std::vector<double> ue_snr_sum(n_ues, 0.0);
  std::vector<int> ue_served_segs(n_ues, 0);
  std::vector<std::vector<SegmentSense>> sense(n_subj);
  std::vector<double> duty_sum(n_subj, 0.0);
  int spans_sum = 0;

  for (int seg = 0; seg < n_segments; ++seg) {
    const double t0 = seg * seg_len;
    std::vector<Subject> now;
    now.reserve(n_subj);
    for (const Subject& s : cfg.scene.subjects)
      now.push_back(subject_at_time(s, t0));

    const RangeBearingGrid grid =
        make_grid(cfg.sched, ap, cfg.scene.ues, now);
    const ServingPlan plan =
        build_plan(grid, cfg.scheduler, cfg.sched, n_chains);
    spans_sum += plan.span;

    // Comm: each served UE gets an equal share of its set's slot.
    for (int u = 0; u < n_ues; ++u) {
      const int si = plan.serving_set[u];
      if (si < 0) continue;
      const BcSet& set = plan.sets[si];
      const Awv tx = beam_awv(ap.array, set.beam, cfg.sched.budget);
      const double p_sig = post_bf_power(links[u], tx);
      const double snr_db = db10(std::max(p_sig, 1e-300)) - cfg.comm_noise_db;
      const double duty =
          1.0 / (plan.span * static_cast<double>(set.ues.size()));
      ue_rate_sum[u] += duty * throughput_bps(snr_db, cfg.ofdm.bandwidth_hz,
                                              cfg.efficiency, cfg.cap_bps);
      ue_snr_sum[u] += snr_db;
      ue_served_segs[u] += 1;
      m.min_budget_margin_db = std::min(
          m.min_budget_margin_db, links[u].ceiling_db - db10(p_sig));
    }

    // Sensing: one cancellation pipeline per sensed subject, receive sector
    // on the subject, transmit beam from its serving set.
    for (int j = 0; j < n_subj; ++j) {
      const int si = plan.serving_set[n_ues + j];
      if (si < 0) continue;
      const BcSet& set = plan.sets[si];
      const double fs = slot_rate / plan.span;
      const int n_pk = static_cast<int>(std::floor(seg_len * fs));
      if (n_pk < 2) continue;
      duty_sum[j] += 1.0 / plan.span;

      PipelineConfig pc = cfg.pipeline;
      pc.probe.n_sectors = cfg.sched.k_d;
      pc.sector = sector_of(set.beam.center_rad, cfg.sched.k_d);
      pc.tx_width_rad =
          set.beam.width_rad > cfg.sched.budget.min_width_rad + 1e-9
              ? set.beam.width_rad
              : 0.0;
      pc.rx_sector = grid.bearing_bin(
          node_bearing(ap, position_at(cfg.scene.subjects[j], t0)));
      pc.n_packets = n_pk;

      OfdmConfig ofdm = cfg.ofdm;
      ofdm.slow_time_hz = fs;
      PipelineResult res = cancel_pipeline(
          ap, now, ofdm, pc, derive_seed(derive_seed(cfg.seed, 0x5E9, j), seg));
      SegmentSense ss;
      ss.cir = std::move(res.cir);
      ss.fs_hz = fs;
      ss.rx_sector = pc.rx_sector;
      ss.t0_s = t0;
      ss.report = res.report;
      m.cancellation.push_back(ss.report);
      sense[j].push_back(std::move(ss));
    }
  }

  // Comm averages over segments.
  double tput_sum = 0.0;
  for (int u = 0; u < n_ues; ++u) {
    m.ue_throughput_bps[u] = ue_rate_sum[u] / n_segments;
    if (ue_served_segs[u] > 0)
      m.ue_snr_db[u] = ue_snr_sum[u] / ue_served_segs[u];
    tput_sum += m.ue_throughput_bps[u];
  }
  m.mean_throughput_bps = n_ues ? tput_sum / n_ues : 0.0;
  m.span_slots = spans_sum / n_segments;

  // Sensing metrics per subject.
  const double bin = range_bin_m(cfg.ofdm);
  double ssnr_sum = 0.0;
  int ssnr_count = 0;
  std::vector<double> track_sq;
  for (int j = 0; j < n_subj; ++j) {
    SubjectSensing& out = m.sensing[j];
    out.duty = duty_sum[j] / n_segments;
    if (sense[j].empty()) continue;
    const bool moving =
        cfg.scene.subjects[j].motion.kind != Motion::Kind::Static;

    double rng_err_sum = 0, brg_err_sum = 0;
    int err_count = 0;
    TrackState track;
    bool track_init = false;
    for (std::size_t k = 0; k < sense[j].size(); ++k) {
      const SegmentSense& ss = sense[j][k];
      const double t_mid = ss.t0_s + 0.5 * (ss.cir.rows() / ss.fs_hz);
      const Eigen::Vector3d truth = position_at(cfg.scene.subjects[j], t_mid);
      const double true_rng = (truth - ap.position).norm();
      const double true_brg = node_bearing(ap, truth);

      std::optional<double> rng_est;
      if (moving) {
        const int tap = motion_peak_tap(ss.cir);
        if (tap >= 0) rng_est = tap * bin;
      } else {
        try {
          const Eigen::VectorXcd mean_cir =
              ss.cir.colwise().mean().transpose();
          rng_est = estimate_range(mean_cir, cfg.ofdm);
        } catch (const detection_error&) {
        }
      }
      const double brg_est = sector_center(cfg.sched.k_d, ss.rx_sector);
      if (rng_est) {
        rng_err_sum += std::abs(*rng_est - true_rng);
        brg_err_sum += std::abs(brg_est - true_brg);
        ++err_count;

        if (rebeam) {
          Measurement meas;
          meas.range_m = std::max(*rng_est, 0.01);
          meas.bearing_rad = brg_est;
          meas.sigma_range_m = bin / std::sqrt(12.0);
          meas.sigma_bearing_rad =
              sector_width(cfg.sched.k_d) / std::sqrt(12.0);
          const Eigen::Vector2d ap2(ap.position.x(), ap.position.y());
          if (!track_init) {
            const Eigen::Vector2d fix = position_fix(meas, ap2);
            track.mean << fix.x(), fix.y(), 0, 0;
            track.covariance =
                Eigen::Vector4d(0.25, 0.25, 1, 1).asDiagonal();
            track.time_s = t_mid;
            track_init = true;
          } else {
            track = ekf_predict(track, t_mid - track.time_s, cfg.track_q);
            track = ekf_update(track, meas, ap2);
            track.time_s = t_mid;
            if (k >= 2)
              track_sq.push_back(
                  (track.mean.head<2>() -
                   Eigen::Vector2d(truth.x(), truth.y()))
                      .squaredNorm());
          }
          m.track.push_back({track.time_s, track.mean(0), track.mean(1),
                             track.mean(2), track.mean(3),
                             track.covariance.trace()});
        }
      }
    }
    if (err_count > 0) {
      out.range_error_m = rng_err_sum / err_count;
      out.bearing_error_rad = brg_err_sum / err_count;
    }

    // Rate and S-SNR need one continuous series: static-position scenes only.
    if (!rebeam && sense[j].size() == 1) {
      const SegmentSense& ss = sense[j][0];
      const int tap = static_cast<int>(std::lround(
          (cfg.scene.subjects[j].position - ap.position).norm() / bin));
      if (tap < ss.cir.cols()) {
        std::vector<int> taps;
        for (int jj = 0; jj < n_subj; ++jj)
          taps.push_back(static_cast<int>(std::lround(
              (cfg.scene.subjects[jj].position - ap.position).norm() / bin)));
        const int ref = empty_tap(taps, static_cast<int>(ss.cir.cols()));
        const double hi = std::min(cfg.band_hi_hz, 0.45 * ss.fs_hz);
        if (hi > cfg.band_lo_hz) {
          try {
            out.s_snr_db = s_snr(ss.cir.col(tap), ss.cir.col(ref), ss.fs_hz,
                                 cfg.band_lo_hz, hi);
            ssnr_sum += out.s_snr_db;
            ++ssnr_count;
          } catch (const std::invalid_argument&) {
          }
          const Motion& mo = cfg.scene.subjects[j].motion;
          if (mo.kind == Motion::Kind::Sinusoid &&
              mo.freq_hz >= cfg.band_lo_hz && mo.freq_hz <= hi) {
            try {
              out.rate_bpm = respiration_rate(ss.cir, tap, ss.fs_hz,
                                              cfg.band_lo_hz, hi);
              out.rate_error_bpm = std::abs(*out.rate_bpm - 60.0 * mo.freq_hz);
            } catch (const detection_error&) {
            }
          }
        }
      }
    }
  }
  if (ssnr_count > 0) m.mean_s_snr_db = ssnr_sum / ssnr_count;
  if (!track_sq.empty()) {
    double s = 0;
    for (double e : track_sq) s += e;
    m.tracking_rmse_m = std::sqrt(s / track_sq.size());
  }

  validate(m);
  return m;
}

BaselineTable run_baselines(const ScenarioConfig& cfg) {
  BaselineTable table;
  ScenarioConfig c = cfg;
  c.scheduler = Scheduler::BcSet;
  table.bcset = run_scenario(c);
  c.scheduler = Scheduler::RoundRobin;
  table.rr = run_scenario(c);
  c.scheduler = Scheduler::SenseOnly;
  table.so = run_scenario(c);
  c.scheduler = Scheduler::CommOnly;
  table.co = run_scenario(c);
  return table;
}

// ----- large-scale trend sweeps -------------------------------------------------------

namespace {

struct FlatEntity {
  Eigen::Vector2d pos;
  int ap = 0;  // serving AP index (UEs) or -1
};

// One deployment trial at measurement level: Rician comm fading, gesture
// magnitude series per sensing modality, real scheduling spans.
struct TrialOut {
  double throughput = 0.0;
  double s_snr_db = 0.0;
};

TrialOut sweep_trial(const ScenarioConfig& cfg, int n_ues, int n_aps,
                     double hall_half_x, std::uint64_t seed) {
  const SweepParams& sw = cfg.sweep;
  Rng rng(seed);
  const double slot_rate = 1.0 / cfg.slot_duration_s;
  const double k_lin = undb10(cfg.comm.k_factor_db);

  // The hall is fixed; APs sit at the centers of equal wall segments, so a
  // larger count densifies the same deployment instead of stretching it.
  std::vector<Eigen::Vector2d> aps(n_aps);
  for (int a = 0; a < n_aps; ++a)
    aps[a] = {hall_half_x * (2.0 * a + 1.0 - n_aps) / n_aps, 0.0};

  auto place = [&rng, hall_half_x, &sw]() -> Eigen::Vector2d {
    return {rng.uniform(-hall_half_x, hall_half_x),
            rng.uniform(1.0, sw.area_range_m)};
  };

  std::vector<FlatEntity> ues(n_ues), subjects(sw.n_subjects);
  for (FlatEntity& u : ues) {
    u.pos = place();
    int best = 0;
    for (int a = 1; a < n_aps; ++a)
      if ((u.pos - aps[a]).norm() < (u.pos - aps[best]).norm()) best = a;
    u.ap = best;
  }
  for (FlatEntity& s : subjects) {
    s.pos = place();
    s.ap = -1;
  }

  // Schedule each AP over the UEs assigned to it plus every subject within
  // its reach; entities beyond the grid extent are coverage holes.
  const double reach = 0.999 * cfg.sched.range_extent_m;
  std::vector<int> spans(n_aps, 1);
  std::vector<double> ue_duty(n_ues, 0.0);
  std::vector<std::vector<double>> sub_duty(
      n_aps, std::vector<double>(sw.n_subjects, 0.0));
  for (int a = 0; a < n_aps; ++a) {
    RangeBearingGrid grid(cfg.sched.k_r, cfg.sched.k_d,
                          cfg.sched.range_extent_m, cfg.sched.fov_rad);
    std::vector<int> ue_ids(n_ues, -1);
    for (int u = 0; u < n_ues; ++u) {
      if (ues[u].ap != a) continue;
      const Eigen::Vector2d d = ues[u].pos - aps[a];
      if (d.norm() > reach) continue;
      ue_ids[u] = grid.add_entity(d.norm(), std::atan2(d.x(), d.y()), true);
    }
    std::vector<int> sub_ids(sw.n_subjects, -1);
    for (int s = 0; s < sw.n_subjects; ++s) {
      const Eigen::Vector2d d = subjects[s].pos - aps[a];
      if (d.norm() > reach) continue;
      sub_ids[s] = grid.add_entity(d.norm(), std::atan2(d.x(), d.y()), false);
    }

    const CommSets comm = group_comm_sets(grid, cfg.sched.budget,
                                          cfg.sched.r_max_width_rad,
                                          cfg.sched.ue_capacity);
    BuildResult built =
        build_bc_sets(grid, comm, cfg.sched.r_max_width_rad, cfg.sched.budget);
    spans[a] = std::max(1, schedule(built.sets, 1));

    for (const BcSet& set : built.sets) {
      for (int u = 0; u < n_ues; ++u)
        if (ue_ids[u] >= 0 &&
            std::find(set.ues.begin(), set.ues.end(), ue_ids[u]) !=
                set.ues.end())
          ue_duty[u] = 1.0 / (spans[a] * double(set.ues.size()));
      for (int s = 0; s < sw.n_subjects; ++s)
        if (sub_ids[s] >= 0 && sub_duty[a][s] == 0.0 &&
            std::find(set.subjects.begin(), set.subjects.end(), sub_ids[s]) !=
                set.subjects.end())
          sub_duty[a][s] = 1.0 / spans[a];
    }
  }

  // Throughput: Rician-faded distance-law SNR, duty-shared Shannon rate.
  TrialOut out;
  for (int u = 0; u < n_ues; ++u) {
    const double d = std::max(0.5, (ues[u].pos - aps[ues[u].ap]).norm());
    const cxd hfade = std::sqrt(k_lin / (k_lin + 1)) +
                      rng.cnormal() / std::sqrt(k_lin + 1);
    const double snr = sw.snr_ref_db - 20.0 * std::log10(d / sw.ref_range_m) +
                       db10(std::max(std::norm(hfade), 1e-12));
    out.throughput += ue_duty[u] * throughput_bps(snr, cfg.ofdm.bandwidth_hz,
                                                  cfg.efficiency, cfg.cap_bps);
  }
  out.throughput /= n_ues;

  // S-SNR: per subject, combine the monostatic mode of every AP with the
  // UE-assisted bistatic modes. Each modality replays the gesture trace at
  // the illuminating AP's schedule-decimated sampling rate; per-modality
  // motion-to-noise ratios add linearly (maximum-ratio combining).
  double ssnr_sum = 0.0;
  for (int s = 0; s < sw.n_subjects; ++s) {
    const double dir = rng.uniform(-pi, pi);  // gesture stroke direction
    const Eigen::Vector2d g(std::sin(dir), std::cos(dir));
    double snr_lin = 0.0;

    auto modality = [&](const Eigen::Vector2d& tx, const Eigen::Vector2d& rx,
                        double duty, int span) {
      if (duty <= 0.0) return;
      const double fs = slot_rate / span;
      const int n = static_cast<int>(std::floor(sw.gesture_duration_s * fs));
      if (n < 4) return;
      const Eigen::Vector2d to_tx = (tx - subjects[s].pos).normalized();
      const Eigen::Vector2d to_rx = (rx - subjects[s].pos).normalized();
      Eigen::Vector2d bis = to_tx + to_rx;
      if (bis.norm() < 1e-12) return;
      bis.normalize();
      const double proj = std::abs(bis.dot(g));
      const double d_tx = std::max(0.5, (tx - subjects[s].pos).norm());
      const double d_rx = std::max(0.5, (rx - subjects[s].pos).norm());
      const double amp = undb10(0.5 * sw.sense_ref_db) * proj *
                         (sw.ref_range_m * sw.ref_range_m) / (d_tx * d_rx);
      Eigen::VectorXcd sig(n), noise(n);
      for (int t = 0; t < n; ++t) {
        const double disp = synthetic_gesture_displacement(t / fs);
        sig(t) = cxd(amp * (1.0 + 20.0 * disp), 0.0) + rng.cnormal();
        noise(t) = rng.cnormal();
      }
      // Fractional band: decimation folds the stroke spectrum, so a fixed
      // share of [0, fs/2] captures a stable slice of the motion energy.
      try {
        const double r = undb10(s_snr(sig, noise, fs, 0.05 * fs, 0.499 * fs));
        snr_lin += std::max(0.0, r - 1.0);  // subtract the noise's own band
      } catch (const std::invalid_argument&) {
      }
    };

    // Every AP that schedules the subject illuminates it; the echo is
    // received monostatically and by every UE in listening range.
    for (int a = 0; a < n_aps; ++a) {
      if (sub_duty[a][s] <= 0.0) continue;
      modality(aps[a], aps[a], sub_duty[a][s], spans[a]);
      for (int u = 0; u < n_ues; ++u) {
        if (ue_duty[u] <= 0.0) continue;
        if ((ues[u].pos - subjects[s].pos).norm() > reach) continue;
        modality(aps[a], ues[u].pos, sub_duty[a][s], spans[a]);
      }
    }
    ssnr_sum += db10(std::max(snr_lin, 1e-3));
  }
  out.s_snr_db = ssnr_sum / sw.n_subjects;
  return out;
}

}  // namespace

TrendTable sweep_large_scale(int case_id, const ScenarioConfig& cfg,
                             bool parallel) {
  require(case_id == 1 || case_id == 2, "sweep_large_scale: case must be 1 or 2");
  const SweepParams& sw = cfg.sweep;
  require(sw.trials >= 1, "sweep_large_scale: trials must be >= 1");

  const std::vector<int>& grid_counts =
      case_id == 1 ? sw.ue_counts : sw.ap_counts;
  const int fixed_ues =
      *std::max_element(sw.ue_counts.begin(), sw.ue_counts.end());
  // Case 1: one AP's cell. Case 2: a hall several cells wide that only a
  // dense AP row can cover end to end.
  const double hall_half_x =
      (case_id == 1 ? 0.7 : 2.2) * sw.area_range_m;

  TrendTable table;
  table.case_id = case_id;
  for (int setting : grid_counts) {
    const int n_ues = case_id == 1 ? setting : fixed_ues;
    const int n_aps = case_id == 1 ? 1 : setting;
    std::vector<TrialOut> trials(sw.trials);
#pragma omp parallel for schedule(static) if (parallel)
    for (int t = 0; t < sw.trials; ++t)
      trials[t] = sweep_trial(
          cfg, n_ues, n_aps, hall_half_x,
          derive_seed(derive_seed(cfg.seed, 0x53EE9, case_id), setting, t));
    TrendRow row;
    row.setting = setting;
    for (const TrialOut& t : trials) {
      row.mean_throughput_bps += t.throughput;
      row.mean_s_snr_db += t.s_snr_db;
    }
    row.mean_throughput_bps /= sw.trials;
    row.mean_s_snr_db /= sw.trials;
    table.rows.push_back(row);
  }
  return table;
}

// ----- point-cloud scan --------------------------------------------------------------

ScanGrid scan_scene(const Scene& scene, const OfdmConfig& ofdm,
                    const ScanParams& params, std::uint64_t seed) {
  require(scene.aps.size() == 1, "scan_scene: needs exactly one AP");
  require(params.n_az >= 1 && params.n_el >= 1,
          "scan_scene: grid must be nonempty");
  require(params.dwell_packets >= 1, "scan_scene: dwell must be >= 1");
  // The scan runs on one chain regardless of how many the AP carries.
  Node ap = scene.aps[0];
  ap.n_tx_chains = 1;
  ap.n_rx_chains = 1;

  ScanGrid scan;
  for (int i = 0; i < params.n_az; ++i)
    scan.az_rad.push_back(
        params.n_az == 1
            ? params.az_lo_rad
            : params.az_lo_rad + (params.az_hi_rad - params.az_lo_rad) * i /
                                     (params.n_az - 1));
  for (int j = 0; j < params.n_el; ++j)
    scan.el_rad.push_back(
        params.n_el == 1
            ? params.el_lo_rad
            : params.el_lo_rad + (params.el_hi_rad - params.el_lo_rad) * j /
                                     (params.n_el - 1));
  scan.power_db.resize(params.n_az, params.n_el);
  scan.range_m.resize(params.n_az, params.n_el);

  // Wide Tx beam at the subjects' mean azimuth; fine Rx per cell; elevation
  // handled by an independent vertical axis of el_elements. The per-subject
  // channels do not depend on the scan cell, so H * t is hoisted out of the
  // cell loops.
  double az_sum = 0.0;
  for (const Subject& s : scene.subjects)
    az_sum += node_bearing(ap, s.position);
  const double tx_center =
      scene.subjects.empty() ? 0.0 : az_sum / scene.subjects.size();
  const Awv tx = widen_beam(ap.array, tx_center, params.tx_width_rad);
  HybridBeamformers tx_bf;
  tx_bf.tx_awv = {tx};
  tx_bf.tx_digital = Eigen::MatrixXcd::Ones(1, 1);
  const Eigen::MatrixXcd t_eff = tx_bf.tx_effective();
  PhasedArray el_arr;
  el_arr.elements = params.el_elements;

  const int nsc = ofdm.n_subcarriers;
  const int n_sub = static_cast<int>(scene.subjects.size());
  // ht[pk][si] holds H_k * t for every subcarrier, one column per k.
  std::vector<std::vector<Eigen::MatrixXcd>> ht(
      params.dwell_packets, std::vector<Eigen::MatrixXcd>(n_sub));
  for (int pk = 0; pk < params.dwell_packets; ++pk)
    for (int si = 0; si < n_sub; ++si) {
      const CxTensor h =
          gen_sensing_channel(ap, ap, {scene.subjects[si]}, ofdm,
                              pk / ofdm.slow_time_hz,
                              derive_seed(seed, 0xA5, si));
      Eigen::MatrixXcd& m = ht[pk][si];
      m.resize(h.rx(), nsc);
      for (int k = 0; k < nsc; ++k) m.col(k) = h.slice(k) * t_eff;
    }

  const double noise_amp = undb10(0.5 * params.noise_db);
  for (int i = 0; i < params.n_az; ++i) {
    HybridBeamformers rx_bf;
    rx_bf.rx_awv = {quantize(steer(ap.array, scan.az_rad[i]),
                             ap.array.phase_bits, ap.array.amp_bits)};
    rx_bf.rx_digital = Eigen::MatrixXcd::Ones(1, 1);
    const Eigen::MatrixXcd r_eff = rx_bf.rx_effective();
    for (int j = 0; j < params.n_el; ++j) {
      const Awv w_el = quantize(steer(el_arr, scan.el_rad[j]),
                                el_arr.phase_bits, el_arr.amp_bits);
      Rng rng(derive_seed(seed, i, j));
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(nsc);
      for (int pk = 0; pk < params.dwell_packets; ++pk) {
        Eigen::VectorXcd csi = Eigen::VectorXcd::Zero(nsc);
        for (int si = 0; si < n_sub; ++si) {
          // Vertical-axis gain toward this subject, normalized to the
          // array size so it only ever attenuates.
          const double el_s =
              node_elevation(ap, scene.subjects[si].position);
          const double g_el =
              undb10(0.5 * array_gain_db(w_el, el_arr, el_s)) /
              el_arr.elements;
          csi += g_el * (r_eff * ht[pk][si]).transpose();
        }
        for (int k = 0; k < nsc; ++k) csi(k) += noise_amp * rng.cnormal();
        acc += csi_to_cir(csi).cwiseAbs2();
      }
      acc /= params.dwell_packets;
      int tap = 0;
      const double peak = acc.maxCoeff(&tap);
      scan.power_db(i, j) = db10(std::max(peak, 1e-300));
      scan.range_m(i, j) = std::max(tap, 1) * range_bin_m(ofdm);
    }
  }
  return scan;
}

}  // namespace isac
