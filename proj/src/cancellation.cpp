// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/cancellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isac/rng.hpp"

namespace isac {

namespace {

// Optimization variables. Analog entries are stored as they appear in the
// analog matrices, i.e. conjugates of the AWVs.
struct Params {
  std::vector<Eigen::VectorXcd> b;  // per rx chain
  std::vector<Eigen::VectorXcd> c;  // per tx chain
  Eigen::MatrixXcd a;               // rx digital, streams x rx chains
  Eigen::MatrixXcd d;               // tx digital, tx chains x streams
};

Params params_from(const HybridBeamformers& bf) {
  Params p;
  for (const Awv& w : bf.rx_awv) {
    Eigen::VectorXcd v(w.size());
    for (int e = 0; e < w.size(); ++e) v(e) = std::conj(w.w[e]);
    p.b.push_back(std::move(v));
  }
  for (const Awv& w : bf.tx_awv) {
    Eigen::VectorXcd v(w.size());
    for (int e = 0; e < w.size(); ++e) v(e) = std::conj(w.w[e]);
    p.c.push_back(std::move(v));
  }
  p.a = bf.rx_digital;
  p.d = bf.tx_digital;
  return p;
}

HybridBeamformers bf_from(const Params& p) {
  HybridBeamformers bf;
  for (const auto& v : p.b) {
    Awv w;
    w.w.resize(v.size());
    for (int e = 0; e < v.size(); ++e) w.w[e] = std::conj(v(e));
    bf.rx_awv.push_back(std::move(w));
  }
  for (const auto& v : p.c) {
    Awv w;
    w.w.resize(v.size());
    for (int e = 0; e < v.size(); ++e) w.w[e] = std::conj(v(e));
    bf.tx_awv.push_back(std::move(w));
  }
  bf.rx_digital = p.a;
  bf.tx_digital = p.d;
  return bf;
}

class NullOptimizer {
 public:
  NullOptimizer(const CxTensor& h, const PhasedArray& arr,
                const HybridBeamformers& init,
                const std::vector<MainlobeTarget>& targets,
                const BeamNullConfig& cfg)
      : arr_(arr), cfg_(cfg), init_(params_from(init)) {
    m_ = arr.elements;
    r_ = static_cast<int>(init.rx_awv.size());
    t_ = static_cast<int>(init.tx_awv.size());
    require(h.rx() == m_ * r_ && h.tx() == m_ * t_,
            "beam_null: tensor shape does not match the beamformers");
    slices_.reserve(h.nsc());
    for (int k = 0; k < h.nsc(); ++k) slices_.push_back(h.slice(k));
    a_norm0_ = init_.a.norm();
    d_norm0_ = init_.d.norm();

    for (const MainlobeTarget& t : targets) {
      require_bearing(t.bearing_rad, "beam_null");
      targets_.push_back(
          {steer(arr, t.bearing_rad), undb10(t.min_gain_db), t.tx_side});
    }
  }

  BeamNullResult run() {
    BeamNullResult res;
    res.objective_init = eval(init_);
    if (!targets_ok(init_))
      throw infeasible_error(
          "beam_null: initial weights violate a mainlobe target");

    Params x = init_;
    project(x);
    if (!targets_ok(x)) {
      // Projection only scales patterns up, but repair just in case.
      if (!restore(x, false))
        throw infeasible_error("beam_null: projected start is infeasible");
    }

    double f = eval(x);
    f = pgd(x, f, true, cfg_.max_iters, res.iterations, res.converged);

    if (cfg_.quantize) {
      Params q = x;
      quantize_analog(q);
      if (!targets_ok(q)) {
        q = init_;  // the initial weights live on the grid already
        project_digital(q);
        if (!targets_ok(q)) q = init_;
      }
      double fq = eval(q);
      for (int pass = 0; pass < cfg_.polish_passes; ++pass)
        fq = polish_pass(q, fq);
      bool dummy = false;
      int dit = 0;
      fq = pgd(q, fq, false, cfg_.digital_iters, dit, dummy);
      res.iterations += dit;
      x = q;
      f = fq;
    }

    if (f > res.objective_init) {
      res.bf = bf_from(init_);
      res.objective_final = res.objective_init;
      res.converged = false;
      return res;
    }
    res.bf = bf_from(x);
    res.objective_final = f;
    return res;
  }

 private:
  struct Target {
    Awv response;
    double min_gain_lin;
    bool tx_side;
  };

  double eval(const Params& p) const {
    const int mt = m_ * t_;
    double f = 0.0;
    Eigen::MatrixXcd bh(r_, mt), x(r_, t_);
    for (const auto& h : slices_) {
      for (int r = 0; r < r_; ++r)
        bh.row(r) = p.b[r].transpose() * h.middleRows(r * m_, m_);
      for (int r = 0; r < r_; ++r)
        for (int t = 0; t < t_; ++t)
          x(r, t) = bh.row(r).segment(t * m_, m_) * p.c[t];
      f += (p.a * x * p.d).squaredNorm();
    }
    return f;
  }

  // Wirtinger gradients of sum_k |A B H_k C D|_F^2 with respect to the
  // conjugated variables; analog gradients are masked to their chain blocks.
  void grad(const Params& p, bool analog, Params& g) const {
    const int mt = m_ * t_;
    const int mr = m_ * r_;
    g.b.assign(r_, Eigen::VectorXcd::Zero(m_));
    g.c.assign(t_, Eigen::VectorXcd::Zero(m_));
    g.a = Eigen::MatrixXcd::Zero(p.a.rows(), p.a.cols());
    g.d = Eigen::MatrixXcd::Zero(p.d.rows(), p.d.cols());

    Eigen::MatrixXcd bh(r_, mt), x(r_, t_), hc(mr, t_);
    for (const auto& h : slices_) {
      for (int r = 0; r < r_; ++r)
        bh.row(r) = p.b[r].transpose() * h.middleRows(r * m_, m_);
      for (int r = 0; r < r_; ++r)
        for (int t = 0; t < t_; ++t)
          x(r, t) = bh.row(r).segment(t * m_, m_) * p.c[t];
      const Eigen::MatrixXcd mk = p.a * x * p.d;
      const Eigen::MatrixXcd y = p.a.adjoint() * mk * p.d.adjoint();  // R x T

      g.a += mk * p.d.adjoint() * x.adjoint();
      g.d += x.adjoint() * p.a.adjoint() * mk;
      if (!analog) continue;

      for (int t = 0; t < t_; ++t)
        hc.col(t) = h.middleCols(t * m_, m_) * p.c[t];
      for (int r = 0; r < r_; ++r)
        for (int e = 0; e < m_; ++e) {
          cxd acc(0, 0);
          for (int t = 0; t < t_; ++t)
            acc += y(r, t) * std::conj(hc(r * m_ + e, t));
          g.b[r](e) += acc;
        }
      for (int t = 0; t < t_; ++t)
        for (int e = 0; e < m_; ++e) {
          cxd acc(0, 0);
          for (int r = 0; r < r_; ++r)
            acc += std::conj(bh(r, t * m_ + e)) * y(r, t);
          g.c[t](e) += acc;
        }
    }
  }

  void project(Params& p) const {
    for (auto& v : p.b) {
      const double mx = v.cwiseAbs().maxCoeff();
      if (mx > 0) v /= mx;
    }
    for (auto& v : p.c) {
      const double mx = v.cwiseAbs().maxCoeff();
      if (mx > 0) v /= mx;
    }
    project_digital(p);
  }

  void project_digital(Params& p) const {
    const double an = p.a.norm(), dn = p.d.norm();
    if (an > 0 && a_norm0_ > 0) p.a *= a_norm0_ / an;
    if (dn > 0 && d_norm0_ > 0) p.d *= d_norm0_ / dn;
  }

  double tx_gain_lin(const Params& p, const Awv& resp) const {
    Eigen::VectorXcd pat(t_);
    for (int t = 0; t < t_; ++t) {
      cxd acc(0, 0);
      for (int e = 0; e < m_; ++e) acc += p.c[t](e) * resp.w[e];
      pat(t) = acc;
    }
    return (p.d.transpose() * pat).squaredNorm();
  }

  double rx_gain_lin(const Params& p, const Awv& resp) const {
    Eigen::VectorXcd pat(r_);
    for (int r = 0; r < r_; ++r) {
      cxd acc(0, 0);
      for (int e = 0; e < m_; ++e) acc += p.b[r](e) * resp.w[e];
      pat(r) = acc;
    }
    return (p.a * pat).squaredNorm();
  }

  bool targets_ok(const Params& p) const {
    for (const Target& t : targets_) {
      const double g =
          t.tx_side ? tx_gain_lin(p, t.response) : rx_gain_lin(p, t.response);
      if (g < t.min_gain_lin * (1.0 - 1e-9)) return false;
    }
    return true;
  }

  // Blends toward the initial weights with growing strength until every
  // mainlobe target holds again.
  bool restore(Params& p, bool digital_only) const {
    for (double gamma : {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}) {
      Params q = p;
      if (!digital_only) {
        for (int r = 0; r < r_; ++r)
          q.b[r] = (1 - gamma) * q.b[r] + gamma * init_.b[r];
        for (int t = 0; t < t_; ++t)
          q.c[t] = (1 - gamma) * q.c[t] + gamma * init_.c[t];
      }
      q.a = (1 - gamma) * q.a + gamma * init_.a;
      q.d = (1 - gamma) * q.d + gamma * init_.d;
      if (digital_only)
        project_digital(q);
      else
        project(q);
      if (targets_ok(q)) {
        p = std::move(q);
        return true;
      }
    }
    return false;
  }

  double pgd(Params& x, double f, bool analog, int max_iters, int& iters,
             bool& converged) {
    Params g;
    double mu = -1.0;
    int stall = 0, restore_failures = 0;
    converged = false;

    for (int it = 0; it < max_iters; ++it) {
      grad(x, analog, g);
      double gn2 = g.a.squaredNorm() + g.d.squaredNorm();
      for (const auto& v : g.b) gn2 += v.squaredNorm();
      for (const auto& v : g.c) gn2 += v.squaredNorm();
      if (gn2 == 0.0) {
        converged = true;
        iters = it;
        return f;
      }
      if (mu < 0) {
        double xn2 = x.a.squaredNorm() + x.d.squaredNorm();
        for (const auto& v : x.b) xn2 += v.squaredNorm();
        for (const auto& v : x.c) xn2 += v.squaredNorm();
        mu = 0.1 * std::sqrt(xn2 / gn2);
      }

      mu *= 2.0;  // optimistic growth, backtracking pays it back
      double f_try = f;
      Params best = x;
      while (true) {
        Params cand = x;
        if (analog) {
          for (int r = 0; r < r_; ++r) cand.b[r] -= mu * g.b[r];
          for (int t = 0; t < t_; ++t) cand.c[t] -= mu * g.c[t];
        }
        cand.a -= mu * g.a;
        cand.d -= mu * g.d;
        if (analog)
          project(cand);
        else
          project_digital(cand);
        if (!targets_ok(cand)) {
          if (!restore(cand, !analog)) {
            if (++restore_failures >= cfg_.max_restore_failures)
              throw infeasible_error(
                  "beam_null: repeated mainlobe repair failures");
            mu *= 0.5;
            if (mu < 1e-18) break;
            continue;
          }
        }
        restore_failures = 0;
        const double fc = eval(cand);
        if (fc <= f) {
          best = std::move(cand);
          f_try = fc;
          break;
        }
        mu *= 0.5;
        if (mu < 1e-18) break;
      }

      const double rel = (f - f_try) / std::max(f, 1e-300);
      x = std::move(best);
      f = f_try;
      iters = it + 1;
      if (rel < cfg_.tol) {
        if (++stall >= cfg_.patience) {
          converged = true;
          return f;
        }
      } else {
        stall = 0;
      }
    }
    return f;
  }

  void quantize_analog(Params& p) const {
    Params q = p;
    HybridBeamformers bf = bf_from(q);
    for (Awv& w : bf.rx_awv) w = quantize(w, arr_.phase_bits, arr_.amp_bits);
    for (Awv& w : bf.tx_awv) w = quantize(w, arr_.phase_bits, arr_.amp_bits);
    Params r = params_from(bf);
    p.b = std::move(r.b);
    p.c = std::move(r.c);
  }

  // One greedy coordinate sweep over the quantized analog entries. Each
  // element tries every phase level at the neighbouring amplitude levels (and
  // off); a move is kept only if it lowers the objective and keeps every
  // mainlobe target. Rank-1 structure makes candidate evaluation O(1) per
  // subcarrier.
  double polish_pass(Params& p, double f) {
    const int n_k = static_cast<int>(slices_.size());
    const int mt = m_ * t_;
    const int mr = m_ * r_;
    const int phase_levels = 1 << arr_.phase_bits;
    const int amp_levels = 1 << arr_.amp_bits;

    std::vector<Eigen::MatrixXcd> mk(n_k);
    {
      Eigen::MatrixXcd bh(r_, mt), x(r_, t_);
      for (int k = 0; k < n_k; ++k) {
        for (int r = 0; r < r_; ++r)
          bh.row(r) = p.b[r].transpose() * slices_[k].middleRows(r * m_, m_);
        for (int r = 0; r < r_; ++r)
          for (int t = 0; t < t_; ++t)
            x(r, t) = bh.row(r).segment(t * m_, m_) * p.c[t];
        mk[k] = p.a * x * p.d;
      }
    }

    auto try_side = [&](bool tx_side) {
      std::vector<Eigen::MatrixXcd> pk(n_k);  // a B H_k (tx) or H_k C d (rx)
      if (tx_side) {
        Eigen::MatrixXcd bh(r_, mt);
        for (int k = 0; k < n_k; ++k) {
          for (int r = 0; r < r_; ++r)
            bh.row(r) = p.b[r].transpose() * slices_[k].middleRows(r * m_, m_);
          pk[k] = p.a * bh;  // S_rx x MT
        }
      } else {
        for (int k = 0; k < n_k; ++k) {
          Eigen::MatrixXcd hc(mr, t_);
          for (int t = 0; t < t_; ++t)
            hc.col(t) = slices_[k].middleCols(t * m_, m_) * p.c[t];
          pk[k] = hc * p.d;  // MR x S_tx
        }
      }

      const int n_chains = tx_side ? t_ : r_;
      for (int chain = 0; chain < n_chains; ++chain) {
        Eigen::VectorXcd& v = tx_side ? p.c[chain] : p.b[chain];
        for (int e = 0; e < m_; ++e) {
          // Delta response: f(delta) = f + 2 Re(delta conj(s1)) + |d|^2 s2.
          cxd s1(0, 0);
          double s2 = 0.0;
          for (int k = 0; k < n_k; ++k) {
            if (tx_side) {
              const auto u = pk[k].col(chain * m_ + e);
              const auto vr = p.d.row(chain);
              s1 += (u.adjoint() * (mk[k] * vr.adjoint()))(0, 0);
              s2 += u.squaredNorm() * vr.squaredNorm();
            } else {
              const auto u = p.a.col(chain);
              const auto vr = pk[k].row(chain * m_ + e);
              s1 += (u.adjoint() * (mk[k] * vr.adjoint()))(0, 0);
              s2 += u.squaredNorm() * vr.squaredNorm();
            }
          }

          const cxd cur = v(e);
          const int cur_level = std::min(
              amp_levels - 1, static_cast<int>(std::abs(cur) * amp_levels));
          double best_df = -1e-12 * std::max(f, 1.0);
          cxd best_delta(0, 0);
          bool found = false;
          for (int li = -1; li <= 1; ++li) {
            const int level = cur_level + li;
            double amp;
            if (level < 0)
              amp = 0.0;
            else if (level >= amp_levels)
              continue;
            else
              amp = (level + 0.5) / amp_levels;
            for (int ph = 0; ph < (amp == 0.0 ? 1 : phase_levels); ++ph) {
              const cxd cand =
                  std::polar(amp, 2.0 * pi * ph / phase_levels);
              const cxd delta = cand - cur;
              if (std::abs(delta) == 0.0) continue;
              const double df =
                  2.0 * (delta * std::conj(s1)).real() +
                  std::norm(delta) * s2;
              if (df < best_df) {
                Params trial = p;
                (tx_side ? trial.c[chain] : trial.b[chain])(e) = cand;
                if (!targets_ok(trial)) continue;
                best_df = df;
                best_delta = delta;
                found = true;
              }
            }
          }
          if (!found) continue;

          v(e) += best_delta;
          f += best_df;
          for (int k = 0; k < n_k; ++k) {
            if (tx_side)
              mk[k] += best_delta * pk[k].col(chain * m_ + e) *
                       p.d.row(chain);
            else
              mk[k] += best_delta * p.a.col(chain) *
                       pk[k].row(chain * m_ + e);
          }
        }
      }
    };

    try_side(true);
    try_side(false);
    // Rebuild the exact objective; incremental updates drift a little.
    return eval(p);
  }

  PhasedArray arr_;
  BeamNullConfig cfg_;
  Params init_;
  std::vector<Eigen::MatrixXcd> slices_;
  std::vector<Target> targets_;
  int m_ = 0, r_ = 0, t_ = 0;
  double a_norm0_ = 0.0, d_norm0_ = 0.0;
};

}  // namespace

double composite_tx_gain_db(const HybridBeamformers& bf,
                            const PhasedArray& arr, double bearing) {
  const Params p = params_from(bf);
  const Awv resp = steer(arr, bearing);
  Eigen::VectorXcd pat(static_cast<int>(p.c.size()));
  for (int t = 0; t < pat.size(); ++t) {
    cxd acc(0, 0);
    for (int e = 0; e < arr.elements; ++e) acc += p.c[t](e) * resp.w[e];
    pat(t) = acc;
  }
  return db10((p.d.transpose() * pat).squaredNorm());
}

double composite_rx_gain_db(const HybridBeamformers& bf,
                            const PhasedArray& arr, double bearing) {
  const Params p = params_from(bf);
  const Awv resp = steer(arr, bearing);
  Eigen::VectorXcd pat(static_cast<int>(p.b.size()));
  for (int r = 0; r < pat.size(); ++r) {
    cxd acc(0, 0);
    for (int e = 0; e < arr.elements; ++e) acc += p.b[r](e) * resp.w[e];
    pat(r) = acc;
  }
  return db10((p.a * pat).squaredNorm());
}

BeamNullResult beam_null(const CxTensor& h_ti, const PhasedArray& arr,
                         const HybridBeamformers& init,
                         const std::vector<MainlobeTarget>& targets,
                         const BeamNullConfig& cfg) {
  validate(arr);
  validate(init);
  require(cfg.tol > 0 && cfg.max_iters >= 1 && cfg.patience >= 1,
          "beam_null: invalid configuration");
  NullOptimizer opt(h_ti, arr, init, targets, cfg);
  return opt.run();
}

DigitalCancelResult digital_cancel(const Eigen::MatrixXcd& y,
                                   const Eigen::MatrixXcd& yhat) {
  require(y.rows() == yhat.rows() && y.cols() == yhat.cols(),
          "digital_cancel: shape mismatch");
  DigitalCancelResult res;
  const double denom = yhat.squaredNorm();
  res.beta = denom > 0 ? (yhat.conjugate().cwiseProduct(y)).sum() / denom
                       : cxd(0, 0);
  res.residual = y - res.beta * yhat;
  return res;
}

PipelineResult cancel_pipeline(const Node& ap,
                               const std::vector<Subject>& subjects,
                               const OfdmConfig& ofdm,
                               const PipelineConfig& cfg, std::uint64_t seed) {
  validate(ofdm);
  validate(ap);
  require(cfg.sector >= 0 && cfg.sector < cfg.probe.n_sectors,
          "cancel_pipeline: operating sector out of range");
  require(cfg.n_packets >= 2, "cancel_pipeline: need at least two packets");
  require(cfg.probe_repeats >= 1, "cancel_pipeline: probe_repeats must be >= 1");
  require(cfg.probe.n_sectors >= ap.array.elements,
          "cancel_pipeline: codebook too small to identify the leakage");

  const int nsc = ofdm.n_subcarriers;
  const int m = ap.array.elements;
  const double center = sector_center(cfg.probe.n_sectors, cfg.sector);

  TxInterference ti(ap, ofdm, cfg.ti, cfg.probe.n_sectors,
                    derive_seed(seed, 0x71AB));
  const std::vector<Awv> book = sector_codebook(ap.array, cfg.probe.n_sectors);

  // Initial operating beams: Tx on the sector beam (or widened over it when
  // the joint beam must cover more than the sector), Rx fine on its own
  // sector, which may differ from the Tx one.
  require(cfg.rx_sector < cfg.probe.n_sectors,
          "cancel_pipeline: rx_sector out of range");
  const Awv tx_beam = cfg.tx_width_rad > 0.0
                          ? widen_beam(ap.array, center, cfg.tx_width_rad)
                          : book[cfg.sector];
  const int rx_sector = cfg.rx_sector >= 0 ? cfg.rx_sector : cfg.sector;
  const double rx_center = sector_center(cfg.probe.n_sectors, rx_sector);
  HybridBeamformers init;
  init.tx_awv.assign(ap.n_tx_chains, tx_beam);
  init.rx_awv.assign(ap.n_rx_chains, book[rx_sector]);
  init.tx_digital = Eigen::MatrixXcd::Ones(ap.n_tx_chains, 1);
  init.rx_digital =
      Eigen::MatrixXcd::Ones(1, ap.n_rx_chains) / std::sqrt(ap.n_rx_chains);

  // Element-level leakage estimate, then the analog null.
  const TiEstimate est = ti_probe(ap, ti, cfg.sector, book, ofdm, cfg.probe, 0,
                                  derive_seed(seed, 0x9E0B));
  CxTensor h_est = est.element_level(ap.array, book);

  std::vector<MainlobeTarget> targets = {
      {center, composite_tx_gain_db(init, ap.array, center) -
                   cfg.mainlobe_slack_db,
       true},
      {rx_center, composite_rx_gain_db(init, ap.array, rx_center) -
                      cfg.mainlobe_slack_db,
       false}};
  PipelineResult out;
  CancellationReport& rep = out.report;
  BeamNullResult null_res;
  try {
    null_res = beam_null(decimate_nsc(h_est, cfg.null_decimation), ap.array,
                         init, targets, cfg.null_cfg);
  } catch (const infeasible_error&) {
    rep.feasible = false;
    null_res.bf = init;
  }
  rep.iterations = null_res.iterations;
  rep.converged = null_res.converged;
  out.bf = null_res.bf;

  // Slow-time loop: each packet carries a reduced-power leakage-only probe
  // window and a full-power data window.
  const double amp = std::sqrt(undb10(cfg.probe.tx_power_dbm) / nsc /
                               ap.n_tx_chains);
  const double probe_scale = std::sqrt(undb10(-cfg.probe.probe_backoff_db));
  out.cir.resize(cfg.n_packets, nsc);

  double p_before = 0, p_null = 0, p_digital = 0, p_noise = 0;
  double p_sense_before = 0, p_sense_after = 0;
  const CxTensor h_zero(m * ap.n_rx_chains, m * ap.n_tx_chains, nsc);

  for (int p = 0; p < cfg.n_packets; ++p) {
    const double t = p / ofdm.slow_time_hz;
    const CxTensor& h_ti = ti.at(cfg.sector, p);
    const CxTensor h_s = gen_sensing_channel(ap, ap, subjects, ofdm, t,
                                             derive_seed(seed, 0x5E25));
    const CxTensor h_all = compose({&h_ti, &h_s});

    const Eigen::MatrixXcd s =
        amp * trn_field(1, nsc, derive_seed(seed, 0x7121, p));
    const Eigen::MatrixXcd s_probe = probe_scale * s;

    Eigen::MatrixXcd y_probe = Eigen::MatrixXcd::Zero(1, nsc);
    for (int rep_i = 0; rep_i < cfg.probe_repeats; ++rep_i)
      y_probe += apply_link(h_ti, out.bf, s_probe, cfg.probe.noise_power_dbm,
                            derive_seed(seed, 0xF0BE + rep_i, p));
    y_probe /= cfg.probe_repeats;
    const Eigen::MatrixXcd y = apply_link(
        h_all, out.bf, s, cfg.probe.noise_power_dbm, derive_seed(seed, 5, p));

    // Per-subcarrier leakage estimate from the probe window, scaled back up.
    Eigen::MatrixXcd yhat(1, nsc);
    for (int k = 0; k < nsc; ++k)
      yhat(0, k) = y_probe(0, k) / s_probe(0, k) * s(0, k);

    const DigitalCancelResult dc = digital_cancel(y, yhat);
    Eigen::VectorXcd csi(nsc);
    for (int k = 0; k < nsc; ++k) csi(k) = dc.residual(0, k) / s(0, k);
    out.cir.row(p) = csi_to_cir(csi).transpose();

    // Power accounting on clean components through the same weights.
    const Eigen::MatrixXcd y_ti_init =
        apply_link(h_ti, init, s, db_floor, 0);
    const Eigen::MatrixXcd y_ti_null =
        apply_link(h_ti, out.bf, s, db_floor, 0);
    const Eigen::MatrixXcd y_s_init = apply_link(h_s, init, s, db_floor, 0);
    const Eigen::MatrixXcd y_s_null = apply_link(h_s, out.bf, s, db_floor, 0);
    const Eigen::MatrixXcd y_noise =
        apply_link(h_zero, out.bf, s, cfg.probe.noise_power_dbm,
                   derive_seed(seed, 6, p));
    p_before += y_ti_init.squaredNorm();
    p_null += y_ti_null.squaredNorm();
    p_digital += (y_ti_null - dc.beta * yhat).squaredNorm();
    p_sense_before += y_s_init.squaredNorm();
    p_sense_after += y_s_null.squaredNorm();
    p_noise += y_noise.squaredNorm();
  }

  const double n = cfg.n_packets;
  rep.ti_before_db = db10(p_before / n);
  rep.ti_after_null_db = db10(p_null / n);
  rep.ti_after_digital_db = db10(p_digital / n);
  rep.sensing_before_db = db10(p_sense_before / n);
  rep.sensing_after_db = db10(p_sense_after / n);
  rep.noise_floor_db = db10(p_noise / n);
  return out;
}

}  // namespace isac
