// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include "isac/scheduling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "isac/rng.hpp"

namespace isac {
namespace {

constexpr double kGeomEps = 1e-9;

double midpoint(double lo, double hi) { return 0.5 * (lo + hi); }

}  // namespace

double LinkBudget::comm_range(double width_rad) const {
  if (width_rad <= 0.0) throw std::domain_error("beam width must be positive");
  return ref_range_m * std::pow(ref_width_rad / width_rad, comm_exp);
}

double LinkBudget::sense_range(double width_rad) const {
  if (width_rad <= 0.0) throw std::domain_error("beam width must be positive");
  return ref_range_m * std::pow(ref_width_rad / width_rad, sense_exp);
}

double LinkBudget::max_range(double width_rad, bool is_ue) const {
  return is_ue ? comm_range(width_rad) : sense_range(width_rad);
}

RangeBearingGrid::RangeBearingGrid(int k_r, int k_d, double range_extent_m, double fov_rad)
    : k_r_(k_r), k_d_(k_d), range_extent_m_(range_extent_m), fov_rad_(fov_rad) {
  if (k_r < 1 || k_d < 1) throw std::invalid_argument("grid needs at least one bin per axis");
  if (range_extent_m <= 0.0 || fov_rad <= 0.0) {
    throw std::invalid_argument("grid extent and field of view must be positive");
  }
  range_bin_m_ = range_extent_m_ / k_r_;
  bearing_bin_rad_ = fov_rad_ / k_d_;
  cells_.resize(static_cast<std::size_t>(k_r_) * k_d_);
}

int RangeBearingGrid::add_entity(double range_m, double bearing_rad, bool is_ue) {
  if (range_m < 0.0 || range_m > range_extent_m_ + kGeomEps) {
    throw std::out_of_range("entity range outside grid");
  }
  if (std::abs(bearing_rad) > 0.5 * fov_rad_ + kGeomEps) {
    throw std::out_of_range("entity bearing outside field of view");
  }
  int id = n_entities();
  entities_.push_back({range_m, bearing_rad, is_ue});
  if (is_ue) ++n_ues_;
  int rb = range_bin(range_m);
  int bb = bearing_bin(bearing_rad);
  cells_[static_cast<std::size_t>(rb) * k_d_ + bb].push_back(id);
  return id;
}

int RangeBearingGrid::range_bin(double range_m) const {
  int rb = static_cast<int>(std::floor(range_m / range_bin_m_));
  return std::clamp(rb, 0, k_r_ - 1);
}

int RangeBearingGrid::bearing_bin(double bearing_rad) const {
  int bb = static_cast<int>(std::floor((bearing_rad + 0.5 * fov_rad_) / bearing_bin_rad_));
  return std::clamp(bb, 0, k_d_ - 1);
}

double RangeBearingGrid::bin_center_range(int rb) const { return (rb + 0.5) * range_bin_m_; }

double RangeBearingGrid::bin_center_bearing(int bb) const {
  return -0.5 * fov_rad_ + (bb + 0.5) * bearing_bin_rad_;
}

const std::vector<int>& RangeBearingGrid::cell(int rb, int bb) const {
  if (rb < 0 || rb >= k_r_ || bb < 0 || bb >= k_d_) throw std::out_of_range("cell index");
  return cells_[static_cast<std::size_t>(rb) * k_d_ + bb];
}

BeamSpec make_beam(double center_rad, double width_rad, const LinkBudget& budget) {
  if (width_rad < budget.min_width_rad - kGeomEps) {
    throw std::domain_error("beam width below realizable minimum");
  }
  return {center_rad, width_rad, budget.sense_range(width_rad)};
}

bool Coverage::covers_cell(const RangeBearingGrid& grid, int rb, int bb, bool is_ue) const {
  if (bb < bb_lo || bb > bb_hi) return false;
  double limit = is_ue ? comm_range_m : sense_range_m;
  return grid.bin_center_range(rb) <= limit + kGeomEps;
}

bool Coverage::covers(const RangeBearingGrid& grid, int entity_id) const {
  const GridEntity& e = grid.entities().at(entity_id);
  return covers_cell(grid, grid.range_bin(e.range_m), grid.bearing_bin(e.bearing_rad), e.is_ue);
}

Coverage beam_pattern_coverage(const BeamSpec& beam, const RangeBearingGrid& grid,
                               const LinkBudget& budget) {
  if (beam.width_rad < budget.min_width_rad - kGeomEps) {
    throw std::domain_error("beam width below realizable minimum");
  }
  Coverage cov;
  cov.beam = beam;
  cov.comm_range_m = budget.comm_range(beam.width_rad);
  cov.sense_range_m = budget.sense_range(beam.width_rad);
  if (beam.max_range_m > 0.0) cov.sense_range_m = std::min(cov.sense_range_m, beam.max_range_m);
  // Closed boundary: bin centers exactly width/2 from the beam center count.
  double c0 = grid.bin_center_bearing(0);
  double bin = grid.bearing_bin_rad();
  int lo = static_cast<int>(std::ceil((beam.lo_rad() - kGeomEps - c0) / bin));
  int hi = static_cast<int>(std::floor((beam.hi_rad() + kGeomEps - c0) / bin));
  cov.bb_lo = std::max(lo, 0);
  cov.bb_hi = std::min(hi, grid.k_d() - 1);
  return cov;
}

std::vector<int> max_depth_range_search(const Coverage& cov, const RangeBearingGrid& grid) {
  std::vector<int> out;
  for (int bb = cov.bb_lo; bb <= cov.bb_hi; ++bb) {
    for (int rb = 0; rb < grid.k_r(); ++rb) {
      if (grid.bin_center_range(rb) > cov.sense_range_m + kGeomEps) break;
      for (int id : grid.cell(rb, bb)) {
        if (!grid.entities()[id].is_ue) out.push_back(id);
      }
    }
  }
  return out;
}

namespace {

// Bearing extent (cell centers) of the given members; falls back to the beam
// center when there are no members.
std::pair<double, double> member_extremes(const RangeBearingGrid& grid,
                                          const std::vector<int>& ues,
                                          const std::vector<int>& subjects, double fallback) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto eat = [&](int id) {
    const GridEntity& e = grid.entities()[id];
    double c = grid.bin_center_bearing(grid.bearing_bin(e.bearing_rad));
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  };
  for (int id : ues) eat(id);
  for (int id : subjects) eat(id);
  if (lo > hi) return {fallback, fallback};
  return {lo, hi};
}

double cell_range(const RangeBearingGrid& grid, int id) {
  return grid.bin_center_range(grid.range_bin(grid.entities()[id].range_m));
}

double cell_bearing(const RangeBearingGrid& grid, int id) {
  return grid.bin_center_bearing(grid.bearing_bin(grid.entities()[id].bearing_rad));
}

BreadthResult breadth_search_impl(const Coverage& cov, const RangeBearingGrid& grid,
                                  const LinkBudget& budget, double r_max_width_rad,
                                  const std::vector<int>& ues, const std::vector<int>& subjects,
                                  const std::vector<char>* gain_eligible, long* op_count) {
  long ops = 0;
  std::vector<int> subs = subjects;
  std::vector<char> member(grid.n_entities(), 0);
  for (int id : subs) member[id] = 1;
  double width = cov.beam.width_rad;
  double center = cov.beam.center_rad;
  double bin = grid.bearing_bin_rad();

  for (double w = width + bin; w <= r_max_width_rad + kGeomEps; w += bin) {
    auto [lo, hi] = member_extremes(grid, ues, subs, center);
    double c = midpoint(lo, hi);
    double comm_r = budget.comm_range(w);
    double sense_r = budget.sense_range(w);
    ops += static_cast<long>(ues.size() + subs.size());

    // UE retention is hard: a step that strands any UE beyond the shrunken
    // one-way budget is vetoed, and wider steps only shrink it further.
    bool ue_lost = false;
    for (int id : ues) {
      if (cell_range(grid, id) > comm_r + kGeomEps) ue_lost = true;
    }
    if (ue_lost) break;

    int lost = 0;
    for (int id : subs) {
      if (cell_range(grid, id) > sense_r + kGeomEps) ++lost;
    }

    Coverage cand = beam_pattern_coverage(make_beam(c, w, budget), grid, budget);
    std::vector<int> gained;
    for (int bb = cand.bb_lo; bb <= cand.bb_hi; ++bb) {
      for (int rb = 0; rb < grid.k_r(); ++rb) {
        ++ops;
        if (grid.bin_center_range(rb) > sense_r + kGeomEps) break;
        for (int id : grid.cell(rb, bb)) {
          if (grid.entities()[id].is_ue || member[id]) continue;
          if (gain_eligible && !(*gain_eligible)[id]) continue;
          gained.push_back(id);
        }
      }
    }

    if (static_cast<int>(gained.size()) <= lost) continue;

    std::vector<int> next;
    next.reserve(subs.size() + gained.size());
    for (int id : subs) {
      if (cell_range(grid, id) <= sense_r + kGeomEps) {
        next.push_back(id);
      } else {
        member[id] = 0;
      }
    }
    for (int id : gained) {
      next.push_back(id);
      member[id] = 1;
    }
    std::sort(next.begin(), next.end());
    subs = std::move(next);
    width = w;
    auto [nlo, nhi] = member_extremes(grid, ues, subs, c);
    center = midpoint(nlo, nhi);
  }

  if (op_count) *op_count += ops;
  BreadthResult res;
  res.beam = make_beam(center, width, budget);
  res.subjects = subs;
  std::vector<char> was(grid.n_entities(), 0);
  for (int id : subjects) was[id] = 1;
  for (int id : subs) {
    if (!was[id]) res.added.push_back(id);
  }
  return res;
}

}  // namespace

BreadthResult breadth_bearing_search(const Coverage& cov, const RangeBearingGrid& grid,
                                     const LinkBudget& budget, double r_max_width_rad,
                                     const std::vector<int>& ues, const std::vector<int>& subjects,
                                     long* op_count) {
  return breadth_search_impl(cov, grid, budget, r_max_width_rad, ues, subjects, nullptr, op_count);
}

namespace {

struct GroupGeom {
  double center = 0.0;
  double width = 0.0;
  double deepest = 0.0;
};

GroupGeom group_geometry(const RangeBearingGrid& grid, const std::vector<int>& ues,
                         const LinkBudget& budget) {
  GroupGeom g;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int id : ues) {
    lo = std::min(lo, cell_bearing(grid, id));
    hi = std::max(hi, cell_bearing(grid, id));
    g.deepest = std::max(g.deepest, cell_range(grid, id));
  }
  g.center = midpoint(lo, hi);
  g.width = std::max(budget.min_width_rad, hi - lo);
  return g;
}

bool group_feasible(const GroupGeom& g, const LinkBudget& budget, double r_max_width_rad) {
  if (g.width > r_max_width_rad + kGeomEps) return false;
  return g.deepest <= budget.comm_range(g.width) + kGeomEps;
}

}  // namespace

CommSets group_comm_sets(const RangeBearingGrid& grid, const LinkBudget& budget,
                         double r_max_width_rad, int ue_capacity) {
  if (ue_capacity < 1) throw std::invalid_argument("ue_capacity must be at least 1");
  std::vector<int> ues;
  for (int id = 0; id < grid.n_entities(); ++id) {
    if (grid.entities()[id].is_ue) ues.push_back(id);
  }
  std::sort(ues.begin(), ues.end(), [&](int a, int b) {
    double ba = cell_bearing(grid, a), bb = cell_bearing(grid, b);
    if (ba != bb) return ba < bb;
    return a < b;
  });

  CommSets out;
  std::vector<int> cur;
  for (int id : ues) {
    std::vector<int> cand = cur;
    cand.push_back(id);
    GroupGeom g = group_geometry(grid, cand, budget);
    if (!cur.empty() &&
        (static_cast<int>(cand.size()) > ue_capacity || !group_feasible(g, budget, r_max_width_rad))) {
      out.sets.push_back(cur);
      cur.clear();
      cand = {id};
      g = group_geometry(grid, cand, budget);
    }
    if (!group_feasible(g, budget, r_max_width_rad)) {
      throw std::domain_error("UE unreachable under the link budget");
    }
    cur = std::move(cand);
  }
  if (!cur.empty()) out.sets.push_back(cur);
  return out;
}

namespace {

// One feasible beam covering every member of both sets, or width 0 if none.
BeamSpec merged_beam(const RangeBearingGrid& grid, const LinkBudget& budget,
                     double r_max_width_rad, const BcSet& a, const BcSet& b, long* op_count) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double deep_ue = 0.0, deep_sub = 0.0;
  auto eat = [&](const std::vector<int>& ids, bool ue) {
    for (int id : ids) {
      lo = std::min(lo, cell_bearing(grid, id));
      hi = std::max(hi, cell_bearing(grid, id));
      (ue ? deep_ue : deep_sub) = std::max(ue ? deep_ue : deep_sub, cell_range(grid, id));
      ++*op_count;
    }
  };
  eat(a.ues, true);
  eat(b.ues, true);
  eat(a.subjects, false);
  eat(b.subjects, false);
  double w = std::max(budget.min_width_rad, hi - lo);
  if (w > r_max_width_rad + kGeomEps) return {};
  if (deep_ue > budget.comm_range(w) + kGeomEps) return {};
  if (deep_sub > budget.sense_range(w) + kGeomEps) return {};
  return make_beam(midpoint(lo, hi), w, budget);
}

// Sets only ever merge: fold subject-only sets into any set whose union still
// fits one feasible beam, until no pair fits.
void merge_pass(const RangeBearingGrid& grid, const LinkBudget& budget, double r_max_width_rad,
                std::vector<BcSet>& sets, long* op_count) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < sets.size() && !changed; ++i) {
      for (std::size_t j = 0; j < sets.size() && !changed; ++j) {
        if (i == j || !sets[j].ues.empty()) continue;
        BeamSpec beam = merged_beam(grid, budget, r_max_width_rad, sets[i], sets[j], op_count);
        if (beam.width_rad <= 0.0) continue;
        sets[i].beam = beam;
        sets[i].subjects.insert(sets[i].subjects.end(), sets[j].subjects.begin(),
                                sets[j].subjects.end());
        std::sort(sets[i].subjects.begin(), sets[i].subjects.end());
        sets[i].subjects.erase(std::unique(sets[i].subjects.begin(), sets[i].subjects.end()),
                               sets[i].subjects.end());
        sets.erase(sets.begin() + j);
        changed = true;
      }
    }
  }
}

}  // namespace

BuildResult build_bc_sets(const RangeBearingGrid& grid, const CommSets& comm_sets,
                          double r_max_width_rad, const LinkBudget& budget) {
  BuildResult out;
  std::vector<char> covered(grid.n_entities(), 0);

  // Stage 1: upgrade each communication set with depth then breadth search.
  for (const auto& ues : comm_sets.sets) {
    if (ues.empty()) throw std::domain_error("empty communication set");
    GroupGeom g = group_geometry(grid, ues, budget);
    if (!group_feasible(g, budget, r_max_width_rad)) {
      throw std::domain_error("communication set exceeds the link budget");
    }
    BeamSpec beam = make_beam(g.center, g.width, budget);
    Coverage cov = beam_pattern_coverage(beam, grid, budget);
    out.op_count += static_cast<long>(cov.bb_hi - cov.bb_lo + 1) * grid.k_r();
    std::vector<int> subs = max_depth_range_search(cov, grid);
    BreadthResult br =
        breadth_search_impl(cov, grid, budget, r_max_width_rad, ues, subs, nullptr, &out.op_count);
    BcSet set;
    set.ues = ues;
    set.subjects = br.subjects;
    set.beam = br.beam;
    for (int id : set.subjects) covered[id] = 1;
    out.sets.push_back(std::move(set));
  }

  // Stage 2: cover remaining subjects, deepest seed first.
  std::vector<int> pool;
  for (int id = 0; id < grid.n_entities(); ++id) {
    if (!grid.entities()[id].is_ue && !covered[id]) pool.push_back(id);
  }
  std::vector<char> in_pool(grid.n_entities(), 0);
  for (int id : pool) in_pool[id] = 1;

  while (!pool.empty()) {
    int seed = pool.front();
    for (int id : pool) {
      double ra = cell_range(grid, id), rs = cell_range(grid, seed);
      if (ra > rs + kGeomEps) {
        seed = id;
      } else if (std::abs(ra - rs) <= kGeomEps) {
        double ba = cell_bearing(grid, id), bs = cell_bearing(grid, seed);
        if (ba < bs - kGeomEps || (std::abs(ba - bs) <= kGeomEps && id < seed)) seed = id;
      }
    }
    ++out.op_count;

    if (cell_range(grid, seed) > budget.sense_range(budget.min_width_rad) + kGeomEps) {
      out.uncoverable.push_back(seed);
      in_pool[seed] = 0;
      pool.erase(std::remove(pool.begin(), pool.end(), seed), pool.end());
      continue;
    }

    BeamSpec beam = make_beam(cell_bearing(grid, seed), budget.min_width_rad, budget);
    Coverage cov = beam_pattern_coverage(beam, grid, budget);
    out.op_count += static_cast<long>(cov.bb_hi - cov.bb_lo + 1) * grid.k_r();
    std::vector<int> subs;
    for (int id : max_depth_range_search(cov, grid)) {
      if (in_pool[id]) subs.push_back(id);
    }
    BreadthResult br =
        breadth_search_impl(cov, grid, budget, r_max_width_rad, {}, subs, &in_pool, &out.op_count);
    BcSet set;
    set.subjects = br.subjects;
    set.beam = br.beam;
    for (int id : set.subjects) {
      covered[id] = 1;
      in_pool[id] = 0;
    }
    pool.erase(std::remove_if(pool.begin(), pool.end(), [&](int id) { return !in_pool[id]; }),
               pool.end());
    out.sets.push_back(std::move(set));
  }

  merge_pass(grid, budget, r_max_width_rad, out.sets, &out.op_count);
  std::sort(out.uncoverable.begin(), out.uncoverable.end());
  return out;
}

namespace {

bool intervals_disjoint(const BeamSpec& a, const BeamSpec& b) {
  // Touching intervals share the boundary cell (closed coverage), so they
  // count as overlapping.
  return a.hi_rad() < b.lo_rad() - kGeomEps || b.hi_rad() < a.lo_rad() - kGeomEps;
}

struct GreedyFit {
  int span = 0;
  std::vector<int> slot, chain;  // by set index
};

GreedyFit greedy_first_fit(const std::vector<BcSet>& sets, int n_chains) {
  std::vector<int> order(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sets[a].n_members() != sets[b].n_members()) {
      return sets[a].n_members() > sets[b].n_members();
    }
    return a < b;
  });

  GreedyFit fit;
  fit.slot.assign(sets.size(), -1);
  fit.chain.assign(sets.size(), -1);
  std::vector<std::vector<int>> slots;
  for (int idx : order) {
    int placed = -1;
    for (std::size_t s = 0; s < slots.size() && placed < 0; ++s) {
      if (static_cast<int>(slots[s].size()) >= n_chains) continue;
      bool ok = true;
      for (int other : slots[s]) {
        if (!intervals_disjoint(sets[idx].beam, sets[other].beam)) ok = false;
      }
      if (ok) placed = static_cast<int>(s);
    }
    if (placed < 0) {
      slots.emplace_back();
      placed = static_cast<int>(slots.size()) - 1;
    }
    fit.slot[idx] = placed;
    fit.chain[idx] = static_cast<int>(slots[placed].size());
    slots[placed].push_back(idx);
  }
  fit.span = static_cast<int>(slots.size());
  return fit;
}

}  // namespace

int schedule(std::vector<BcSet>& sets, int n_chains) {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");
  if (sets.empty()) return 0;
  // Using fewer chains than available is always admissible, so take the best
  // greedy packing over 1..n_chains; this also makes the span monotone in the
  // chain count.
  GreedyFit best;
  best.span = std::numeric_limits<int>::max();
  for (int k = 1; k <= n_chains; ++k) {
    GreedyFit fit = greedy_first_fit(sets, k);
    if (fit.span < best.span) best = std::move(fit);
  }
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sets[i].slot = best.slot[i];
    sets[i].chain = best.chain[i];
  }
  return best.span;
}

int round_robin_span(int n_entities, int n_chains) {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");
  if (n_entities < 0) throw std::invalid_argument("negative entity count");
  return (n_entities + n_chains - 1) / n_chains;
}

int round_robin_span(const RangeBearingGrid& grid, int n_chains) {
  return round_robin_span(grid.n_entities(), n_chains);
}

namespace {

struct OptBeam {
  std::uint32_t mask = 0;
  double lo = 0.0, hi = 0.0;
};

class ExactScheduler {
 public:
  ExactScheduler(std::vector<OptBeam> beams, int n_bits, int n_chains, long node_budget)
      : beams_(std::move(beams)), full_((n_bits >= 32) ? 0xFFFFFFFFu : ((1u << n_bits) - 1u)),
        n_chains_(n_chains), nodes_left_(node_budget) {
    build_slot_masks();
  }

  int solve() {
    if (full_ == 0) return 0;
    return dfs(0);
  }

 private:
  void build_slot_masks() {
    std::sort(beams_.begin(), beams_.end(), [](const OptBeam& a, const OptBeam& b) {
      if (a.lo != b.lo) return a.lo < b.lo;
      return a.hi < b.hi;
    });
    std::unordered_set<std::uint32_t> seen;
    std::vector<std::uint32_t> raw;
    enumerate(0, 0u, -std::numeric_limits<double>::infinity(), 0, seen, raw);

    // Keep only maximal masks: a superset covers at least as much for the
    // same one-slot cost, so dominated masks never help.
    std::sort(raw.begin(), raw.end(), [](std::uint32_t a, std::uint32_t b) {
      int pa = std::popcount(a), pb = std::popcount(b);
      if (pa != pb) return pa > pb;
      return a < b;
    });
    for (std::uint32_t m : raw) {
      bool dominated = false;
      for (std::uint32_t kept : slot_masks_) {
        if ((m & kept) == m) {
          dominated = true;
          break;
        }
      }
      if (!dominated) slot_masks_.push_back(m);
    }

    by_bit_.resize(32);
    for (std::uint32_t m : slot_masks_) {
      std::uint32_t bits = m;
      while (bits) {
        int b = std::countr_zero(bits);
        by_bit_[b].push_back(m);
        bits &= bits - 1;
      }
    }
  }

  void enumerate(std::size_t start, std::uint32_t mask, double last_hi, int depth,
                 std::unordered_set<std::uint32_t>& seen, std::vector<std::uint32_t>& raw) {
    for (std::size_t b = start; b < beams_.size(); ++b) {
      if (beams_[b].lo <= last_hi + kGeomEps) continue;
      spend();
      std::uint32_t m = mask | beams_[b].mask;
      if (seen.insert(m).second) raw.push_back(m);
      if (depth + 1 < n_chains_) enumerate(b + 1, m, beams_[b].hi, depth + 1, seen, raw);
    }
  }

  int dfs(std::uint32_t covered) {
    if (covered == full_) return 0;
    auto it = memo_.find(covered);
    if (it != memo_.end()) return it->second;
    spend();
    int e = std::countr_zero(~covered & full_);
    int best = std::numeric_limits<int>::max() - 1;
    for (std::uint32_t m : by_bit_[e]) {
      best = std::min(best, 1 + dfs(covered | m));
    }
    memo_.emplace(covered, best);
    return best;
  }

  void spend() {
    if (--nodes_left_ < 0) throw std::length_error("exhaustive schedule search budget exceeded");
  }

  std::vector<OptBeam> beams_;
  std::uint32_t full_;
  int n_chains_;
  long nodes_left_;
  std::vector<std::uint32_t> slot_masks_;
  std::vector<std::vector<std::uint32_t>> by_bit_;
  std::unordered_map<std::uint32_t, int> memo_;
};

}  // namespace

int optimal_schedule(const RangeBearingGrid& grid, int n_chains, const LinkBudget& budget,
                     double r_max_width_rad, int max_entities, long node_budget) {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");
  if (max_entities > 25) throw std::invalid_argument("max_entities beyond mask capacity");

  double reach = budget.sense_range(budget.min_width_rad);
  std::vector<int> universe;
  for (int id = 0; id < grid.n_entities(); ++id) {
    const GridEntity& e = grid.entities()[id];
    if (!e.is_ue && cell_range(grid, id) > reach + kGeomEps) continue;  // uncoverable
    universe.push_back(id);
  }
  int n = static_cast<int>(universe.size());
  if (n > max_entities) throw std::length_error("instance too large for exhaustive scheduling");
  if (n == 0) return 0;

  double bin = grid.bearing_bin_rad();
  int s_max = static_cast<int>(std::floor(r_max_width_rad / bin + kGeomEps)) + 1;
  s_max = std::min(s_max, grid.k_d());

  // Bin-aligned candidate beams at the narrowest width covering each span;
  // wider beams only shrink the range budget, so these dominate.
  std::unordered_map<std::uint32_t, OptBeam> by_mask;
  for (int i = 0; i < grid.k_d(); ++i) {
    for (int s = 1; s <= s_max && i + s <= grid.k_d(); ++s) {
      int j = i + s - 1;
      double w = std::max(budget.min_width_rad, (s - 1) * bin);
      if (w > r_max_width_rad + kGeomEps) break;
      double center = midpoint(grid.bin_center_bearing(i), grid.bin_center_bearing(j));
      Coverage cov = beam_pattern_coverage(make_beam(center, w, budget), grid, budget);
      std::uint32_t mask = 0;
      for (int b = 0; b < n; ++b) {
        if (cov.covers(grid, universe[b])) mask |= (1u << b);
      }
      if (mask == 0) continue;
      OptBeam ob{mask, cov.beam.lo_rad(), cov.beam.hi_rad()};
      auto it = by_mask.find(mask);
      if (it == by_mask.end() || (ob.hi - ob.lo) < (it->second.hi - it->second.lo)) {
        by_mask[mask] = ob;
      }
    }
  }

  std::uint32_t all = 0;
  std::vector<OptBeam> beams;
  beams.reserve(by_mask.size());
  for (const auto& [mask, ob] : by_mask) {
    beams.push_back(ob);
    all |= mask;
  }
  std::uint32_t full = (n >= 32) ? 0xFFFFFFFFu : ((1u << n) - 1u);
  if (all != full) throw std::domain_error("entity unreachable under the link budget");

  ExactScheduler solver(std::move(beams), n, n_chains, node_budget);
  return solver.solve();
}

EmulationResult emulate_time_span(const SchedParams& params, int n_ue, int n_subjects, int trials,
                                  int n_chains, std::uint64_t rng_seed, bool parallel) {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (n_ue < 0 || n_subjects < 0) throw std::invalid_argument("negative entity count");
  if (n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");

  EmulationResult res;
  res.n_chains = n_chains;
  res.rows.resize(trials);

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(rng_seed, 0x5C4E, static_cast<std::uint64_t>(t)));
    RangeBearingGrid grid(params.k_r, params.k_d, params.range_extent_m, params.fov_rad);
    for (int u = 0; u < n_ue; ++u) {
      double r = rng.uniform(0.0, params.range_extent_m);
      double b = rng.uniform(-0.5 * params.fov_rad, 0.5 * params.fov_rad);
      grid.add_entity(r, b, true);
    }
    for (int s = 0; s < n_subjects; ++s) {
      double r = rng.uniform(0.0, params.range_extent_m);
      double b = rng.uniform(-0.5 * params.fov_rad, 0.5 * params.fov_rad);
      grid.add_entity(r, b, false);
    }

    CommSets comm = group_comm_sets(grid, params.budget, params.r_max_width_rad, params.ue_capacity);
    BuildResult built = build_bc_sets(grid, comm, params.r_max_width_rad, params.budget);
    TrialSpans row;
    row.trial = t;
    row.rr = round_robin_span(grid, n_chains);
    row.bc = schedule(built.sets, n_chains);
    try {
      row.opt = optimal_schedule(grid, n_chains, params.budget, params.r_max_width_rad,
                                 params.opt_max_entities, params.opt_node_budget);
      row.has_opt = true;
    } catch (const std::length_error&) {
      row.has_opt = false;
    }
    res.rows[t] = row;
  }

  double rr = 0.0, bc = 0.0, opt = 0.0;
  int opt_n = 0;
  for (const TrialSpans& row : res.rows) {
    rr += row.rr;
    bc += row.bc;
    if (row.has_opt) {
      opt += row.opt;
      ++opt_n;
    }
  }
  res.rr_mean = rr / trials;
  res.bc_mean = bc / trials;
  res.opt_count = opt_n;
  res.opt_mean = (opt_n > 0) ? opt / opt_n : 0.0;
  return res;
}

std::string emulation_csv(const EmulationResult& result) {
  std::ostringstream os;
  os << "trial,n_chains,rr_span,bcset_span,opt_span\n";
  for (const TrialSpans& row : result.rows) {
    os << row.trial << ',' << result.n_chains << ',' << row.rr << ',' << row.bc << ',';
    if (row.has_opt) os << row.opt;
    os << '\n';
  }
  return os.str();
}

}  // namespace isac
