// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isac/common.hpp"

namespace isac {

// Range/bearing link budget: a beam of width w reaches
//   comm entities  up to ref_range * (ref_width / w)^comm_exp   (one-way R^2 path)
//   sense entities up to ref_range * (ref_width / w)^sense_exp  (two-way R^4 path)
// anchored at the calibration pair (ref_width, ref_range).  Widths below
// min_width are not realizable by the array.
struct LinkBudget {
  double ref_width_rad = pi / 32.0;
  double ref_range_m = 10.0;
  double min_width_rad = pi / 32.0;
  double comm_exp = 0.5;
  double sense_exp = 0.25;

  double comm_range(double width_rad) const;
  double sense_range(double width_rad) const;
  double max_range(double width_rad, bool is_ue) const;
};

struct GridEntity {
  double range_m = 0.0;
  double bearing_rad = 0.0;
  bool is_ue = false;
};

// Polar occupancy grid over range [0, range_extent] x bearing [-fov/2, fov/2].
// Every entity maps to exactly one cell; coverage tests use cell centers so
// membership is a pure function of the cell, not the exact position.
class RangeBearingGrid {
 public:
  RangeBearingGrid(int k_r, int k_d, double range_extent_m, double fov_rad);

  int add_entity(double range_m, double bearing_rad, bool is_ue);

  int k_r() const { return k_r_; }
  int k_d() const { return k_d_; }
  double range_extent_m() const { return range_extent_m_; }
  double fov_rad() const { return fov_rad_; }
  double range_bin_m() const { return range_bin_m_; }
  double bearing_bin_rad() const { return bearing_bin_rad_; }

  int range_bin(double range_m) const;
  int bearing_bin(double bearing_rad) const;
  double bin_center_range(int rb) const;
  double bin_center_bearing(int bb) const;

  const std::vector<GridEntity>& entities() const { return entities_; }
  // Entity ids in cell (rb, bb), ascending (insertion-order independent).
  const std::vector<int>& cell(int rb, int bb) const;
  int n_entities() const { return static_cast<int>(entities_.size()); }
  int n_ues() const { return n_ues_; }
  int n_subjects() const { return n_entities() - n_ues_; }

 private:
  int k_r_, k_d_;
  double range_extent_m_, fov_rad_;
  double range_bin_m_, bearing_bin_rad_;
  int n_ues_ = 0;
  std::vector<GridEntity> entities_;
  std::vector<std::vector<int>> cells_;  // k_r * k_d, id-sorted
};

// Analog beam: mainlobe center/width plus the sensing reach at that width.
struct BeamSpec {
  double center_rad = 0.0;
  double width_rad = 0.0;
  double max_range_m = 0.0;

  double lo_rad() const { return center_rad - 0.5 * width_rad; }
  double hi_rad() const { return center_rad + 0.5 * width_rad; }
};

// Beam with max_range derived from the sensing budget at the given width.
BeamSpec make_beam(double center_rad, double width_rad, const LinkBudget& budget);

// Grid cells covered by a beam: bearing-bin interval [bb_lo, bb_hi] whose
// centers lie within +-width/2 of center (closed), with per-class range
// limits.  Empty when no bin center falls inside the lobe.
struct Coverage {
  BeamSpec beam;
  int bb_lo = 0, bb_hi = -1;  // empty when bb_hi < bb_lo
  double comm_range_m = 0.0;
  double sense_range_m = 0.0;

  bool empty() const { return bb_hi < bb_lo; }
  bool covers_cell(const RangeBearingGrid& grid, int rb, int bb, bool is_ue) const;
  bool covers(const RangeBearingGrid& grid, int entity_id) const;
};

Coverage beam_pattern_coverage(const BeamSpec& beam, const RangeBearingGrid& grid,
                               const LinkBudget& budget);

// All subjects whose cells lie in the coverage, walking each covered bearing
// column from nearest to farthest range bin (bearing asc, range asc, id asc).
std::vector<int> max_depth_range_search(const Coverage& cov, const RangeBearingGrid& grid);

struct BreadthResult {
  BeamSpec beam;
  std::vector<int> subjects;  // final subject members (post trade)
  std::vector<int> added;     // subjects gained relative to the input set
};

// Widens the beam in one-bin steps up to width r, re-centering on the midpoint
// of the members' bearing extremes before each step.  A step is committed only
// when it gains strictly more subjects than it loses to the shrunken range
// budget; losing a UE vetoes the step outright.
BreadthResult breadth_bearing_search(const Coverage& cov, const RangeBearingGrid& grid,
                                     const LinkBudget& budget, double r_max_width_rad,
                                     const std::vector<int>& ues, const std::vector<int>& subjects,
                                     long* op_count = nullptr);

struct BcSet {
  std::vector<int> ues;
  std::vector<int> subjects;
  BeamSpec beam;
  int chain = -1;  // -1 = unassigned
  int slot = -1;

  int n_members() const { return static_cast<int>(ues.size() + subjects.size()); }
};

struct CommSets {
  std::vector<std::vector<int>> sets;  // disjoint UE id groups, similar bearing
};

// Default communication grouping: UEs sorted by bearing, greedily merged while
// the group stays within capacity and the narrowest covering beam still
// reaches the deepest member under the one-way budget.
CommSets group_comm_sets(const RangeBearingGrid& grid, const LinkBudget& budget,
                         double r_max_width_rad, int ue_capacity);

struct BuildResult {
  std::vector<BcSet> sets;
  std::vector<int> uncoverable;  // subjects no feasible beam can reach
  long op_count = 0;             // cell/member touches, for the complexity bound
};

// Two-stage BC-Set construction: stage 1 upgrades each comm set by depth then
// breadth search; stage 2 covers remaining subjects with new sets seeded at
// the deepest uncovered subject.  Every UE lands in exactly one set, every
// coverable subject in at least one.
BuildResult build_bc_sets(const RangeBearingGrid& grid, const CommSets& comm_sets,
                          double r_max_width_rad, const LinkBudget& budget);

// Greedy first-fit by descending member count: sets whose beam intervals are
// disjoint may share a slot on distinct chains.  Assigns slot/chain in place
// and returns the span (number of slots).
int schedule(std::vector<BcSet>& sets, int n_chains);

// Each entity served individually, one per chain-slot.
int round_robin_span(int n_entities, int n_chains);
int round_robin_span(const RangeBearingGrid& grid, int n_chains);

// Exhaustive minimum span over bin-aligned beams (widths up to r) and chain
// assignments.  Throws std::length_error when the instance exceeds
// max_entities or the search exceeds the node budget.
int optimal_schedule(const RangeBearingGrid& grid, int n_chains, const LinkBudget& budget,
                     double r_max_width_rad, int max_entities = 20,
                     long node_budget = 50'000'000);

struct SchedParams {
  int k_r = 20;
  int k_d = 32;
  double range_extent_m = 10.0;
  double fov_rad = pi;
  LinkBudget budget;
  double r_max_width_rad = 3.0 * pi / 32.0;
  int ue_capacity = 8;
  int opt_max_entities = 20;
  long opt_node_budget = 50'000'000;
};

struct TrialSpans {
  int trial = 0;
  int rr = 0;
  int bc = 0;
  int opt = 0;        // valid only when has_opt
  bool has_opt = false;
};

struct EmulationResult {
  int n_chains = 1;
  std::vector<TrialSpans> rows;
  double rr_mean = 0.0;
  double bc_mean = 0.0;
  double opt_mean = 0.0;  // over trials where the exhaustive search ran
  int opt_count = 0;
};

// Uniform-random positions each trial (per-trial seeds split from rng_seed),
// all three schedulers on the same layouts.  Trials are independent; the
// parallel flag runs them across OpenMP threads with identical output.
EmulationResult emulate_time_span(const SchedParams& params, int n_ue, int n_subjects, int trials,
                                  int n_chains, std::uint64_t rng_seed, bool parallel = false);

// CSV rows: trial,n_chains,rr_span,bcset_span,opt_span (empty when skipped).
std::string emulation_csv(const EmulationResult& result);

}  // namespace isac
