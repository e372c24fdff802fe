#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rulerepair/abstraction.hpp"
#include "rulerepair/predicates.hpp"
#include "rulerepair/sat.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

/// Axis-aligned cell over (s, s_dot, d).
struct Cell {
  double s_lo = 0.0, s_hi = 0.0;
  double sdot_lo = 0.0, sdot_hi = 0.0;
  double d_lo = 0.0, d_hi = 0.0;

  bool contains(double s, double sdot, double d, double tol = 1e-9) const {
    return s >= s_lo - tol && s <= s_hi + tol && sdot >= sdot_lo - tol &&
           sdot <= sdot_hi + tol && d >= d_lo - tol && d <= d_hi + tol;
  }
  double volume() const {
    return (s_hi - s_lo) * (sdot_hi - sdot_lo) * (d_hi - d_lo);
  }
};

struct ReachGrid {
  double ds = 0.5;      // [m]
  double dsdot = 0.5;   // [m/s]
  double dd = 0.25;     // [m]
};

struct ConstraintLogEntry {
  int step = 0;
  std::string description;
};

struct ReachSet {
  int k_cut = 0;
  std::vector<std::vector<Cell>> cells;  // index 0 corresponds to step k_cut
  std::vector<ConstraintLogEntry> constraint_log;

  int steps() const { return static_cast<int>(cells.size()); }
  const std::vector<Cell>& at_step(int k) const { return cells.at(static_cast<std::size_t>(k - k_cut)); }
  bool contains(int k, double s, double sdot, double d, double tol = 1e-6) const;
};

struct ReachEmpty {
  int at_step = 0;
};

struct ProjectionUnavailable {
  int proposition = 0;
  std::string reason;
};

using ReachOutcome = std::variant<ReachSet, ReachEmpty, ProjectionUnavailable>;

/// Forward reachable cells over [k_cut, h] under the valuation's constraints:
/// admissible boxes, road bounds, collision complements, and the predicate
/// projections of positively assigned propositions on [TV_rule, h].
ReachOutcome compute_reach(const Scenario& sc, int k_cut, const Valuation& valuation,
                           const AbstractionResult& ar,
                           const std::map<std::string, int>& rule_tv, int tv,
                           const PredicateCatalog& catalog, const ReachGrid& grid = {});

struct Corridor {
  int k_cut = 0;
  std::vector<Cell> boxes;  // one per step in [k_cut, h]
};

struct NoConnectedCorridor : std::runtime_error {
  NoConnectedCorridor() : std::runtime_error("no connected corridor through the reachable sets") {}
};

/// Maximum sum-of-log-areas cell path through the per-step reachability
/// graph; deterministic tie-break toward larger s_hi.
Corridor extract_corridor(const ReachSet& rs, const Scenario& sc);

/// CSV dump (step, s_lo, s_hi, sdot_lo, sdot_hi, d_lo, d_hi).
std::string reach_to_csv(const ReachSet& rs);

}  // namespace rulerepair
