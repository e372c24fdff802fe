#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rulerepair/abstraction.hpp"
#include "rulerepair/predicates.hpp"
#include "rulerepair/sat.hpp"
#include "rulerepair/stl.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

enum class ManeuverKind { kBrake, kKickDown, kSteerLeft, kSteerRight, kMaintainVelocity };

std::string maneuver_name(ManeuverKind kind);

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct CutoffResult {
  double tc = kNegInf;  // step, or -inf when no maneuver succeeds
  std::vector<ManeuverKind> maneuver_set;
  std::map<ManeuverKind, double> per_maneuver_ttm;
  std::vector<int> flipped_props;  // phi_r, proposition indices
  ManeuverKind best = ManeuverKind::kBrake;
};

struct NoActionableProposition : std::runtime_error {
  NoActionableProposition()
      : std::runtime_error("no future-actionable proposition in the valuation") {}
};

/// Propositions whose value in the valuation differs from the trace value at
/// the rule's violation step, plus the maneuver kinds their categories map
/// to. Past-only propositions are dropped; throws when nothing remains.
std::pair<std::vector<int>, std::vector<ManeuverKind>> select_maneuvers(
    const Valuation& valuation, const AbstractionResult& ar,
    const std::map<int, bool>& trace_valuation_at_tv);

/// Input sequence of the maneuver template executed from a given state over
/// [k, h-1]. Inputs always respect the scenario bounds.
std::vector<Input> maneuver_inputs(const Scenario& sc, ManeuverKind kind, const State& from,
                                   int k);

/// Collision check of an ego trajectory against the recorded obstacles,
/// in configuration space.
bool collision_free(const Scenario& sc, const Trajectory& ego, int from_step);

/// Latest start step <= tv from which the maneuver yields a trace satisfying
/// the requirement and staying collision-free; -inf when none exists.
/// Downward linear scan, no monotonicity assumption.
double time_to_maneuver(const Scenario& sc, ManeuverKind kind, const Formula& requirement,
                        int tv, const PredicateCatalog& catalog);

/// Maneuver-based underapproximation of the time-to-comply: max over the
/// selected maneuvers' TTM values.
CutoffResult time_to_comply(const Scenario& sc, const Valuation& valuation,
                            const AbstractionResult& ar,
                            const std::map<int, bool>& trace_valuation_at_tv, int tv,
                            const PredicateCatalog& catalog);

/// Conjunction of the flipped propositions' subformulas (negated for
/// propositions the valuation assigns false), the requirement the maneuver
/// must establish over the whole horizon.
Formula flipped_requirement(const AbstractionResult& ar, const std::vector<int>& flipped,
                            const Valuation& valuation);

/// Spliced trajectory: the initial inputs up to k, the maneuver from k on.
Trajectory splice_maneuver(const Scenario& sc, ManeuverKind kind, int k);

}  // namespace rulerepair
