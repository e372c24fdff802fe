#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rulerepair/abstraction.hpp"

namespace rulerepair {

enum class TrailTag { kDecision, kPropagation };

struct TrailEntry {
  int variable = 0;
  bool value = false;
  TrailTag tag = TrailTag::kDecision;
};

/// Partial assignment with the decision/propagation trail that produced it.
struct Valuation {
  PartialValuation assignments;          // original propositions only
  std::vector<TrailEntry> decision_trail;  // includes auxiliary variables
};

struct SatResult {
  bool sat = false;
  Valuation valuation;
  int decisions = 0;
};

/// DPLL over the abstraction. Decision order follows `order` (original
/// proposition indices, typically ascending |rho|); auxiliary variables are
/// decided last. `polarity_hint` gives the value tried first per variable;
/// unlisted variables try true first. Returns a partial model: assignment
/// stops once every clause is satisfied.
SatResult solve(const AbstractionResult& ar, const std::vector<int>& order,
                const std::map<int, bool>& polarity_hint = {});

/// Convenience wrapper for the engine loop: bans the given valuations via
/// conflict clauses, then solves.
SatResult first_decision_flip(const AbstractionResult& ar, const std::vector<int>& order,
                              const std::vector<Valuation>& banned,
                              const std::map<int, bool>& polarity_hint = {});

/// DIMACS text of the instance including learned conflicts.
std::string to_dimacs(const AbstractionResult& ar);

}  // namespace rulerepair
