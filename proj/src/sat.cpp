#include "rulerepair/sat.hpp"

#include <algorithm>
#include <sstream>

namespace rulerepair {

namespace {

struct Assignment {
  std::vector<signed char> value;  // -1 unassigned, 0 false, 1 true

  bool assigned(int var) const { return value[static_cast<std::size_t>(var)] >= 0; }
  bool get(int var) const { return value[static_cast<std::size_t>(var)] == 1; }
  void set(int var, bool v) { value[static_cast<std::size_t>(var)] = v ? 1 : 0; }
  void clear(int var) { value[static_cast<std::size_t>(var)] = -1; }

  bool literal_true(int lit) const {
    const int var = std::abs(lit);
    return assigned(var) && get(var) == (lit > 0);
  }
  bool literal_false(int lit) const {
    const int var = std::abs(lit);
    return assigned(var) && get(var) != (lit > 0);
  }
};

struct DecisionFrame {
  std::size_t trail_size = 0;
  int variable = 0;
  bool first_value = false;
  bool flipped = false;
};

}  // namespace

SatResult solve(const AbstractionResult& ar, const std::vector<int>& order,
                const std::map<int, bool>& polarity_hint) {
  const int nvars = ar.num_variables();
  const std::vector<Clause> clauses = ar.all_clauses();

  // decision order: supplied original propositions, then anything missing,
  // auxiliary variables last
  std::vector<int> full_order;
  std::vector<bool> seen(static_cast<std::size_t>(nvars) + 1, false);
  for (int v : order) {
    if (v >= 1 && v <= nvars && !seen[static_cast<std::size_t>(v)]) {
      full_order.push_back(v);
      seen[static_cast<std::size_t>(v)] = true;
    }
  }
  for (int v = 1; v <= static_cast<int>(ar.propositions.size()); ++v) {
    if (!seen[static_cast<std::size_t>(v)]) {
      full_order.push_back(v);
      seen[static_cast<std::size_t>(v)] = true;
    }
  }
  for (int v : ar.tseitin_aux) {
    if (!seen[static_cast<std::size_t>(v)]) {
      full_order.push_back(v);
      seen[static_cast<std::size_t>(v)] = true;
    }
  }

  Assignment assign;
  assign.value.assign(static_cast<std::size_t>(nvars) + 1, -1);
  std::vector<TrailEntry> trail;
  std::vector<DecisionFrame> decisions;

  const auto hint_for = [&polarity_hint](int var) {
    const auto it = polarity_hint.find(var);
    return it == polarity_hint.end() ? true : it->second;
  };

  // returns false on conflict
  const auto propagate = [&]() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const Clause& cl : clauses) {
        int unassigned_lit = 0;
        int n_unassigned = 0;
        bool satisfied = false;
        for (int lit : cl) {
          if (assign.literal_true(lit)) {
            satisfied = true;
            break;
          }
          if (!assign.assigned(std::abs(lit))) {
            ++n_unassigned;
            unassigned_lit = lit;
          }
        }
        if (satisfied) continue;
        if (n_unassigned == 0) return false;
        if (n_unassigned == 1) {
          assign.set(std::abs(unassigned_lit), unassigned_lit > 0);
          trail.push_back({std::abs(unassigned_lit), unassigned_lit > 0, TrailTag::kPropagation});
          changed = true;
        }
      }
    }
    return true;
  };

  const auto all_satisfied = [&]() {
    for (const Clause& cl : clauses) {
      bool satisfied = false;
      for (int lit : cl) {
        if (assign.literal_true(lit)) {
          satisfied = true;
          break;
        }
      }
      if (!satisfied) return false;
    }
    return true;
  };

  const auto backtrack = [&]() {
    while (!decisions.empty()) {
      DecisionFrame& frame = decisions.back();
      while (trail.size() > frame.trail_size) {
        assign.clear(trail.back().variable);
        trail.pop_back();
      }
      if (!frame.flipped) {
        frame.flipped = true;
        assign.set(frame.variable, !frame.first_value);
        trail.push_back({frame.variable, !frame.first_value, TrailTag::kDecision});
        return true;
      }
      decisions.pop_back();
    }
    return false;
  };

  for (;;) {
    if (!propagate()) {
      if (!backtrack()) return {false, {}, 0};
      continue;
    }
    if (all_satisfied()) break;
    int next = 0;
    for (int v : full_order) {
      if (!assign.assigned(v)) {
        next = v;
        break;
      }
    }
    if (next == 0) {
      // everything assigned but some clause unsatisfied
      if (!backtrack()) return {false, {}, 0};
      continue;
    }
    DecisionFrame frame;
    frame.trail_size = trail.size();
    frame.variable = next;
    frame.first_value = hint_for(next);
    decisions.push_back(frame);
    assign.set(next, frame.first_value);
    trail.push_back({next, frame.first_value, TrailTag::kDecision});
  }

  SatResult result;
  result.sat = true;
  result.decisions = static_cast<int>(decisions.size());
  result.valuation.decision_trail = trail;
  const int n_original = static_cast<int>(ar.propositions.size());
  for (const TrailEntry& e : trail) {
    if (e.variable <= n_original && ar.tseitin_aux.count(e.variable) == 0) {
      result.valuation.assignments.assignments.emplace_back(e.variable, e.value);
    }
  }
  return result;
}

SatResult first_decision_flip(const AbstractionResult& ar, const std::vector<int>& order,
                              const std::vector<Valuation>& banned,
                              const std::map<int, bool>& polarity_hint) {
  AbstractionResult augmented = ar;
  for (const Valuation& v : banned) {
    augmented = add_conflict(std::move(augmented), v.assignments);
  }
  return solve(augmented, order, polarity_hint);
}

std::string to_dimacs(const AbstractionResult& ar) {
  const std::vector<Clause> clauses = ar.all_clauses();
  std::ostringstream os;
  os << "c rulerepair abstraction\n";
  for (const auto& p : ar.propositions) {
    os << "c var " << p.index << " := " << print(p.subformula)
       << (p.contains_past_only ? "  (past-only)" : "") << "\n";
  }
  os << "p cnf " << ar.num_variables() << " " << clauses.size() << "\n";
  for (const Clause& cl : clauses) {
    for (int lit : cl) os << lit << " ";
    os << "0\n";
  }
  return os.str();
}

}  // namespace rulerepair
