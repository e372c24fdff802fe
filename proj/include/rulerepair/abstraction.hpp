#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulerepair/predicates.hpp"
#include "rulerepair/stl.hpp"

namespace rulerepair {

// Clause literals are signed 1-based proposition indices, DIMACS style.
using Clause = std::vector<int>;

struct Proposition {
  int index = 0;                 // 1-based
  Formula subformula;            // temporally scoped unit in NNF
  bool contains_past_only = false;
  bool ego_independent = false;  // every predicate is fixed by recorded context
  std::set<PredicateCategory> predicate_categories;
  std::string rule;              // originating rule name, when known
};

struct AbstractionResult {
  std::vector<Clause> cnf;
  std::vector<Proposition> propositions;
  std::set<int> tseitin_aux;
  std::vector<Clause> learned_conflicts;

  int num_variables() const;
  /// All clauses: cnf followed by learned conflicts.
  std::vector<Clause> all_clauses() const;
};

struct NotInNNF : std::runtime_error {
  NotInNNF() : std::runtime_error("formula is not in negation normal form") {}
};

/// How each rewrite of the decomposition preserves semantics.
enum class RewriteTag { kExact, kStrengthening };

struct DecompositionStep {
  std::string description;
  RewriteTag tag = RewriteTag::kExact;
};

struct Decomposition {
  Formula formula;  // Boolean combination over globally-scoped units
  std::vector<DecompositionStep> steps;
};

/// Distributes the outermost G over the Boolean structure: exact over
/// conjunction, strengthening over disjunction. Historically distributes
/// exactly over conjunction anywhere. Nested temporal blocks stay intact.
Decomposition decompose(const Formula& nnf_formula);

/// Selective substitution of the temporally scoped leaves followed by a
/// Tseitin transformation. Leaves are deduplicated structurally.
AbstractionResult to_cnf(const Formula& decomposed,
                         const PredicateCatalog* catalog = nullptr);

/// Conjunction of per-rule decompositions sharing one proposition space;
/// each proposition remembers the rule it came from.
AbstractionResult to_cnf_with_rules(
    const std::vector<std::pair<std::string, Formula>>& decomposed_rules,
    const PredicateCatalog* catalog = nullptr);

/// A partial truth assignment over original propositions.
struct PartialValuation {
  // (index, value) pairs in assignment order
  std::vector<std::pair<int, bool>> assignments;

  bool assigned(int index) const;
  bool value(int index) const;
  std::string to_string() const;
};

/// Appends the clause banning this exact valuation.
AbstractionResult add_conflict(AbstractionResult ar, const PartialValuation& valuation);

}  // namespace rulerepair
