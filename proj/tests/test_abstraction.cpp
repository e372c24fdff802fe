#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "rulerepair/abstraction.hpp"
#include "rulerepair/predicates.hpp"

using namespace rulerepair;

namespace {

// satisfiability of the CNF restricted to leaf variables, by enumeration:
// for each leaf assignment, check whether some auxiliary completion exists
bool cnf_holds_under(const AbstractionResult& ar, std::uint64_t leaf_bits) {
  const int n_leaves = static_cast<int>(ar.propositions.size());
  std::vector<int> aux(ar.tseitin_aux.begin(), ar.tseitin_aux.end());
  const std::uint64_t aux_total = 1ULL << aux.size();
  for (std::uint64_t ab = 0; ab < aux_total; ++ab) {
    bool all = true;
    for (const Clause& cl : ar.cnf) {
      bool sat = false;
      for (int lit : cl) {
        const int var = std::abs(lit);
        bool val;
        if (var <= n_leaves) {
          val = (leaf_bits >> (var - 1)) & 1;
        } else {
          std::size_t pos = 0;
          while (aux[pos] != var) ++pos;
          val = (ab >> pos) & 1;
        }
        if ((lit > 0) == val) {
          sat = true;
          break;
        }
      }
      if (!sat) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

bool eval_structure(const Formula& f, const std::vector<Formula>& leaves, std::uint64_t bits) {
  if (f.kind() == FormulaKind::kAnd) {
    for (const Formula& c : f.children()) {
      if (!eval_structure(c, leaves, bits)) return false;
    }
    return true;
  }
  if (f.kind() == FormulaKind::kOr) {
    for (const Formula& c : f.children()) {
      if (eval_structure(c, leaves, bits)) return true;
    }
    return false;
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i] == f) return (bits >> i) & 1;
  }
  FAIL("leaf not interned");
  return false;
}

}  // namespace

TEST_CASE("globally distributes exactly over conjunction") {
  const Formula f = f_globally(f_and({f_pred("p0"), f_pred("p1")}));
  const Decomposition dec = decompose(f);
  REQUIRE(dec.formula.kind() == FormulaKind::kAnd);
  CHECK(dec.formula.children()[0] == f_globally(f_pred("p0")));
  CHECK(dec.formula.children()[1] == f_globally(f_pred("p1")));
}

TEST_CASE("stop-line decomposition yields the five-disjunct structure") {
  const auto lib = default_rule_library();
  const Formula nnf = to_nnf(find_rule(lib, "IN1")->parse_formula(0.2));
  const Decomposition dec = decompose(nnf);
  REQUIRE(dec.formula.kind() == FormulaKind::kOr);
  REQUIRE(dec.formula.children().size() == 5);
  for (const Formula& unit : dec.formula.children()) {
    CHECK(unit.kind() == FormulaKind::kGlobally);
  }
  // the once-historically block keeps its nesting, with the historically
  // window distributed exactly over the conjunction
  const Formula& last = dec.formula.children()[4];
  const Formula& once = last.children().front();
  REQUIRE(once.kind() == FormulaKind::kOnce);
  REQUIRE(once.children().front().kind() == FormulaKind::kAnd);
  for (const Formula& h : once.children().front().children()) {
    CHECK(h.kind() == FormulaKind::kHistorically);
  }
  // one strengthening rewrite was applied (G over the disjunction)
  bool strengthened = false;
  for (const auto& step : dec.steps) {
    strengthened = strengthened || step.tag == RewriteTag::kStrengthening;
  }
  CHECK(strengthened);
}

TEST_CASE("decompose requires negation normal form") {
  const Formula f = f_globally(f_not(f_and({f_pred("p0"), f_pred("p1")})));
  CHECK_THROWS_AS(decompose(f), NotInNNF);
}

TEST_CASE("decomposition strengthens: models of the result satisfy the original") {
  oracle::FormulaGen gen(4242);
  gen.with_not = false;  // NNF inputs
  int strengthened_hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const Formula body = gen.gen(1 + gen.pick(3));
    const Formula f = f_globally(to_nnf(body));
    const Decomposition dec = decompose(f);
    const oracle::Table sig = gen.gen_signal(10);
    const oracle::TableView view(sig);
    if (eval_bool(dec.formula, view, 0)) {
      CHECK(eval_bool(f, view, 0));
      ++strengthened_hits;
    }
  }
  CHECK(strengthened_hits > 50);
}

TEST_CASE("tseitin conversion is equisatisfiable over the leaf variables") {
  // (a & b) | c and assorted random structures, verified by enumeration
  oracle::FormulaGen gen(777);
  for (int trial = 0; trial < 60; ++trial) {
    Formula structure = trial == 0
                            ? f_or({f_and({f_globally(f_pred("p0")), f_globally(f_pred("p1"))}),
                                    f_globally(f_pred("p2"))})
                            : [&gen]() {
                                // random and/or tree over globally-wrapped leaves
                                const std::function<Formula(int)> build = [&](int depth) {
                                  if (depth == 0) {
                                    return f_globally(
                                        f_pred("p" + std::to_string(gen.pick(10))));
                                  }
                                  std::vector<Formula> cs;
                                  const int n = 2 + gen.pick(2);
                                  for (int i = 0; i < n; ++i) cs.push_back(build(depth - 1));
                                  return gen.pick(2) ? f_and(std::move(cs)) : f_or(std::move(cs));
                                };
                                return build(1 + gen.pick(2));
                              }();
    const AbstractionResult ar = to_cnf(structure);
    const std::size_t n_leaves = ar.propositions.size();
    if (n_leaves > 10) continue;
    std::vector<Formula> leaves;
    for (const auto& p : ar.propositions) leaves.push_back(p.subformula);
    for (std::uint64_t bits = 0; bits < (1ULL << n_leaves); ++bits) {
      CHECK(eval_structure(structure, leaves, bits) == cnf_holds_under(ar, bits));
    }
  }
}

TEST_CASE("proposition indexing is deterministic across identical formulas") {
  const auto lib = default_rule_library();
  const PredicateCatalog catalog;
  const Formula nnf = to_nnf(find_rule(lib, "IN4s")->parse_formula(0.2));
  const AbstractionResult a = to_cnf(decompose(nnf).formula, &catalog);
  const AbstractionResult b = to_cnf(decompose(nnf).formula, &catalog);
  REQUIRE(a.propositions.size() == b.propositions.size());
  for (std::size_t i = 0; i < a.propositions.size(); ++i) {
    CHECK(a.propositions[i].subformula == b.propositions[i].subformula);
    CHECK(a.propositions[i].subformula.hash() == b.propositions[i].subformula.hash());
  }
  CHECK(a.cnf == b.cnf);
}

TEST_CASE("duplicate leaves are interned once") {
  const Formula g = f_globally(f_pred("p0"));
  const AbstractionResult ar = to_cnf(f_or({f_and({g, f_globally(f_pred("p1"))}), g}));
  CHECK(ar.propositions.size() == 2);
}

TEST_CASE("past-only and category flags on the stop-line propositions") {
  const auto lib = default_rule_library();
  const PredicateCatalog catalog;
  const Formula nnf = to_nnf(find_rule(lib, "IN1")->parse_formula(0.2));
  const AbstractionResult ar = to_cnf(decompose(nnf).formula, &catalog);
  REQUIRE(ar.propositions.size() == 5);
  CHECK(ar.propositions[0].contains_past_only);   // previous-wrapped literal
  CHECK_FALSE(ar.propositions[1].contains_past_only);  // bare stop-line literal
  CHECK(ar.propositions[4].contains_past_only);   // once-historically block
  CHECK(ar.propositions[1].predicate_categories.count(
      PredicateCategory::kLongitudinalPosition));
  // the context-flag propositions are recognized as ego-independent
  CHECK(ar.propositions[2].ego_independent);
  CHECK(ar.propositions[3].ego_independent);
  CHECK_FALSE(ar.propositions[1].ego_independent);
}

TEST_CASE("add_conflict bans exactly the given valuation") {
  AbstractionResult ar;
  ar.propositions.resize(3);
  for (int i = 0; i < 3; ++i) ar.propositions[static_cast<std::size_t>(i)].index = i + 1;
  ar.cnf = {{1, 2, 3}};

  PartialValuation v1;
  v1.assignments = {{1, true}};
  ar = add_conflict(std::move(ar), v1);
  REQUIRE(ar.learned_conflicts.size() == 1);
  CHECK(ar.learned_conflicts[0] == Clause{-1});

  PartialValuation v2;
  v2.assignments = {{1, false}, {2, true}};
  ar = add_conflict(std::move(ar), v2);
  REQUIRE(ar.learned_conflicts.size() == 2);
  CHECK(ar.learned_conflicts[1] == Clause{1, -2});
}
