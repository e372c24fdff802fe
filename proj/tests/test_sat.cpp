#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "rulerepair/sat.hpp"

using namespace rulerepair;

namespace {

AbstractionResult instance(int n_vars, std::vector<Clause> clauses) {
  AbstractionResult ar;
  ar.propositions.resize(static_cast<std::size_t>(n_vars));
  for (int i = 0; i < n_vars; ++i) ar.propositions[static_cast<std::size_t>(i)].index = i + 1;
  ar.cnf = std::move(clauses);
  return ar;
}

std::vector<int> identity_order(int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  return order;
}

bool model_satisfies(const AbstractionResult& ar, const PartialValuation& val) {
  for (const Clause& cl : ar.all_clauses()) {
    bool sat = false;
    for (int lit : cl) {
      const int var = std::abs(lit);
      if (val.assigned(var) && val.value(var) == (lit > 0)) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("unit propagation produces the forced model") {
  const AbstractionResult ar = instance(2, {{1, 2}, {-1}});
  const SatResult r = solve(ar, identity_order(2));
  REQUIRE(r.sat);
  CHECK(r.valuation.assignments.value(1) == false);
  CHECK(r.valuation.assignments.value(2) == true);
  // both assignments arrived by propagation
  for (const auto& e : r.valuation.decision_trail) {
    CHECK(e.tag == TrailTag::kPropagation);
  }
}

TEST_CASE("contradictory units are unsatisfiable") {
  const AbstractionResult ar = instance(1, {{1}, {-1}});
  CHECK_FALSE(solve(ar, identity_order(1)).sat);
}

TEST_CASE("stipulated robustness order reproduces the single-assignment solution") {
  // one clause over five propositions; order sigma2 first, flip hints true
  const AbstractionResult ar = instance(5, {{1, 2, 3, 4, 5}});
  const std::vector<int> order = {2, 1, 5, 3, 4};
  std::map<int, bool> hints;
  for (int v = 1; v <= 5; ++v) hints[v] = true;  // all trace-false, flip to true
  const SatResult r = solve(ar, order, hints);
  REQUIRE(r.sat);
  REQUIRE(r.valuation.assignments.assignments.size() == 1);
  CHECK(r.valuation.assignments.assignments[0] == std::make_pair(2, true));
}

TEST_CASE("banning the first solution forces the second decision flip") {
  const AbstractionResult ar = instance(5, {{1, 2, 3, 4, 5}});
  const std::vector<int> order = {1, 2, 3, 4, 5};
  std::map<int, bool> hints;
  for (int v = 1; v <= 5; ++v) hints[v] = true;

  const SatResult first = solve(ar, order, hints);
  REQUIRE(first.sat);
  CHECK(first.valuation.assignments.assignments ==
        std::vector<std::pair<int, bool>>{{1, true}});

  const SatResult second = first_decision_flip(ar, order, {first.valuation}, hints);
  REQUIRE(second.sat);
  CHECK(second.valuation.assignments.value(1) == false);
  CHECK(second.valuation.assignments.value(2) == true);

  // empty banned list behaves exactly like solve
  const SatResult again = first_decision_flip(ar, order, {}, hints);
  CHECK(again.valuation.assignments.assignments == first.valuation.assignments.assignments);
}

TEST_CASE("banning every assignment of a small instance ends in UNSAT") {
  for (int n = 1; n <= 4; ++n) {
    AbstractionResult ar = instance(n, {{}});
    ar.cnf.clear();
    Clause all;
    for (int v = 1; v <= n; ++v) all.push_back(v);
    ar.cnf.push_back(all);  // at least one true

    std::vector<Valuation> banned;
    int solutions = 0;
    for (;;) {
      const SatResult r = first_decision_flip(ar, identity_order(n), banned);
      if (!r.sat) break;
      ++solutions;
      REQUIRE(solutions <= (1 << n));
      // completed models only, so the ban is well-founded
      Valuation full = r.valuation;
      for (int v = 1; v <= n; ++v) {
        if (!full.assignments.assigned(v)) full.assignments.assignments.emplace_back(v, false);
      }
      banned.push_back(full);
    }
    CHECK(solutions == (1 << n) - 1);  // every assignment except all-false
  }
}

TEST_CASE("agreement with the truth-table oracle on random instances") {
  std::mt19937_64 rng(20260809);
  int sat_count = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const oracle::CnfInstance inst = oracle::random_cnf(rng, 15, 60);
    AbstractionResult ar = instance(inst.n_vars, {});
    ar.cnf = inst.clauses;
    const SatResult got = solve(ar, identity_order(inst.n_vars));
    const bool expect = oracle::tt_satisfiable(inst);
    REQUIRE(got.sat == expect);
    if (got.sat) {
      ++sat_count;
      // the partial model must satisfy every clause on assigned literals
      CHECK(model_satisfies(ar, got.valuation.assignments));
    }
  }
  CHECK(sat_count > 100);
}

TEST_CASE("decisions follow the order: no lower-priority decision before a higher one") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const oracle::CnfInstance inst = oracle::random_cnf(rng, 10, 20);
    AbstractionResult ar = instance(inst.n_vars, {});
    ar.cnf = inst.clauses;
    std::vector<int> order = identity_order(inst.n_vars);
    std::shuffle(order.begin(), order.end(), rng);
    const SatResult r = solve(ar, order);
    if (!r.sat) continue;
    CHECK(r.decisions <= inst.n_vars);
    // decision literals appear in order-prefix positions
    std::vector<int> decided;
    for (const auto& e : r.valuation.decision_trail) {
      if (e.tag == TrailTag::kDecision) decided.push_back(e.variable);
    }
    std::size_t pos = 0;
    for (int var : decided) {
      while (pos < order.size() && order[pos] != var) ++pos;
      if (pos == order.size()) break;
    }
    CHECK(pos < order.size());  // decisions are a subsequence of the order
  }
}

TEST_CASE("dimacs export lists variables and clauses") {
  AbstractionResult ar = instance(3, {{1, -2}, {3}});
  ar.tseitin_aux.insert(3);
  const std::string text = to_dimacs(ar);
  CHECK(text.find("p cnf 3 2") != std::string::npos);
  CHECK(text.find("1 -2 0") != std::string::npos);
}
