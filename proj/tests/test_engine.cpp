#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "rulerepair/engine.hpp"

using namespace rulerepair;

TEST_CASE("compliant scenario reports no violation") {
  const RepairOutcome out = repair(fixtures::compliant(), {"G1", "G3"});
  REQUIRE(std::holds_alternative<NoViolation>(out));
  const auto& nv = std::get<NoViolation>(out);
  CHECK(std::isinf(nv.diagnostics.tv));
}

TEST_CASE("invalid scenario is rejected up front") {
  Scenario sc = fixtures::compliant();
  sc.ego_trajectory.states.pop_back();
  const RepairOutcome out = repair(sc, {"G3"});
  const auto* inf = std::get_if<Infeasible>(&out);
  REQUIRE(inf != nullptr);
  CHECK(inf->reason == InfeasibleReason::kScenarioInvalid);
}

TEST_CASE("stop-line repair succeeds at the second iteration") {
  const Scenario sc = fixtures::stopline();
  const RepairOutcome out = repair(sc, {"IN1"}, fixtures::config_for(sc));
  const auto* r = std::get_if<Repaired>(&out);
  REQUIRE(r != nullptr);
  CHECK(r->iterations == 2);
  CHECK(r->diagnostics.tv == doctest::Approx(15.0));
  CHECK(r->k_cut >= 11);
  CHECK(r->k_cut <= 13);
  // the first iteration proposed the past-only proposition and was banned
  REQUIRE(r->diagnostics.iterations.size() == 2);
  CHECK(r->diagnostics.iterations[0].outcome == "no actionable proposition");
  CHECK(r->diagnostics.iterations[0].valuation.find("s1=T") != std::string::npos);
  CHECK(r->valuation.value(2));

  // the ego reaches standstill before the stop line and stays there
  int standstill_steps = 0;
  for (const State& x : r->trajectory.states) {
    if (std::abs(x.s_dot) <= 0.01 && x.front_s(sc.ego_length) <= 15.6) ++standstill_steps;
  }
  CHECK(standstill_steps >= 15);  // at least t_slw = 3 s at dt = 0.2
}

TEST_CASE("multi-rule repair brakes and re-verifies both rules") {
  const Scenario sc = fixtures::multirule();
  const RepairOutcome out = repair(sc, {"G1", "G3"});
  const auto* r = std::get_if<Repaired>(&out);
  REQUIRE(r != nullptr);
  CHECK(r->iterations == 1);
  CHECK(r->diagnostics.tv == doctest::Approx(13.0));
  // per-rule violation steps as reconstructed
  for (const auto& rtv : r->diagnostics.rule_tvs) {
    if (rtv.name == "G1") CHECK(rtv.tv == doctest::Approx(13.0));
    if (rtv.name == "G3") CHECK(rtv.tv == doctest::Approx(15.0));
  }
  CHECK(r->trajectory.states.back().s_dot < sc.ego_trajectory.states.back().s_dot);

  const PredicateCatalog catalog;
  const auto lib = default_rule_library();
  const TraceSignal sig(sc, r->trajectory, catalog);
  CHECK(std::isinf(time_to_violation(find_rule(lib, "G1")->parse_formula(sc.dt), sig, 0)));
  CHECK(std::isinf(time_to_violation(find_rule(lib, "G3")->parse_formula(sc.dt), sig, 0)));
}

TEST_CASE("priority repair yields before the conflict area") {
  const Scenario sc = fixtures::priority();
  const RepairOutcome out = repair(sc, {"IN4s"});
  const auto* r = std::get_if<Repaired>(&out);
  REQUIRE(r != nullptr);
  CHECK(r->k_cut >= 4);
  CHECK(r->k_cut <= 6);
  // the obstacle leaves its conflict interval at k = 16; the ego must not
  // protrude into the area while it is inside
  for (int k = 0; k <= 16; ++k) {
    CHECK(r->trajectory.states[static_cast<std::size_t>(k)].front_s(sc.ego_length) <
          31.4);
  }
}

TEST_CASE("prefix is preserved bit-exactly and the suffix is consistent") {
  const Scenario sc = fixtures::multirule();
  const RepairOutcome out = repair(sc, {"G1", "G3"});
  const auto* r = std::get_if<Repaired>(&out);
  REQUIRE(r != nullptr);
  for (int k = 0; k <= r->k_cut; ++k) {
    const State& a = r->trajectory.states[static_cast<std::size_t>(k)];
    const State& b = sc.ego_trajectory.states[static_cast<std::size_t>(k)];
    CHECK(a.s == b.s);
    CHECK(a.s_dot == b.s_dot);
    CHECK(a.s_ddot == b.s_ddot);
    CHECK(a.s_dddot == b.s_dddot);
    CHECK(a.d == b.d);
    CHECK(a.d_dot == b.d_dot);
  }
  CHECK(trajectory_consistent(r->trajectory, sc.dt, 1e-6));
}

TEST_CASE("every failed iteration grows the banned set") {
  // exhaust a scenario that cannot be repaired: already inside the stop
  // line region with the standstill requirement unreachable
  Scenario sc = fixtures::stopline();
  sc.ego_initial.s = 30.0;
  sc.ego_initial.s_dot = 4.5;
  sc.ego_trajectory = fixtures::constant_velocity(30.0, 4.5, 0.0, sc.horizon, sc.dt);
  EngineConfig cfg = fixtures::config_for(sc);
  cfg.max_iterations = 8;
  const RepairOutcome out = repair(sc, {"IN1"}, cfg);
  const auto* inf = std::get_if<Infeasible>(&out);
  REQUIRE(inf != nullptr);
  // iterations either exhausted the truth assignments or proved UNSAT
  CHECK(inf->diagnostics.iterations.size() >= 1);
  std::set<std::string> seen;
  for (const auto& rec : inf->diagnostics.iterations) {
    if (rec.outcome == "UNSAT") continue;
    CHECK(seen.insert(rec.valuation).second);  // no valuation repeats
  }
}

TEST_CASE("deterministic outcomes under a fixed seed") {
  const Scenario sc = fixtures::multirule();
  EngineConfig cfg;
  cfg.mpr.rng_seed = 42;
  const RepairOutcome a = repair(sc, {"G1", "G3"}, cfg);
  const RepairOutcome b = repair(sc, {"G1", "G3"}, cfg);
  const auto* ra = std::get_if<Repaired>(&a);
  const auto* rb = std::get_if<Repaired>(&b);
  REQUIRE(ra != nullptr);
  REQUIRE(rb != nullptr);
  CHECK(ra->k_cut == rb->k_cut);
  REQUIRE(ra->trajectory.states.size() == rb->trajectory.states.size());
  for (std::size_t k = 0; k < ra->trajectory.states.size(); ++k) {
    CHECK(ra->trajectory.states[k].s == rb->trajectory.states[k].s);
    CHECK(ra->trajectory.states[k].s_dot == rb->trajectory.states[k].s_dot);
  }
}

TEST_CASE("batch over an empty directory is an empty report") {
  const auto dir = std::filesystem::temp_directory_path() / "rulerepair_empty";
  std::filesystem::create_directories(dir);
  const BatchReport report = run_batch(dir.string(), {"G1", "G3"});
  CHECK(report.entries.empty());
  CHECK(report.repaired == 0);
  CHECK(report.success_rate() == 0.0);
}

TEST_CASE("batch isolates per-file errors") {
  const auto dir = std::filesystem::temp_directory_path() / "rulerepair_batch";
  std::filesystem::create_directories(dir);
  {
    std::ofstream good(dir / "good.json");
    good << scenario_to_json_text(fixtures::multirule());
    std::ofstream bad(dir / "bad.json");
    bad << "{not json";
  }
  const BatchReport report = run_batch(dir.string(), {"G1", "G3"});
  REQUIRE(report.entries.size() == 2);
  CHECK(report.errors == 1);
  CHECK(report.repaired == 1);
  CHECK(report.mean_ms > 0.0);
}

TEST_CASE("scenario json round trip preserves the repair outcome") {
  const Scenario sc = fixtures::priority();
  const Scenario back = scenario_from_json_text(scenario_to_json_text(sc));
  CHECK(validate_scenario(back).empty());
  const RepairOutcome a = repair(sc, {"IN4s"});
  const RepairOutcome b = repair(back, {"IN4s"});
  const auto* ra = std::get_if<Repaired>(&a);
  const auto* rb = std::get_if<Repaired>(&b);
  REQUIRE(ra != nullptr);
  REQUIRE(rb != nullptr);
  CHECK(ra->k_cut == rb->k_cut);
}
