#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rulerepair/abstraction.hpp"
#include "rulerepair/criticality.hpp"
#include "rulerepair/mpr.hpp"
#include "rulerepair/predicates.hpp"
#include "rulerepair/reach.hpp"
#include "rulerepair/repair_opt.hpp"
#include "rulerepair/sat.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

enum class InfeasibleReason {
  kUnsat,
  kAllValuationsExhausted,
  kEmptyReach,
  kVerificationFailedEverywhere,
  kScenarioInvalid,
};

std::string infeasible_reason_name(InfeasibleReason r);

struct IterationRecord {
  int iteration = 0;
  std::string valuation;
  std::string outcome;  // one line per SMT iteration for diagnostics
  double tc = kNegInf;
  std::map<std::string, double> ttm;
};

struct RepairDiagnostics {
  double tv = kInfTime;
  std::vector<RuleTv> rule_tvs;
  std::vector<std::pair<int, double>> proposition_rho;  // (index, rho)
  std::vector<IterationRecord> iterations;
  double wall_ms = 0.0;
  std::map<std::string, double> stage_ms;
};

struct NoViolation {
  RepairDiagnostics diagnostics;
};

struct Repaired {
  Trajectory trajectory;
  int k_cut = 0;
  PartialValuation valuation;
  int iterations = 0;
  RepairDiagnostics diagnostics;
};

struct Infeasible {
  InfeasibleReason reason = InfeasibleReason::kAllValuationsExhausted;
  std::string detail;
  RepairDiagnostics diagnostics;
};

using RepairOutcome = std::variant<NoViolation, Repaired, Infeasible>;

struct EngineConfig {
  int max_iterations = 16;
  double budget_ms = 1000.0;
  SampleConfig mpr;
  ReachGrid grid;
  QpWeights weights;
  QpTolerances qp_tol;
  PredicateParams predicate_params;
  bool maneuver_fallback = true;  // accept the TTM witness if the QP fails
};

/// The full monitor -> abstract -> SAT -> T-solve -> verify loop.
RepairOutcome repair(const Scenario& sc, const std::vector<std::string>& rules,
                     const EngineConfig& cfg = {});

struct BatchEntry {
  std::string file;
  std::string outcome;  // "no_violation" | "repaired" | "infeasible" | "error"
  double wall_ms = 0.0;
  int k_cut = -1;
  std::string detail;
};

struct BatchReport {
  std::vector<BatchEntry> entries;
  int repaired = 0;
  int no_violation = 0;
  int infeasible = 0;
  int errors = 0;
  double mean_ms = 0.0;
  double p90_ms = 0.0;

  double success_rate() const;
};

/// Runs every scenario JSON file in the directory; per-file errors are
/// isolated and reported.
BatchReport run_batch(const std::string& dir, const std::vector<std::string>& rules,
                      const EngineConfig& cfg = {});

// scenario_io.cpp
Scenario load_scenario(const std::string& path);
Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& sc);
std::string trajectory_to_json_text(const Trajectory& traj);
std::string outcome_to_json_text(const RepairOutcome& outcome, const Scenario& sc);
std::string batch_report_to_json_text(const BatchReport& report);

}  // namespace rulerepair
