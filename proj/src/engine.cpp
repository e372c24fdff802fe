#include "rulerepair/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

namespace rulerepair {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct ScopedTimer {
  RepairDiagnostics* diag;
  std::string key;
  Clock::time_point t0 = Clock::now();
  ~ScopedTimer() { diag->stage_ms[key] += ms_since(t0); }
};

}  // namespace

std::string infeasible_reason_name(InfeasibleReason r) {
  switch (r) {
    case InfeasibleReason::kUnsat:
      return "UNSAT";
    case InfeasibleReason::kAllValuationsExhausted:
      return "AllValuationsExhausted";
    case InfeasibleReason::kEmptyReach:
      return "EmptyReach";
    case InfeasibleReason::kVerificationFailedEverywhere:
      return "VerificationFailedEverywhere";
    case InfeasibleReason::kScenarioInvalid:
      return "ScenarioInvalid";
  }
  return "?";
}

RepairOutcome repair(const Scenario& sc, const std::vector<std::string>& rule_names,
                     const EngineConfig& cfg) {
  const auto t_start = Clock::now();
  RepairDiagnostics diag;

  const auto violations = validate_scenario(sc);
  if (!violations.empty()) {
    std::string detail;
    for (const auto& v : violations) detail += v.code + " ";
    return Infeasible{InfeasibleReason::kScenarioInvalid, detail, diag};
  }

  const PredicateCatalog catalog(cfg.predicate_params);
  const auto lib = default_rule_library();
  std::vector<std::pair<std::string, Formula>> rules;
  for (const std::string& name : rule_names) {
    const RuleLibraryEntry* entry = find_rule(lib, name);
    if (entry == nullptr) {
      return Infeasible{InfeasibleReason::kScenarioInvalid, "unknown rule " + name, diag};
    }
    rules.emplace_back(name, entry->parse_formula(sc.dt));
  }
  if (rules.empty()) {
    return Infeasible{InfeasibleReason::kScenarioInvalid, "no rules selected", diag};
  }

  // (1) monitor
  TraceSignal trace(sc, sc.ego_trajectory, catalog);
  {
    ScopedTimer t{&diag, "monitor"};
    diag.rule_tvs = per_rule_tv(rules, trace, 0);
  }
  diag.tv = kInfTime;
  for (const auto& rtv : diag.rule_tvs) diag.tv = std::min(diag.tv, rtv.tv);
  if (std::isinf(diag.tv) && diag.tv > 0) {
    diag.wall_ms = ms_since(t_start);
    return NoViolation{diag};
  }
  const int tv = static_cast<int>(diag.tv);

  // (2) abstraction of the conjoined rules
  AbstractionResult ar;
  {
    ScopedTimer t{&diag, "abstract"};
    std::vector<std::pair<std::string, Formula>> decomposed;
    for (const auto& [name, f] : rules) {
      decomposed.emplace_back(name, decompose(to_nnf(f)).formula);
    }
    ar = to_cnf_with_rules(decomposed, &catalog);
  }

  std::map<std::string, int> rule_tv_map;
  for (const auto& rtv : diag.rule_tvs) {
    rule_tv_map[rtv.name] =
        std::isinf(rtv.tv) ? sc.horizon : static_cast<int>(rtv.tv);
  }

  // trace valuation of each proposition's body at its rule's violation step
  std::map<int, bool> trace_val_at_tv;
  for (const auto& prop : ar.propositions) {
    const int at = rule_tv_map.count(prop.rule) ? rule_tv_map[prop.rule] : tv;
    const Formula& sub = prop.subformula;
    const Formula& body =
        sub.kind() == FormulaKind::kGlobally ? sub.children().front() : sub;
    trace_val_at_tv[prop.index] = eval_bool(body, trace, std::min(at, sc.horizon));
  }

  // (3) proposition robustness over [TV, h], ascending |rho| with index ties
  std::vector<int> order;
  {
    ScopedTimer t{&diag, "mpr"};
    MprSignal mpr_sig(sc, cfg.mpr, catalog);
    std::vector<std::pair<double, int>> ranked;
    for (const auto& prop : ar.propositions) {
      const int start = rule_tv_map.count(prop.rule) ? rule_tv_map[prop.rule] : tv;
      const double rho = proposition_robustness(prop, mpr_sig, std::min(start, sc.horizon));
      ranked.emplace_back(std::abs(rho), prop.index);
      diag.proposition_rho.emplace_back(prop.index, rho);
    }
    std::sort(ranked.begin(), ranked.end());
    for (const auto& [abs_rho, idx] : ranked) order.push_back(idx);
  }

  // first decision tries the flip of the trace valuation
  std::map<int, bool> polarity_hint;
  for (const auto& [idx, val] : trace_val_at_tv) polarity_hint[idx] = !val;

  const Formula conj = conjoin_rules(rules).formula;
  AbstractionResult working = ar;

  // Ego-independent propositions are fixed by the recorded world; pinning
  // them as unit clauses keeps the SAT search over actionable choices only.
  for (const auto& prop : ar.propositions) {
    if (!prop.ego_independent) continue;
    const bool value = eval_bool(prop.subformula, trace, 0);
    working.cnf.push_back({value ? prop.index : -prop.index});
  }

  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    if (ms_since(t_start) > cfg.budget_ms) {
      diag.wall_ms = ms_since(t_start);
      return Infeasible{InfeasibleReason::kAllValuationsExhausted, "budget exhausted", diag};
    }
    IterationRecord rec;
    rec.iteration = iteration;

    // (4) SAT
    SatResult sat;
    {
      ScopedTimer t{&diag, "sat"};
      sat = solve(working, order, polarity_hint);
    }
    if (!sat.sat) {
      rec.outcome = "UNSAT";
      diag.iterations.push_back(rec);
      diag.wall_ms = ms_since(t_start);
      return Infeasible{InfeasibleReason::kUnsat, "abstraction unsatisfiable", diag};
    }
    rec.valuation = sat.valuation.assignments.to_string();

    const auto ban_and_continue = [&](const std::string& why) {
      rec.outcome = why;
      diag.iterations.push_back(rec);
      working = add_conflict(std::move(working), sat.valuation.assignments);
    };

    // (5) maneuver selection and time-to-comply
    CutoffResult cutoff;
    try {
      ScopedTimer t{&diag, "tc"};
      cutoff = time_to_comply(sc, sat.valuation, working, trace_val_at_tv, tv, catalog);
    } catch (const NoActionableProposition&) {
      ban_and_continue("no actionable proposition");
      continue;
    }
    for (const auto& [kind, ttm] : cutoff.per_maneuver_ttm) {
      rec.ttm[maneuver_name(kind)] = ttm;
    }
    if (std::isinf(cutoff.tc) && cutoff.tc < 0) {
      ban_and_continue("all maneuvers fail (TC = -inf)");
      continue;
    }
    const int k_cut = static_cast<int>(cutoff.tc);
    rec.tc = cutoff.tc;

    // (6) reachability
    ReachOutcome reach_out;
    {
      ScopedTimer t{&diag, "reach"};
      reach_out = compute_reach(sc, k_cut, sat.valuation, working, rule_tv_map, tv, catalog,
                                cfg.grid);
    }
    if (const auto* empty = std::get_if<ReachEmpty>(&reach_out)) {
      ban_and_continue("reach empty at step " + std::to_string(empty->at_step));
      continue;
    }
    if (const auto* unavailable = std::get_if<ProjectionUnavailable>(&reach_out)) {
      ban_and_continue("projection unavailable: " + unavailable->reason);
      continue;
    }
    const ReachSet& rs = std::get<ReachSet>(reach_out);

    // (7) corridor, convex repair, final verification
    std::optional<SpliceOutcome> spliced;
    {
      ScopedTimer t{&diag, "repair"};
      try {
        const Corridor corridor = extract_corridor(rs, sc);
        const auto segment = solve_repair(sc, corridor, k_cut, cfg.weights, cfg.qp_tol);
        if (segment) {
          spliced = splice_and_verify(sc, *segment, k_cut, conj, catalog);
        }
      } catch (const NoConnectedCorridor&) {
        spliced.reset();
      }
    }
    if ((!spliced || !spliced->verified) && cfg.maneuver_fallback) {
      // the TTM witness is itself a dynamically feasible repair candidate
      ScopedTimer t{&diag, "repair"};
      const Trajectory witness = splice_maneuver(sc, cutoff.best, k_cut);
      RepairedSegment seg;
      seg.states.assign(witness.states.begin() + k_cut, witness.states.end());
      seg.inputs.assign(witness.inputs.begin() + k_cut, witness.inputs.end());
      const SpliceOutcome fallback = splice_and_verify(sc, seg, k_cut, conj, catalog);
      if (fallback.verified && (!spliced || !spliced->verified)) spliced = fallback;
    }
    if (!spliced || !spliced->verified) {
      ban_and_continue("verification failed after repair");
      continue;
    }

    rec.outcome = "repaired";
    diag.iterations.push_back(rec);
    diag.wall_ms = ms_since(t_start);
    Repaired result;
    result.trajectory = spliced->trajectory;
    result.k_cut = k_cut;
    result.valuation = sat.valuation.assignments;
    result.iterations = iteration;
    result.diagnostics = diag;
    return result;
  }

  diag.wall_ms = ms_since(t_start);
  // classify the exhaustion when every iteration failed the same way
  bool all_empty = !diag.iterations.empty();
  bool all_verify = !diag.iterations.empty();
  for (const auto& rec : diag.iterations) {
    all_empty = all_empty && rec.outcome.rfind("reach empty", 0) == 0;
    all_verify = all_verify && rec.outcome.rfind("verification failed", 0) == 0;
  }
  InfeasibleReason reason = InfeasibleReason::kAllValuationsExhausted;
  if (all_empty) reason = InfeasibleReason::kEmptyReach;
  if (all_verify) reason = InfeasibleReason::kVerificationFailedEverywhere;
  return Infeasible{reason, "iteration budget exhausted", diag};
}

double BatchReport::success_rate() const {
  const int total = repaired + no_violation + infeasible + errors;
  if (total == 0) return 0.0;
  return static_cast<double>(repaired + no_violation) / total;
}

BatchReport run_batch(const std::string& dir, const std::vector<std::string>& rules,
                      const EngineConfig& cfg) {
  BatchReport report;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<double> times;
  for (const auto& path : files) {
    BatchEntry entry;
    entry.file = path.filename().string();
    const auto t0 = Clock::now();
    try {
      const Scenario sc = load_scenario(path.string());
      const RepairOutcome outcome = repair(sc, rules, cfg);
      entry.wall_ms = ms_since(t0);
      if (std::holds_alternative<NoViolation>(outcome)) {
        entry.outcome = "no_violation";
        ++report.no_violation;
      } else if (const auto* r = std::get_if<Repaired>(&outcome)) {
        entry.outcome = "repaired";
        entry.k_cut = r->k_cut;
        ++report.repaired;
      } else {
        const auto& inf = std::get<Infeasible>(outcome);
        entry.outcome = "infeasible";
        entry.detail = infeasible_reason_name(inf.reason);
        ++report.infeasible;
      }
    } catch (const std::exception& e) {
      entry.wall_ms = ms_since(t0);
      entry.outcome = "error";
      entry.detail = e.what();
      ++report.errors;
    }
    times.push_back(entry.wall_ms);
    report.entries.push_back(std::move(entry));
  }

  if (!times.empty()) {
    report.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / times.size();
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    report.p90_ms = sorted[static_cast<std::size_t>(0.9 * (sorted.size() - 1))];
  }
  return report;
}

}  // namespace rulerepair
