#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rulerepair/stl.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

enum class PredicateArity { kEgoOnly, kEgoObstacle };

enum class PredicateCategory {
  kLongitudinalPosition,
  kLateralPosition,
  kVelocity,
  kAcceleration,
  kUncategorized,
};

struct PredicateResult {
  bool truth = false;
  double margin = 0.0;  // raw evaluation value, sign agrees with truth
};

/// Axis-aligned constraint box over (s, s_dot, d); infinite bounds allowed.
struct ConstraintBox {
  Interval s{-1e18, 1e18};
  Interval s_dot{-1e18, 1e18};
  Interval d{-1e18, 1e18};
};

/// Union of constraint boxes. An empty union means "no state qualifies".
using ConstraintRegion = std::vector<ConstraintBox>;

struct UnknownPredicate : std::runtime_error {
  explicit UnknownPredicate(const std::string& id)
      : std::runtime_error("unknown predicate: " + id) {}
};

struct MissingObstacle : std::runtime_error {
  explicit MissingObstacle(const std::string& id)
      : std::runtime_error("predicate requires an obstacle: " + id) {}
};

/// Tunable predicate semantics shared by the catalog.
struct PredicateParams {
  double v_standstill = 0.01;   // [m/s]
  double a_min = -10.0;         // max deceleration, ego and obstacles [m/s^2]
  double a_comfort = 2.0;       // comfortable braking threshold [m/s^2]
  double t_react = 0.4;         // reaction time in the safe distance [s]
  double v_type_limit = 50.0;   // limits for the non-lane speed rules [m/s]
  double v_fov_limit = 50.0;
  double v_braking_limit = 50.0;
};

struct PredicateDef {
  std::string id;
  PredicateArity arity = PredicateArity::kEgoOnly;
  PredicateCategory category = PredicateCategory::kUncategorized;
  bool projectable = false;
  bool ego_independent = false;  // truth is fixed by recorded or static context
  std::string doc;
};

class PredicateCatalog {
 public:
  explicit PredicateCatalog(PredicateParams params = {});

  const std::vector<PredicateDef>& defs() const { return defs_; }
  const PredicateDef& def(const std::string& id) const;
  bool contains(const std::string& id) const;
  const PredicateParams& params() const { return params_; }

  /// Evaluates a predicate on an explicit ego state at step k. Obstacle
  /// states are taken from the recorded trajectories (extrapolated at
  /// constant velocity past the recorded horizon).
  PredicateResult eval_state(const std::string& id, const Scenario& sc, const State& ego,
                             int k, const std::string& obstacle = "") const;

  /// Evaluates on the scenario's own ego trajectory at step k.
  PredicateResult eval(const std::string& id, const Scenario& sc, int k,
                       const std::string& obstacle = "") const;

  /// Sound overapproximation of the ego states where the predicate has the
  /// given truth value at step k; nullopt when not projectable.
  std::optional<ConstraintRegion> project(const std::string& id, const Scenario& sc, int k,
                                          bool polarity, const std::string& obstacle = "") const;

 private:
  PredicateParams params_;
  std::vector<PredicateDef> defs_;
};

/// Obstacle state at step k, constant-velocity extrapolated past the end.
State obstacle_state_at(const Obstacle& obs, int k, double dt);

struct RuleLibraryEntry {
  std::string name;
  std::string formula_text;
  std::map<std::string, double> params;  // interval parameters in seconds
  std::string description;

  Formula parse_formula(double dt) const;
};

/// Built-in rule library; the same content ships as rules/rules.json.
std::vector<RuleLibraryEntry> default_rule_library();

const RuleLibraryEntry* find_rule(const std::vector<RuleLibraryEntry>& lib,
                                  const std::string& name);

/// Signal view over a scenario trace: predicate truth from the catalog, rob
/// channel is the raw margin (clamped away from zero).
class TraceSignal : public SignalView {
 public:
  TraceSignal(const Scenario& sc, const Trajectory& ego, PredicateCatalog catalog);

  int length() const override;
  bool eval(const std::string& pred_id, int k) const override;
  double rob(const std::string& pred_id, int k) const override;

  const PredicateCatalog& catalog() const { return catalog_; }

 private:
  PredicateResult eval_result(const std::string& pred_id, int k) const;

  const Scenario& sc_;
  Trajectory ego_;
  PredicateCatalog catalog_;
  std::string obstacle_;
  mutable std::map<std::pair<std::string, int>, PredicateResult> cache_;
};

}  // namespace rulerepair
