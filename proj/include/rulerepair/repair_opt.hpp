#pragma once

#include <variant>
#include <vector>

#include "rulerepair/predicates.hpp"
#include "rulerepair/reach.hpp"
#include "rulerepair/stl.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

struct QpWeights {
  double w_jerk = 1.0;
  double w_acc = 0.5;
  double w_dev = 0.1;
};

/// Sparse convex QP: minimize 0.5 z'Pz + q'z subject to l <= Az <= u.
/// Equalities are rows with l == u.
struct QPProblem {
  int n = 0;  // variables
  int m = 0;  // constraint rows
  std::vector<std::vector<std::pair<int, double>>> p_rows;  // upper symmetric P
  std::vector<double> q;
  std::vector<std::vector<std::pair<int, double>>> a_rows;
  std::vector<double> lower;
  std::vector<double> upper;
  int equality_rows = 0;
  int inequality_rows = 0;
};

struct QpSolution {
  std::vector<double> z;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
};

struct QpInfeasible {};
struct NumericalBreakdown {
  int iterations = 0;
};

using QpOutcome = std::variant<QpSolution, QpInfeasible, NumericalBreakdown>;

struct QpTolerances {
  double primal = 1e-6;
  double dual = 1e-6;
  double rel_gap = 1e-8;
  int max_iterations = 10000;
};

/// Operator-splitting QP solver with an active-set polish step.
QpOutcome solve_qp(const QPProblem& qp, const QpTolerances& tol = {});

struct RepairQp {
  QPProblem longitudinal;
  int k_cut = 0;
  int constraint_count = 0;
};

/// Longitudinal QP over [k_cut, h]: fourth-order chain, corridor boxes as
/// state bounds, initial state pinned to the trace.
RepairQp build_qp(const Scenario& sc, const Corridor& corridor, int k_cut,
                  const QpWeights& weights = {});

/// Lateral QP given the solved longitudinal positions (used to refine the
/// road-bound lookups per step).
QPProblem build_lateral_qp(const Scenario& sc, const Corridor& corridor, int k_cut,
                           const std::vector<double>& s_profile, const QpWeights& weights = {});

struct RepairedSegment {
  std::vector<State> states;  // k in [k_cut, h]
  std::vector<Input> inputs;  // k in [k_cut, h-1]
};

/// Both chains solved in sequence; nullopt when either is infeasible.
std::optional<RepairedSegment> solve_repair(const Scenario& sc, const Corridor& corridor,
                                            int k_cut, const QpWeights& weights = {},
                                            const QpTolerances& tol = {});

struct SpliceOutcome {
  bool verified = false;
  Trajectory trajectory;
  double tv = 0.0;
};

/// Splices the segment onto the initial trajectory prefix and re-runs the
/// monitor; verified only when the full rule conjunction holds (TV = inf).
SpliceOutcome splice_and_verify(const Scenario& sc, const RepairedSegment& segment, int k_cut,
                                const Formula& rule, const PredicateCatalog& catalog);

}  // namespace rulerepair
