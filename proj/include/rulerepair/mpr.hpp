#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rulerepair/abstraction.hpp"
#include "rulerepair/predicates.hpp"
#include "rulerepair/stl.hpp"
#include "rulerepair/world.hpp"

namespace rulerepair {

/// Monte Carlo sampling configuration.
struct SampleConfig {
  int n_samples = 1500;
  double horizon_pred = 1.56;      // [s]
  double v_window = 17.25;         // terminal velocity half-width [m/s]
  double d_window_high = 5.0;      // lateral position half-width, high speed [m]
  double d_window_low = 1.5;       // lateral position half-width, low speed [m]
  double d_dot_window_high = 3.0;  // terminal lateral velocity, high speed [m/s]
  double d_dot_window_low = 0.2;   // terminal lateral velocity, low speed [m/s]
  double v_switch = 4.0;           // low/high speed mode switch [m/s]
  std::uint64_t rng_seed = 42;
};

struct RobustnessEstimate {
  double value = 0.0;  // in [-1, -eps] U [eps, 1]
  int compliant_count = 0;
  int total_count = 0;
  bool truth = false;
};

struct SampleDiagnostics {
  int requested = 0;
  int produced = 0;
  bool obstacle_extrapolated = false;
};

struct HorizonExceeded : std::runtime_error {
  HorizonExceeded() : std::runtime_error("sampling step beyond the scenario horizon") {}
};

/// Samples terminal ego states reachable within the prediction horizon via
/// polynomial connections to sampled terminal conditions. Deterministic in
/// (rng_seed, k, salt).
std::vector<State> sample_futures(const Scenario& sc, int k, const SampleConfig& cfg,
                                  std::uint64_t salt = 0, SampleDiagnostics* diag = nullptr);

/// Signed relative frequency of compliant sampled futures for a predicate.
RobustnessEstimate mpr_robustness(const std::string& pred_id, const Scenario& sc, int k,
                                  const std::string& obstacle, const SampleConfig& cfg,
                                  const PredicateCatalog& catalog);

/// Signal view whose rob channel is the model predictive robustness; truth
/// is the trace truth at each step. Estimates are cached per (pred, k).
class MprSignal : public SignalView {
 public:
  MprSignal(const Scenario& sc, const SampleConfig& cfg, PredicateCatalog catalog);

  int length() const override;
  bool eval(const std::string& pred_id, int k) const override;
  double rob(const std::string& pred_id, int k) const override;

 private:
  const Scenario& sc_;
  SampleConfig cfg_;
  PredicateCatalog catalog_;
  std::string obstacle_;
  mutable std::map<std::pair<std::string, int>, RobustnessEstimate> cache_;
};

/// Robustness of a proposition's subformula over [window_start, h] with the
/// model predictive robustness as the predicate channel.
double proposition_robustness(const Proposition& prop, const Scenario& sc, int window_start,
                              const SampleConfig& cfg, const PredicateCatalog& catalog);

double proposition_robustness(const Proposition& prop, const SignalView& sig, int window_start);

/// Feature vector extraction for one step, grouped per the active location
/// type (intersection when the scenario declares one, interstate otherwise).
/// Kept so a regression model can be trained on top of the sampler later.
std::map<std::string, double> extract_features(const Scenario& sc, int k,
                                               const std::string& pred_id,
                                               const std::string& obstacle,
                                               const PredicateCatalog& catalog);

}  // namespace rulerepair
