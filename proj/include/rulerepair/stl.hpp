#pragma once

#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rulerepair {

// Temporal interval bound meaning "until the end of the signal".
inline constexpr int kUnboundedStep = std::numeric_limits<int>::max();
inline constexpr double kInfTime = std::numeric_limits<double>::infinity();

enum class FormulaKind {
  kTrue,
  kFalse,
  kPredicate,
  kNot,
  kAnd,
  kOr,
  kUntil,
  kSince,
  kRelease,   // dual of Until, produced by NNF rewriting
  kTrigger,   // dual of Since, produced by NNF rewriting
  kEventually,
  kGlobally,
  kOnce,
  kHistorically,
  kPrevious,
};

class Formula {
 public:
  struct Node {
    FormulaKind kind = FormulaKind::kTrue;
    std::string pred_id;         // kPredicate
    bool negated = false;        // kPredicate: literal polarity
    bool weak = false;           // kPrevious: weak variant is true at k = 0
    int a = 0;                   // window lower bound in steps
    int b = kUnboundedStep;      // window upper bound in steps
    std::vector<Formula> children;
  };

  Formula() : node_(std::make_shared<Node>()) {}
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  const Node& node() const { return *node_; }
  FormulaKind kind() const { return node_->kind; }
  const std::vector<Formula>& children() const { return node_->children; }

  bool operator==(const Formula& other) const;
  bool operator!=(const Formula& other) const { return !(*this == other); }

  /// Stable structural hash, used for proposition deduplication.
  std::size_t hash() const;

 private:
  std::shared_ptr<const Node> node_;
};

Formula f_true();
Formula f_false();
Formula f_pred(std::string id, bool negated = false);
Formula f_not(Formula f);
Formula f_and(std::vector<Formula> fs);
Formula f_or(std::vector<Formula> fs);
Formula f_implies(Formula lhs, Formula rhs);
Formula f_until(Formula lhs, Formula rhs, int a = 0, int b = kUnboundedStep);
Formula f_since(Formula lhs, Formula rhs, int a = 0, int b = kUnboundedStep);
Formula f_release(Formula lhs, Formula rhs, int a = 0, int b = kUnboundedStep);
Formula f_trigger(Formula lhs, Formula rhs, int a = 0, int b = kUnboundedStep);
Formula f_eventually(Formula f, int a = 0, int b = kUnboundedStep);
Formula f_globally(Formula f, int a = 0, int b = kUnboundedStep);
Formula f_once(Formula f, int a = 0, int b = kUnboundedStep);
Formula f_historically(Formula f, int a = 0, int b = kUnboundedStep);
Formula f_previous(Formula f, bool weak = false);

/// Read-only view of a discrete signal: Boolean truth and a robustness
/// channel per predicate. rob must agree in sign with eval and never be 0.
class SignalView {
 public:
  virtual ~SignalView() = default;
  virtual int length() const = 0;  // number of steps, h + 1
  virtual bool eval(const std::string& pred_id, int k) const = 0;
  virtual double rob(const std::string& pred_id, int k) const = 0;
};

/// Signal backed by explicit per-predicate robustness samples; truth is the
/// sign. Mostly used by tests and the CLI.
class TableSignal : public SignalView {
 public:
  TableSignal() = default;
  explicit TableSignal(std::map<std::string, std::vector<double>> values)
      : values_(std::move(values)) {}

  void set(const std::string& pred_id, std::vector<double> rob);
  int length() const override;
  bool eval(const std::string& pred_id, int k) const override;
  double rob(const std::string& pred_id, int k) const override;

 private:
  std::map<std::string, std::vector<double>> values_;
};

struct ParseError : std::exception {
  ParseError(std::size_t position, std::string expected_);
  const char* what() const noexcept override { return message.c_str(); }

  std::size_t position = 0;
  std::string expected;
  std::string message;
};

/// Parses the formula grammar. Interval bounds are given in seconds and are
/// converted to steps by rounding t/dt to the nearest step (ties up).
/// Identifiers appearing in interval bounds are resolved from params.
Formula parse(const std::string& text, double dt = 1.0,
              const std::map<std::string, double>& params = {});

/// Canonical text form; parse(print(f)) == f when dt == 1.
std::string print(const Formula& f);

/// Rewrites into negation normal form: negations only on predicates.
Formula to_nnf(const Formula& f);

/// Boolean satisfaction at step k. Weak semantics for universal operators
/// past the end of the signal, strong semantics for existential ones.
bool eval_bool(const Formula& f, const SignalView& sig, int k);

/// Quantitative robustness, the max/min recursion over the rob channel.
double robustness(const Formula& f, const SignalView& sig, int k);

/// Earliest violation step of the recursion; kInfTime when compliant.
double time_to_violation(const Formula& f, const SignalView& sig, int k);

struct RuleTv {
  std::string name;
  double tv = kInfTime;
};

struct ConjoinedRules {
  Formula formula;
  std::vector<std::string> names;
};

/// Conjunction of several rules; per-rule TV diagnostics are computed by
/// per_rule_tv so the minimum matches time_to_violation of the conjunction.
ConjoinedRules conjoin_rules(const std::vector<std::pair<std::string, Formula>>& rules);

std::vector<RuleTv> per_rule_tv(const std::vector<std::pair<std::string, Formula>>& rules,
                                const SignalView& sig, int k);

}  // namespace rulerepair
