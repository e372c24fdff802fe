#include "rulerepair/stl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rulerepair {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::shared_ptr<const Formula::Node> make_node(Formula::Node n) {
  return std::make_shared<const Formula::Node>(std::move(n));
}

std::size_t hash_combine(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

// Window of evaluation indices, clamped to the signal. Future windows clamp
// to [k+a, min(k+b, h)], past windows to [max(0, k-b), k-a].
struct Window {
  int lo = 0;
  int hi = -1;
  bool empty() const { return lo > hi; }
};

Window future_window(int k, int a, int b, int len) {
  Window w;
  const long long lo = std::min<long long>(static_cast<long long>(k) + a, len);
  const long long hi = std::min<long long>(static_cast<long long>(k) + b, len - 1);
  w.lo = static_cast<int>(lo);
  w.hi = static_cast<int>(hi);
  if (w.lo > w.hi) w.lo = w.hi + 1;
  return w;
}

Window past_window(int k, int a, int b, int /*len*/) {
  Window w;
  const long long lo = std::max<long long>(static_cast<long long>(k) - b, 0);
  w.lo = static_cast<int>(lo);
  w.hi = k - a;
  if (w.lo > w.hi) w.lo = w.hi + 1;
  return w;
}

}  // namespace

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  const Node& a = *node_;
  const Node& b = *other.node_;
  if (a.kind != b.kind || a.pred_id != b.pred_id || a.negated != b.negated ||
      a.weak != b.weak || a.a != b.a || a.b != b.b ||
      a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!(a.children[i] == b.children[i])) return false;
  }
  return true;
}

std::size_t Formula::hash() const {
  const Node& n = *node_;
  std::size_t h = static_cast<std::size_t>(n.kind) * 0x100000001b3ULL;
  h = hash_combine(h, std::hash<std::string>{}(n.pred_id));
  h = hash_combine(h, (n.negated ? 2u : 0u) | (n.weak ? 1u : 0u));
  h = hash_combine(h, static_cast<std::size_t>(n.a));
  h = hash_combine(h, static_cast<std::size_t>(n.b));
  for (const Formula& c : n.children) h = hash_combine(h, c.hash());
  return h;
}

Formula f_true() {
  Formula::Node n;
  n.kind = FormulaKind::kTrue;
  return Formula(make_node(std::move(n)));
}

Formula f_false() {
  Formula::Node n;
  n.kind = FormulaKind::kFalse;
  return Formula(make_node(std::move(n)));
}

Formula f_pred(std::string id, bool negated) {
  Formula::Node n;
  n.kind = FormulaKind::kPredicate;
  n.pred_id = std::move(id);
  n.negated = negated;
  return Formula(make_node(std::move(n)));
}

Formula f_not(Formula f) {
  // literals and double negations normalize immediately
  if (f.kind() == FormulaKind::kPredicate) {
    return f_pred(f.node().pred_id, !f.node().negated);
  }
  if (f.kind() == FormulaKind::kNot) return f.children().front();
  Formula::Node n;
  n.kind = FormulaKind::kNot;
  n.children.push_back(std::move(f));
  return Formula(make_node(std::move(n)));
}

namespace {

Formula nary(FormulaKind kind, std::vector<Formula> fs) {
  // associative connectives flatten
  std::vector<Formula> flat;
  flat.reserve(fs.size());
  for (Formula& f : fs) {
    if (f.kind() == kind) {
      for (const Formula& c : f.children()) flat.push_back(c);
    } else {
      flat.push_back(std::move(f));
    }
  }
  if (flat.size() == 1) return flat.front();
  Formula::Node n;
  n.kind = kind;
  n.children = std::move(flat);
  return Formula(make_node(std::move(n)));
}

Formula binary_temporal(FormulaKind kind, Formula lhs, Formula rhs, int a, int b) {
  Formula::Node n;
  n.kind = kind;
  n.a = a;
  n.b = b;
  n.children.push_back(std::move(lhs));
  n.children.push_back(std::move(rhs));
  return Formula(make_node(std::move(n)));
}

Formula unary_temporal(FormulaKind kind, Formula f, int a, int b) {
  Formula::Node n;
  n.kind = kind;
  n.a = a;
  n.b = b;
  n.children.push_back(std::move(f));
  return Formula(make_node(std::move(n)));
}

}  // namespace

Formula f_and(std::vector<Formula> fs) { return nary(FormulaKind::kAnd, std::move(fs)); }
Formula f_or(std::vector<Formula> fs) { return nary(FormulaKind::kOr, std::move(fs)); }

Formula f_implies(Formula lhs, Formula rhs) {
  return f_or({f_not(std::move(lhs)), std::move(rhs)});
}

Formula f_until(Formula lhs, Formula rhs, int a, int b) {
  return binary_temporal(FormulaKind::kUntil, std::move(lhs), std::move(rhs), a, b);
}
Formula f_since(Formula lhs, Formula rhs, int a, int b) {
  return binary_temporal(FormulaKind::kSince, std::move(lhs), std::move(rhs), a, b);
}
Formula f_release(Formula lhs, Formula rhs, int a, int b) {
  return binary_temporal(FormulaKind::kRelease, std::move(lhs), std::move(rhs), a, b);
}
Formula f_trigger(Formula lhs, Formula rhs, int a, int b) {
  return binary_temporal(FormulaKind::kTrigger, std::move(lhs), std::move(rhs), a, b);
}
Formula f_eventually(Formula f, int a, int b) {
  return unary_temporal(FormulaKind::kEventually, std::move(f), a, b);
}
Formula f_globally(Formula f, int a, int b) {
  return unary_temporal(FormulaKind::kGlobally, std::move(f), a, b);
}
Formula f_once(Formula f, int a, int b) {
  return unary_temporal(FormulaKind::kOnce, std::move(f), a, b);
}
Formula f_historically(Formula f, int a, int b) {
  return unary_temporal(FormulaKind::kHistorically, std::move(f), a, b);
}

Formula f_previous(Formula f, bool weak) {
  Formula::Node n;
  n.kind = FormulaKind::kPrevious;
  n.weak = weak;
  n.children.push_back(std::move(f));
  return Formula(make_node(std::move(n)));
}

void TableSignal::set(const std::string& pred_id, std::vector<double> rob) {
  values_[pred_id] = std::move(rob);
}

int TableSignal::length() const {
  int len = 0;
  for (const auto& [id, v] : values_) len = std::max(len, static_cast<int>(v.size()));
  return len;
}

bool TableSignal::eval(const std::string& pred_id, int k) const { return rob(pred_id, k) > 0.0; }

double TableSignal::rob(const std::string& pred_id, int k) const {
  const auto it = values_.find(pred_id);
  if (it == values_.end()) throw std::out_of_range("unknown predicate: " + pred_id);
  return it->second.at(static_cast<std::size_t>(k));
}

// ---------------------------------------------------------------------------
// NNF

namespace {

Formula nnf_pos(const Formula& f);
Formula nnf_neg(const Formula& f);

Formula nnf_pos(const Formula& f) {
  const auto& n = f.node();
  switch (n.kind) {
    case FormulaKind::kTrue:
    case FormulaKind::kFalse:
    case FormulaKind::kPredicate:
      return f;
    case FormulaKind::kNot:
      return nnf_neg(n.children.front());
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      std::vector<Formula> cs;
      cs.reserve(n.children.size());
      for (const Formula& c : n.children) cs.push_back(nnf_pos(c));
      return nary(n.kind, std::move(cs));
    }
    case FormulaKind::kUntil:
    case FormulaKind::kSince:
    case FormulaKind::kRelease:
    case FormulaKind::kTrigger:
      return binary_temporal(n.kind, nnf_pos(n.children[0]), nnf_pos(n.children[1]), n.a, n.b);
    case FormulaKind::kEventually:
    case FormulaKind::kGlobally:
    case FormulaKind::kOnce:
    case FormulaKind::kHistorically:
      return unary_temporal(n.kind, nnf_pos(n.children[0]), n.a, n.b);
    case FormulaKind::kPrevious:
      return f_previous(nnf_pos(n.children[0]), n.weak);
  }
  return f;
}

Formula nnf_neg(const Formula& f) {
  const auto& n = f.node();
  switch (n.kind) {
    case FormulaKind::kTrue:
      return f_false();
    case FormulaKind::kFalse:
      return f_true();
    case FormulaKind::kPredicate:
      return f_pred(n.pred_id, !n.negated);
    case FormulaKind::kNot:
      return nnf_pos(n.children.front());
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      std::vector<Formula> cs;
      cs.reserve(n.children.size());
      for (const Formula& c : n.children) cs.push_back(nnf_neg(c));
      return nary(n.kind == FormulaKind::kAnd ? FormulaKind::kOr : FormulaKind::kAnd,
                  std::move(cs));
    }
    case FormulaKind::kUntil:
      return f_release(nnf_neg(n.children[0]), nnf_neg(n.children[1]), n.a, n.b);
    case FormulaKind::kRelease:
      return f_until(nnf_neg(n.children[0]), nnf_neg(n.children[1]), n.a, n.b);
    case FormulaKind::kSince:
      return f_trigger(nnf_neg(n.children[0]), nnf_neg(n.children[1]), n.a, n.b);
    case FormulaKind::kTrigger:
      return f_since(nnf_neg(n.children[0]), nnf_neg(n.children[1]), n.a, n.b);
    case FormulaKind::kEventually:
      return f_globally(nnf_neg(n.children[0]), n.a, n.b);
    case FormulaKind::kGlobally:
      return f_eventually(nnf_neg(n.children[0]), n.a, n.b);
    case FormulaKind::kOnce:
      return f_historically(nnf_neg(n.children[0]), n.a, n.b);
    case FormulaKind::kHistorically:
      return f_once(nnf_neg(n.children[0]), n.a, n.b);
    case FormulaKind::kPrevious:
      return f_previous(nnf_neg(n.children[0]), !n.weak);
  }
  return f;
}

}  // namespace

Formula to_nnf(const Formula& f) { return nnf_pos(f); }

// ---------------------------------------------------------------------------
// Semantics

bool eval_bool(const Formula& f, const SignalView& sig, int k) {
  const auto& n = f.node();
  const int len = sig.length();
  switch (n.kind) {
    case FormulaKind::kTrue:
      return true;
    case FormulaKind::kFalse:
      return false;
    case FormulaKind::kPredicate: {
      const bool v = sig.eval(n.pred_id, k);
      return n.negated ? !v : v;
    }
    case FormulaKind::kNot:
      return !eval_bool(n.children[0], sig, k);
    case FormulaKind::kAnd:
      for (const Formula& c : n.children) {
        if (!eval_bool(c, sig, k)) return false;
      }
      return true;
    case FormulaKind::kOr:
      for (const Formula& c : n.children) {
        if (eval_bool(c, sig, k)) return true;
      }
      return false;
    case FormulaKind::kUntil: {
      const Window w = future_window(k, n.a, n.b, len);
      bool lhs_holds = true;
      for (int tau = k; tau < w.lo; ++tau) {
        if (!eval_bool(n.children[0], sig, tau)) return false;
      }
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        lhs_holds = lhs_holds && eval_bool(n.children[0], sig, kp);
        if (!lhs_holds) return false;
        if (eval_bool(n.children[1], sig, kp)) return true;
      }
      return false;
    }
    case FormulaKind::kRelease: {
      const Window w = future_window(k, n.a, n.b, len);
      bool released = false;
      int tau = k;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        for (; tau <= kp; ++tau) released = released || eval_bool(n.children[0], sig, tau);
        if (!released && !eval_bool(n.children[1], sig, kp)) return false;
        if (released) return true;
      }
      return true;
    }
    case FormulaKind::kSince: {
      const Window w = past_window(k, n.a, n.b, len);
      for (int kp = w.hi; kp >= w.lo; --kp) {
        bool lhs_holds = true;
        for (int tau = kp; tau <= k && lhs_holds; ++tau) {
          lhs_holds = eval_bool(n.children[0], sig, tau);
        }
        if (lhs_holds && eval_bool(n.children[1], sig, kp)) return true;
      }
      return false;
    }
    case FormulaKind::kTrigger: {
      const Window w = past_window(k, n.a, n.b, len);
      for (int kp = w.hi; kp >= w.lo; --kp) {
        bool lhs_exists = false;
        for (int tau = kp; tau <= k && !lhs_exists; ++tau) {
          lhs_exists = eval_bool(n.children[0], sig, tau);
        }
        if (!lhs_exists && !eval_bool(n.children[1], sig, kp)) return false;
      }
      return true;
    }
    case FormulaKind::kEventually: {
      const Window w = future_window(k, n.a, n.b, len);
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        if (eval_bool(n.children[0], sig, kp)) return true;
      }
      return false;
    }
    case FormulaKind::kGlobally: {
      const Window w = future_window(k, n.a, n.b, len);
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        if (!eval_bool(n.children[0], sig, kp)) return false;
      }
      return true;
    }
    case FormulaKind::kOnce: {
      const Window w = past_window(k, n.a, n.b, len);
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        if (eval_bool(n.children[0], sig, kp)) return true;
      }
      return false;
    }
    case FormulaKind::kHistorically: {
      const Window w = past_window(k, n.a, n.b, len);
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        if (!eval_bool(n.children[0], sig, kp)) return false;
      }
      return true;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak;
      return eval_bool(n.children[0], sig, k - 1);
  }
  return false;
}

double robustness(const Formula& f, const SignalView& sig, int k) {
  const auto& n = f.node();
  const int len = sig.length();
  switch (n.kind) {
    case FormulaKind::kTrue:
      return kInf;
    case FormulaKind::kFalse:
      return -kInf;
    case FormulaKind::kPredicate: {
      const double r = sig.rob(n.pred_id, k);
      return n.negated ? -r : r;
    }
    case FormulaKind::kNot:
      return -robustness(n.children[0], sig, k);
    case FormulaKind::kAnd: {
      double r = kInf;
      for (const Formula& c : n.children) r = std::min(r, robustness(c, sig, k));
      return r;
    }
    case FormulaKind::kOr: {
      double r = -kInf;
      for (const Formula& c : n.children) r = std::max(r, robustness(c, sig, k));
      return r;
    }
    case FormulaKind::kUntil: {
      const Window w = future_window(k, n.a, n.b, len);
      double best = -kInf;
      double lhs_min = kInf;
      for (int tau = k; tau < w.lo; ++tau) {
        lhs_min = std::min(lhs_min, robustness(n.children[0], sig, tau));
      }
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        lhs_min = std::min(lhs_min, robustness(n.children[0], sig, kp));
        best = std::max(best, std::min(robustness(n.children[1], sig, kp), lhs_min));
      }
      return best;
    }
    case FormulaKind::kRelease: {
      const Window w = future_window(k, n.a, n.b, len);
      double worst = kInf;
      double lhs_max = -kInf;
      for (int tau = k; tau < w.lo; ++tau) {
        lhs_max = std::max(lhs_max, robustness(n.children[0], sig, tau));
      }
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        lhs_max = std::max(lhs_max, robustness(n.children[0], sig, kp));
        worst = std::min(worst, std::max(robustness(n.children[1], sig, kp), lhs_max));
      }
      return worst;
    }
    case FormulaKind::kSince: {
      const Window w = past_window(k, n.a, n.b, len);
      double best = -kInf;
      double lhs_min = kInf;
      for (int tau = k; tau > w.hi; --tau) {
        lhs_min = std::min(lhs_min, robustness(n.children[0], sig, tau));
      }
      for (int kp = w.hi; kp >= w.lo; --kp) {
        lhs_min = std::min(lhs_min, robustness(n.children[0], sig, kp));
        best = std::max(best, std::min(robustness(n.children[1], sig, kp), lhs_min));
      }
      return best;
    }
    case FormulaKind::kTrigger: {
      const Window w = past_window(k, n.a, n.b, len);
      double worst = kInf;
      double lhs_max = -kInf;
      for (int tau = k; tau > w.hi; --tau) {
        lhs_max = std::max(lhs_max, robustness(n.children[0], sig, tau));
      }
      for (int kp = w.hi; kp >= w.lo; --kp) {
        lhs_max = std::max(lhs_max, robustness(n.children[0], sig, kp));
        worst = std::min(worst, std::max(robustness(n.children[1], sig, kp), lhs_max));
      }
      return worst;
    }
    case FormulaKind::kEventually: {
      const Window w = future_window(k, n.a, n.b, len);
      double best = -kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        best = std::max(best, robustness(n.children[0], sig, kp));
      }
      return best;
    }
    case FormulaKind::kGlobally: {
      const Window w = future_window(k, n.a, n.b, len);
      double worst = kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        worst = std::min(worst, robustness(n.children[0], sig, kp));
      }
      return worst;
    }
    case FormulaKind::kOnce: {
      const Window w = past_window(k, n.a, n.b, len);
      double best = -kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        best = std::max(best, robustness(n.children[0], sig, kp));
      }
      return best;
    }
    case FormulaKind::kHistorically: {
      const Window w = past_window(k, n.a, n.b, len);
      double worst = kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        worst = std::min(worst, robustness(n.children[0], sig, kp));
      }
      return worst;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak ? kInf : -kInf;
      return robustness(n.children[0], sig, k - 1);
  }
  return -kInf;
}

double time_to_violation(const Formula& f, const SignalView& sig, int k) {
  const auto& n = f.node();
  const int len = sig.length();
  switch (n.kind) {
    case FormulaKind::kTrue:
      return kInf;
    case FormulaKind::kFalse:
      return static_cast<double>(k);
    case FormulaKind::kPredicate: {
      const bool v = n.negated ? !sig.eval(n.pred_id, k) : sig.eval(n.pred_id, k);
      return v ? kInf : static_cast<double>(k);
    }
    case FormulaKind::kNot:
      // Negation is handled by pushing it inward, per the NNF convention.
      return time_to_violation(nnf_neg(n.children[0]), sig, k);
    case FormulaKind::kAnd: {
      double tv = kInf;
      for (const Formula& c : n.children) tv = std::min(tv, time_to_violation(c, sig, k));
      return tv;
    }
    case FormulaKind::kOr: {
      double tv = -kInf;
      for (const Formula& c : n.children) tv = std::max(tv, time_to_violation(c, sig, k));
      return tv;
    }
    case FormulaKind::kUntil: {
      const Window w = future_window(k, n.a, n.b, len);
      if (w.empty()) return static_cast<double>(k);
      double best = -kInf;
      double lhs_min = kInf;
      for (int tau = k; tau < w.lo; ++tau) {
        lhs_min = std::min(lhs_min, time_to_violation(n.children[0], sig, tau));
      }
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        lhs_min = std::min(lhs_min, time_to_violation(n.children[0], sig, kp));
        best = std::max(best, std::min(time_to_violation(n.children[1], sig, kp), lhs_min));
      }
      return best;
    }
    case FormulaKind::kRelease: {
      const Window w = future_window(k, n.a, n.b, len);
      double worst = kInf;
      double lhs_max = -kInf;
      for (int tau = k; tau < w.lo; ++tau) {
        lhs_max = std::max(lhs_max, time_to_violation(n.children[0], sig, tau));
      }
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        lhs_max = std::max(lhs_max, time_to_violation(n.children[0], sig, kp));
        worst = std::min(worst, std::max(time_to_violation(n.children[1], sig, kp), lhs_max));
      }
      return worst;
    }
    case FormulaKind::kSince: {
      const Window w = past_window(k, n.a, n.b, len);
      if (w.empty()) return static_cast<double>(k);
      double best = -kInf;
      double lhs_min = kInf;
      for (int tau = k; tau > w.hi; --tau) {
        lhs_min = std::min(lhs_min, time_to_violation(n.children[0], sig, tau));
      }
      for (int kp = w.hi; kp >= w.lo; --kp) {
        lhs_min = std::min(lhs_min, time_to_violation(n.children[0], sig, kp));
        best = std::max(best, std::min(time_to_violation(n.children[1], sig, kp), lhs_min));
      }
      return best;
    }
    case FormulaKind::kTrigger: {
      const Window w = past_window(k, n.a, n.b, len);
      double worst = kInf;
      double lhs_max = -kInf;
      for (int tau = k; tau > w.hi; --tau) {
        lhs_max = std::max(lhs_max, time_to_violation(n.children[0], sig, tau));
      }
      for (int kp = w.hi; kp >= w.lo; --kp) {
        lhs_max = std::max(lhs_max, time_to_violation(n.children[0], sig, kp));
        worst = std::min(worst, std::max(time_to_violation(n.children[1], sig, kp), lhs_max));
      }
      return worst;
    }
    case FormulaKind::kEventually: {
      const Window w = future_window(k, n.a, n.b, len);
      if (w.empty()) return static_cast<double>(k);
      double best = -kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        best = std::max(best, time_to_violation(n.children[0], sig, kp));
      }
      return best;
    }
    case FormulaKind::kGlobally: {
      const Window w = future_window(k, n.a, n.b, len);
      double worst = kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        worst = std::min(worst, time_to_violation(n.children[0], sig, kp));
      }
      return worst;
    }
    case FormulaKind::kOnce: {
      const Window w = past_window(k, n.a, n.b, len);
      if (w.empty()) return static_cast<double>(k);
      double best = -kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        best = std::max(best, time_to_violation(n.children[0], sig, kp));
      }
      return best;
    }
    case FormulaKind::kHistorically: {
      const Window w = past_window(k, n.a, n.b, len);
      double worst = kInf;
      for (int kp = w.lo; kp <= w.hi; ++kp) {
        worst = std::min(worst, time_to_violation(n.children[0], sig, kp));
      }
      return worst;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak ? kInf : static_cast<double>(k);
      return time_to_violation(n.children[0], sig, k - 1);
  }
  return -kInf;
}

// ---------------------------------------------------------------------------
// Parser and printer

ParseError::ParseError(std::size_t position, std::string expected_)
    : position(position), expected(std::move(expected_)) {
  std::ostringstream os;
  os << "parse error at " << position << ": expected " << expected;
  message = os.str();
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, double dt, const std::map<std::string, double>& params)
      : text_(text), dt_(dt), params_(params) {}

  Formula parse_all() {
    Formula f = parse_implication();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(pos_, "end of input");
    return f;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_str(const char* s) {
    skip_ws();
    const std::size_t n = std::string_view(s).size();
    if (text_.compare(pos_, n, s) == 0) {
      pos_ += n;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!accept(c)) throw ParseError(pos_, what);
  }

  // implication := until ( '=>' implication )?   right associative
  Formula parse_implication() {
    Formula lhs = parse_until();
    if (accept_str("=>")) {
      Formula rhs = parse_implication();
      return f_implies(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  // until := disjunction ( ('U'|'S'|'R'|'T') interval? disjunction )*
  Formula parse_until() {
    Formula lhs = parse_disjunction();
    for (;;) {
      skip_ws();
      FormulaKind kind;
      if (match_op('U')) {
        kind = FormulaKind::kUntil;
      } else if (match_op('S')) {
        kind = FormulaKind::kSince;
      } else if (match_op('R')) {
        kind = FormulaKind::kRelease;
      } else if (match_op('T')) {
        kind = FormulaKind::kTrigger;
      } else {
        return lhs;
      }
      auto [a, b] = parse_optional_interval();
      Formula rhs = parse_disjunction();
      lhs = binary_temporal(kind, std::move(lhs), std::move(rhs), a, b);
    }
  }

  Formula parse_disjunction() {
    std::vector<Formula> parts;
    parts.push_back(parse_conjunction());
    while (accept('|')) parts.push_back(parse_conjunction());
    return f_or(std::move(parts));
  }

  Formula parse_conjunction() {
    std::vector<Formula> parts;
    parts.push_back(parse_unary());
    while (accept('&')) parts.push_back(parse_unary());
    return f_and(std::move(parts));
  }

  Formula parse_unary() {
    if (accept('!')) return f_not(parse_unary());
    return parse_temporal();
  }

  // temporal prefix operators take a parenthesized argument
  Formula parse_temporal() {
    skip_ws();
    if (pos_ < text_.size() && std::isupper(static_cast<unsigned char>(text_[pos_]))) {
      const char op = text_[pos_];
      if (op == 'G' || op == 'F' || op == 'O' || op == 'H' || op == 'P' || op == 'W') {
        ++pos_;
        auto [a, b] = parse_optional_interval();
        expect('(', "'(' after temporal operator");
        Formula body = parse_implication();
        expect(')', "')'");
        switch (op) {
          case 'G':
            return f_globally(std::move(body), a, b);
          case 'F':
            return f_eventually(std::move(body), a, b);
          case 'O':
            return f_once(std::move(body), a, b);
          case 'H':
            return f_historically(std::move(body), a, b);
          case 'P':
            return f_previous(std::move(body), false);
          default:
            return f_previous(std::move(body), true);
        }
      }
      throw ParseError(pos_, "temporal operator");
    }
    return parse_atom();
  }

  Formula parse_atom() {
    skip_ws();
    if (accept('(')) {
      Formula f = parse_implication();
      expect(')', "')'");
      return f;
    }
    if (pos_ >= text_.size()) throw ParseError(pos_, "formula");
    const char c = text_[pos_];
    if (c == 't' && accept_str("true")) return f_true();
    if (c == 'f' && accept_str("false")) return f_false();
    if (std::islower(static_cast<unsigned char>(c)) || c == '_') {
      return f_pred(parse_ident());
    }
    throw ParseError(pos_, "predicate, 'true', 'false', or '('");
  }

  std::string parse_ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) throw ParseError(pos_, "identifier");
    return text_.substr(start, pos_ - start);
  }

  // binary temporal operator letter, not the start of an identifier
  bool match_op(char op) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == op) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::pair<int, int> parse_optional_interval() {
    if (!accept('[')) return {0, kUnboundedStep};
    const int a = parse_bound();
    expect(',', "','");
    const int b = parse_bound();
    expect(']', "']'");
    if (a < 0 || (b != kUnboundedStep && b < a)) throw ParseError(pos_, "interval with 0 <= a <= b");
    return {a, b};
  }

  int parse_bound() {
    skip_ws();
    if (pos_ < text_.size() &&
        (std::islower(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      const std::size_t at = pos_;
      const std::string id = parse_ident();
      if (id == "inf") return kUnboundedStep;
      const auto it = params_.find(id);
      if (it == params_.end()) throw ParseError(at, "known parameter name");
      return seconds_to_steps(it->second);
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) throw ParseError(start, "number");
    return seconds_to_steps(std::stod(text_.substr(start, pos_ - start)));
  }

  // rounds t/dt to nearest step, ties up
  int seconds_to_steps(double t) const {
    return static_cast<int>(std::floor(t / dt_ + 0.5));
  }

  const std::string& text_;
  double dt_;
  const std::map<std::string, double>& params_;
  std::size_t pos_ = 0;
};

std::string interval_text(int a, int b) {
  if (a == 0 && b == kUnboundedStep) return "";
  std::ostringstream os;
  os << "[" << a << ",";
  if (b == kUnboundedStep) {
    os << "inf";
  } else {
    os << b;
  }
  os << "]";
  return os.str();
}

void print_into(const Formula& f, std::ostream& os) {
  const auto& n = f.node();
  switch (n.kind) {
    case FormulaKind::kTrue:
      os << "true";
      return;
    case FormulaKind::kFalse:
      os << "false";
      return;
    case FormulaKind::kPredicate:
      if (n.negated) os << "!";
      os << n.pred_id;
      return;
    case FormulaKind::kNot:
      os << "!";
      if (n.children[0].kind() == FormulaKind::kPredicate && !n.children[0].node().negated) {
        print_into(n.children[0], os);
      } else {
        os << "(";
        print_into(n.children[0], os);
        os << ")";
      }
      return;
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      os << "(";
      const char* sep = n.kind == FormulaKind::kAnd ? " & " : " | ";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) os << sep;
        print_into(n.children[i], os);
      }
      os << ")";
      return;
    }
    case FormulaKind::kUntil:
    case FormulaKind::kSince:
    case FormulaKind::kRelease:
    case FormulaKind::kTrigger: {
      const char op = n.kind == FormulaKind::kUntil    ? 'U'
                      : n.kind == FormulaKind::kSince  ? 'S'
                      : n.kind == FormulaKind::kRelease ? 'R'
                                                        : 'T';
      os << "(";
      print_into(n.children[0], os);
      os << " " << op << interval_text(n.a, n.b) << " ";
      print_into(n.children[1], os);
      os << ")";
      return;
    }
    case FormulaKind::kEventually:
    case FormulaKind::kGlobally:
    case FormulaKind::kOnce:
    case FormulaKind::kHistorically: {
      const char op = n.kind == FormulaKind::kEventually ? 'F'
                      : n.kind == FormulaKind::kGlobally ? 'G'
                      : n.kind == FormulaKind::kOnce     ? 'O'
                                                         : 'H';
      os << op << interval_text(n.a, n.b) << "(";
      print_into(n.children[0], os);
      os << ")";
      return;
    }
    case FormulaKind::kPrevious:
      os << (n.weak ? "W(" : "P(");
      print_into(n.children[0], os);
      os << ")";
      return;
  }
}

}  // namespace

Formula parse(const std::string& text, double dt, const std::map<std::string, double>& params) {
  return Parser(text, dt, params).parse_all();
}

std::string print(const Formula& f) {
  std::ostringstream os;
  print_into(f, os);
  return os.str();
}

ConjoinedRules conjoin_rules(const std::vector<std::pair<std::string, Formula>>& rules) {
  if (rules.empty()) throw std::invalid_argument("conjoin_rules: empty rule list");
  ConjoinedRules out;
  std::vector<Formula> parts;
  for (const auto& [name, f] : rules) {
    out.names.push_back(name);
    parts.push_back(f);
  }
  out.formula = f_and(std::move(parts));
  return out;
}

std::vector<RuleTv> per_rule_tv(const std::vector<std::pair<std::string, Formula>>& rules,
                                const SignalView& sig, int k) {
  std::vector<RuleTv> out;
  out.reserve(rules.size());
  for (const auto& [name, f] : rules) {
    out.push_back({name, time_to_violation(f, sig, k)});
  }
  return out;
}

}  // namespace rulerepair
