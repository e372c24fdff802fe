// Independent reference implementations used only by tests: brute-force
// discrete STL semantics, a truth-table SAT oracle, and random generators.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rulerepair/stl.hpp"

namespace oracle {

using rulerepair::Formula;
using rulerepair::FormulaKind;

constexpr double kInf = std::numeric_limits<double>::infinity();

// equality that treats equal infinities as equal
inline bool value_equal(double a, double b, double tol = 1e-9) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// signal as a plain robustness table: sig[pred][k], truth = value > 0
using Table = std::vector<std::vector<double>>;

inline int pred_index(const std::string& id) { return std::stoi(id.substr(1)); }

inline double table_rob(const Table& sig, const std::string& id, int k) {
  return sig[static_cast<std::size_t>(pred_index(id))][static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Boolean satisfaction, written directly from the quantifier semantics.

inline bool bf_eval(const Formula& f, const Table& sig, int k);

inline bool bf_eval(const Formula& f, const Table& sig, int k) {
  const auto& n = f.node();
  const int h = static_cast<int>(sig.front().size()) - 1;
  switch (n.kind) {
    case FormulaKind::kTrue:
      return true;
    case FormulaKind::kFalse:
      return false;
    case FormulaKind::kPredicate: {
      const bool v = table_rob(sig, n.pred_id, k) > 0.0;
      return n.negated ? !v : v;
    }
    case FormulaKind::kNot:
      return !bf_eval(n.children[0], sig, k);
    case FormulaKind::kAnd: {
      bool all = true;
      for (const auto& c : n.children) all = all && bf_eval(c, sig, k);
      return all;
    }
    case FormulaKind::kOr: {
      bool any = false;
      for (const auto& c : n.children) any = any || bf_eval(c, sig, k);
      return any;
    }
    case FormulaKind::kUntil: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        bool lhs = true;
        for (long long tau = k; tau <= kp; ++tau) {
          lhs = lhs && bf_eval(n.children[0], sig, static_cast<int>(tau));
        }
        if (lhs && bf_eval(n.children[1], sig, static_cast<int>(kp))) return true;
      }
      return false;
    }
    case FormulaKind::kRelease: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        bool lhs = false;
        for (long long tau = k; tau <= kp; ++tau) {
          lhs = lhs || bf_eval(n.children[0], sig, static_cast<int>(tau));
        }
        if (!lhs && !bf_eval(n.children[1], sig, static_cast<int>(kp))) return false;
      }
      return true;
    }
    case FormulaKind::kSince: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        bool lhs = true;
        for (long long tau = kp; tau <= k; ++tau) {
          lhs = lhs && bf_eval(n.children[0], sig, static_cast<int>(tau));
        }
        if (lhs && bf_eval(n.children[1], sig, static_cast<int>(kp))) return true;
      }
      return false;
    }
    case FormulaKind::kTrigger: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        bool lhs = false;
        for (long long tau = kp; tau <= k; ++tau) {
          lhs = lhs || bf_eval(n.children[0], sig, static_cast<int>(tau));
        }
        if (!lhs && !bf_eval(n.children[1], sig, static_cast<int>(kp))) return false;
      }
      return true;
    }
    case FormulaKind::kEventually: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        if (bf_eval(n.children[0], sig, static_cast<int>(kp))) return true;
      }
      return false;
    }
    case FormulaKind::kGlobally: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        if (!bf_eval(n.children[0], sig, static_cast<int>(kp))) return false;
      }
      return true;
    }
    case FormulaKind::kOnce: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        if (bf_eval(n.children[0], sig, static_cast<int>(kp))) return true;
      }
      return false;
    }
    case FormulaKind::kHistorically: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        if (!bf_eval(n.children[0], sig, static_cast<int>(kp))) return false;
      }
      return true;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak;
      return bf_eval(n.children[0], sig, k - 1);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Robustness, from the max/min recursion.

inline double bf_rob(const Formula& f, const Table& sig, int k) {
  const auto& n = f.node();
  const int h = static_cast<int>(sig.front().size()) - 1;
  switch (n.kind) {
    case FormulaKind::kTrue:
      return kInf;
    case FormulaKind::kFalse:
      return -kInf;
    case FormulaKind::kPredicate: {
      const double r = table_rob(sig, n.pred_id, k);
      return n.negated ? -r : r;
    }
    case FormulaKind::kNot:
      return -bf_rob(n.children[0], sig, k);
    case FormulaKind::kAnd: {
      double r = kInf;
      for (const auto& c : n.children) r = std::min(r, bf_rob(c, sig, k));
      return r;
    }
    case FormulaKind::kOr: {
      double r = -kInf;
      for (const auto& c : n.children) r = std::max(r, bf_rob(c, sig, k));
      return r;
    }
    case FormulaKind::kUntil: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double best = -kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        double v = bf_rob(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = k; tau <= kp; ++tau) {
          v = std::min(v, bf_rob(n.children[0], sig, static_cast<int>(tau)));
        }
        best = std::max(best, v);
      }
      return best;
    }
    case FormulaKind::kRelease: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double worst = kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        double v = bf_rob(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = k; tau <= kp; ++tau) {
          v = std::max(v, bf_rob(n.children[0], sig, static_cast<int>(tau)));
        }
        worst = std::min(worst, v);
      }
      return worst;
    }
    case FormulaKind::kSince: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double best = -kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        double v = bf_rob(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = kp; tau <= k; ++tau) {
          v = std::min(v, bf_rob(n.children[0], sig, static_cast<int>(tau)));
        }
        best = std::max(best, v);
      }
      return best;
    }
    case FormulaKind::kTrigger: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double worst = kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        double v = bf_rob(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = kp; tau <= k; ++tau) {
          v = std::max(v, bf_rob(n.children[0], sig, static_cast<int>(tau)));
        }
        worst = std::min(worst, v);
      }
      return worst;
    }
    case FormulaKind::kEventually: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double best = -kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        best = std::max(best, bf_rob(n.children[0], sig, static_cast<int>(kp)));
      }
      return best;
    }
    case FormulaKind::kGlobally: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double worst = kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        worst = std::min(worst, bf_rob(n.children[0], sig, static_cast<int>(kp)));
      }
      return worst;
    }
    case FormulaKind::kOnce: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double best = -kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        best = std::max(best, bf_rob(n.children[0], sig, static_cast<int>(kp)));
      }
      return best;
    }
    case FormulaKind::kHistorically: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double worst = kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        worst = std::min(worst, bf_rob(n.children[0], sig, static_cast<int>(kp)));
      }
      return worst;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak ? kInf : -kInf;
      return bf_rob(n.children[0], sig, k - 1);
  }
  return -kInf;
}

// ---------------------------------------------------------------------------
// Time-to-violation, from the violation-time recursion: predicate case gives
// the step, disjunction the max, conjunction the min, windows as above.

inline double bf_tv(const Formula& f, const Table& sig, int k) {
  const auto& n = f.node();
  const int h = static_cast<int>(sig.front().size()) - 1;
  switch (n.kind) {
    case FormulaKind::kTrue:
      return kInf;
    case FormulaKind::kFalse:
      return k;
    case FormulaKind::kPredicate: {
      const bool v = n.negated ? !(table_rob(sig, n.pred_id, k) > 0.0)
                               : table_rob(sig, n.pred_id, k) > 0.0;
      return v ? kInf : k;
    }
    case FormulaKind::kNot:
      return bf_tv(rulerepair::to_nnf(f), sig, k);
    case FormulaKind::kAnd: {
      double tv = kInf;
      for (const auto& c : n.children) tv = std::min(tv, bf_tv(c, sig, k));
      return tv;
    }
    case FormulaKind::kOr: {
      double tv = -kInf;
      for (const auto& c : n.children) tv = std::max(tv, bf_tv(c, sig, k));
      return tv;
    }
    case FormulaKind::kUntil: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      if (k + n.a > hi) return k;
      double best = -kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        double v = bf_tv(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = k; tau <= kp; ++tau) {
          v = std::min(v, bf_tv(n.children[0], sig, static_cast<int>(tau)));
        }
        best = std::max(best, v);
      }
      return best;
    }
    case FormulaKind::kRelease: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double worst = kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        double v = bf_tv(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = k; tau <= kp; ++tau) {
          v = std::max(v, bf_tv(n.children[0], sig, static_cast<int>(tau)));
        }
        worst = std::min(worst, v);
      }
      return worst;
    }
    case FormulaKind::kSince: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      if (lo > k - n.a) return k;
      double best = -kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        double v = bf_tv(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = kp; tau <= k; ++tau) {
          v = std::min(v, bf_tv(n.children[0], sig, static_cast<int>(tau)));
        }
        best = std::max(best, v);
      }
      return best;
    }
    case FormulaKind::kTrigger: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double worst = kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        double v = bf_tv(n.children[1], sig, static_cast<int>(kp));
        for (long long tau = kp; tau <= k; ++tau) {
          v = std::max(v, bf_tv(n.children[0], sig, static_cast<int>(tau)));
        }
        worst = std::min(worst, v);
      }
      return worst;
    }
    case FormulaKind::kEventually: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      if (k + n.a > hi) return k;
      double best = -kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        best = std::max(best, bf_tv(n.children[0], sig, static_cast<int>(kp)));
      }
      return best;
    }
    case FormulaKind::kGlobally: {
      const long long hi = std::min<long long>(static_cast<long long>(k) + n.b, h);
      double worst = kInf;
      for (long long kp = k + n.a; kp <= hi; ++kp) {
        worst = std::min(worst, bf_tv(n.children[0], sig, static_cast<int>(kp)));
      }
      return worst;
    }
    case FormulaKind::kOnce: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      if (lo > k - n.a) return k;
      double best = -kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        best = std::max(best, bf_tv(n.children[0], sig, static_cast<int>(kp)));
      }
      return best;
    }
    case FormulaKind::kHistorically: {
      const long long lo = std::max<long long>(static_cast<long long>(k) - n.b, 0);
      double worst = kInf;
      for (long long kp = lo; kp <= k - n.a; ++kp) {
        worst = std::min(worst, bf_tv(n.children[0], sig, static_cast<int>(kp)));
      }
      return worst;
    }
    case FormulaKind::kPrevious:
      if (k == 0) return n.weak ? kInf : k;
      return bf_tv(n.children[0], sig, k - 1);
  }
  return -kInf;
}

// ---------------------------------------------------------------------------
// Random formulas and signals

struct FormulaGen {
  std::mt19937_64 rng;
  int n_preds = 4;
  int max_window = 6;
  bool with_not = true;

  explicit FormulaGen(std::uint64_t seed) : rng(seed) {}

  int pick(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

  Formula gen(int depth) {
    using namespace rulerepair;
    if (depth <= 0) {
      const int r = pick(10);
      if (r == 9) return pick(2) ? f_true() : f_false();
      return f_pred("p" + std::to_string(pick(n_preds)), pick(2) == 1);
    }
    const int a = pick(max_window);
    const int b = a + pick(max_window);
    switch (pick(with_not ? 11 : 10)) {
      case 0:
        return f_and({gen(depth - 1), gen(depth - 1)});
      case 1:
        return f_or({gen(depth - 1), gen(depth - 1)});
      case 2:
        return f_until(gen(depth - 1), gen(depth - 1), a, b);
      case 3:
        return f_since(gen(depth - 1), gen(depth - 1), a, b);
      case 4:
        return f_eventually(gen(depth - 1), a, b);
      case 5:
        return f_globally(gen(depth - 1), a, b);
      case 6:
        return f_once(gen(depth - 1), a, b);
      case 7:
        return f_historically(gen(depth - 1), a, b);
      case 8:
        return f_previous(gen(depth - 1), pick(2) == 1);
      case 9:
        return pick(2) ? f_globally(gen(depth - 1)) : f_eventually(gen(depth - 1));
      default:
        return f_not(gen(depth - 1));
    }
  }

  Table gen_signal(int length, double min_mag = 0.01) {
    Table sig(static_cast<std::size_t>(n_preds));
    std::uniform_real_distribution<double> mag(min_mag, 1.0);
    for (auto& row : sig) {
      row.resize(static_cast<std::size_t>(length));
      for (auto& v : row) v = (pick(2) ? 1.0 : -1.0) * mag(rng);
    }
    return sig;
  }
};

// adapter: Table as the engine's SignalView
class TableView : public rulerepair::SignalView {
 public:
  explicit TableView(const Table& t) : t_(t) {}
  int length() const override { return static_cast<int>(t_.front().size()); }
  bool eval(const std::string& id, int k) const override { return table_rob(t_, id, k) > 0.0; }
  double rob(const std::string& id, int k) const override { return table_rob(t_, id, k); }

 private:
  const Table& t_;
};

// ---------------------------------------------------------------------------
// Truth-table SAT oracle (bit-parallel over 64 assignments per word)

struct CnfInstance {
  int n_vars = 0;
  std::vector<std::vector<int>> clauses;
};

inline bool tt_satisfiable(const CnfInstance& inst, std::vector<bool>* model = nullptr) {
  const int n = inst.n_vars;
  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t base = 0; base < total; base += 64) {
    std::uint64_t alive = ~0ULL;
    if (total - base < 64) alive = (1ULL << (total - base)) - 1;
    for (const auto& cl : inst.clauses) {
      std::uint64_t sat = 0;
      for (int lit : cl) {
        const int var = std::abs(lit) - 1;
        std::uint64_t pattern;
        if (var < 6) {
          static constexpr std::uint64_t kPatterns[6] = {
              0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
              0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
          pattern = kPatterns[var];
        } else {
          pattern = ((base >> var) & 1) ? ~0ULL : 0ULL;
        }
        sat |= lit > 0 ? pattern : ~pattern;
      }
      alive &= sat;
      if (alive == 0) break;
    }
    if (alive != 0) {
      if (model != nullptr) {
        const int offset = __builtin_ctzll(alive);
        const std::uint64_t assignment = base + static_cast<std::uint64_t>(offset);
        model->assign(static_cast<std::size_t>(n), false);
        for (int v = 0; v < n; ++v) (*model)[static_cast<std::size_t>(v)] = (assignment >> v) & 1;
      }
      return true;
    }
  }
  return false;
}

inline CnfInstance random_cnf(std::mt19937_64& rng, int max_vars = 15, int max_clauses = 60) {
  CnfInstance inst;
  inst.n_vars = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_vars));
  const int n_clauses = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_clauses));
  for (int c = 0; c < n_clauses; ++c) {
    const int len = 1 + static_cast<int>(rng() % 4);
    std::vector<int> cl;
    for (int i = 0; i < len; ++i) {
      const int var = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(inst.n_vars));
      cl.push_back((rng() % 2) ? var : -var);
    }
    inst.clauses.push_back(cl);
  }
  return inst;
}

}  // namespace oracle
