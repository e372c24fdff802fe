#include "rulerepair/abstraction.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace rulerepair {

namespace {

bool is_unbounded(const Formula::Node& n) { return n.a == 0 && n.b == kUnboundedStep; }

bool in_nnf(const Formula& f) {
  if (f.kind() == FormulaKind::kNot) return false;
  for (const Formula& c : f.children()) {
    if (!in_nnf(c)) return false;
  }
  return true;
}

// Exact rewrites applied everywhere: G and H distribute over conjunction.
Formula distribute_exact(const Formula& f) {
  const auto& n = f.node();
  std::vector<Formula> cs;
  cs.reserve(n.children.size());
  for (const Formula& c : n.children) cs.push_back(distribute_exact(c));

  if ((n.kind == FormulaKind::kGlobally || n.kind == FormulaKind::kHistorically) &&
      cs.size() == 1 && cs[0].kind() == FormulaKind::kAnd) {
    std::vector<Formula> parts;
    for (const Formula& inner : cs[0].children()) {
      parts.push_back(n.kind == FormulaKind::kGlobally ? f_globally(inner, n.a, n.b)
                                                       : f_historically(inner, n.a, n.b));
    }
    return distribute_exact(f_and(std::move(parts)));
  }

  Formula::Node out = n;
  out.children = std::move(cs);
  return Formula(std::make_shared<const Formula::Node>(std::move(out)));
}

struct DistContext {
  std::vector<DecompositionStep>* steps;
};

// Pushes an unbounded G over the Boolean structure of its body.
Formula distribute_globally(const Formula& body, DistContext& ctx) {
  const auto& n = body.node();
  switch (n.kind) {
    case FormulaKind::kAnd: {
      std::vector<Formula> parts;
      for (const Formula& c : n.children) parts.push_back(distribute_globally(c, ctx));
      ctx.steps->push_back({"G distributed over conjunction", RewriteTag::kExact});
      return f_and(std::move(parts));
    }
    case FormulaKind::kOr: {
      std::vector<Formula> parts;
      for (const Formula& c : n.children) parts.push_back(distribute_globally(c, ctx));
      ctx.steps->push_back({"G distributed over disjunction", RewriteTag::kStrengthening});
      return f_or(std::move(parts));
    }
    case FormulaKind::kGlobally:
      if (is_unbounded(n)) {
        // G(G(x)) collapses to G(x)
        return distribute_globally(n.children[0], ctx);
      }
      return f_globally(body);
    default:
      return f_globally(body);
  }
}

Formula nary_kind(FormulaKind kind, std::vector<Formula> parts) {
  return kind == FormulaKind::kAnd ? f_and(std::move(parts)) : f_or(std::move(parts));
}

Formula decompose_tree(const Formula& f, DistContext& ctx) {
  const auto& n = f.node();
  switch (n.kind) {
    case FormulaKind::kAnd:
    case FormulaKind::kOr: {
      std::vector<Formula> parts;
      for (const Formula& c : n.children) parts.push_back(decompose_tree(c, ctx));
      return nary_kind(n.kind, std::move(parts));
    }
    case FormulaKind::kGlobally:
      if (is_unbounded(n)) return distribute_globally(n.children[0], ctx);
      return f;
    default:
      return f;
  }
}

}  // namespace

Decomposition decompose(const Formula& nnf_formula) {
  if (!in_nnf(nnf_formula)) throw NotInNNF();
  Decomposition out;
  DistContext ctx{&out.steps};
  out.formula = decompose_tree(distribute_exact(nnf_formula), ctx);
  return out;
}

// ---------------------------------------------------------------------------
// Selective substitution + Tseitin

namespace {

bool is_boolean_connective(const Formula& f) {
  return f.kind() == FormulaKind::kAnd || f.kind() == FormulaKind::kOr;
}

void scan_predicates(const Formula& f, bool under_past, bool* any_future,
                     std::set<std::string>* future_preds, std::set<std::string>* all_preds) {
  const auto& n = f.node();
  const bool past_op = n.kind == FormulaKind::kSince || n.kind == FormulaKind::kTrigger ||
                       n.kind == FormulaKind::kOnce || n.kind == FormulaKind::kHistorically ||
                       n.kind == FormulaKind::kPrevious;
  if (n.kind == FormulaKind::kPredicate) {
    all_preds->insert(n.pred_id);
    if (!under_past) {
      *any_future = true;
      future_preds->insert(n.pred_id);
    }
    return;
  }
  for (const Formula& c : n.children) {
    scan_predicates(c, under_past || past_op, any_future, future_preds, all_preds);
  }
}

struct LeafTable {
  std::vector<Proposition> props;
  std::unordered_map<std::size_t, std::vector<int>> by_hash;  // hash -> indices

  int intern(const Formula& leaf, const PredicateCatalog* catalog, const std::string& rule) {
    const std::size_t h = leaf.hash();
    auto& bucket = by_hash[h];
    for (int idx : bucket) {
      if (props[static_cast<std::size_t>(idx) - 1].subformula == leaf) return idx;
    }
    Proposition p;
    p.index = static_cast<int>(props.size()) + 1;
    p.subformula = leaf;
    p.rule = rule;
    bool any_future = false;
    std::set<std::string> future_preds, all_preds;
    scan_predicates(leaf, false, &any_future, &future_preds, &all_preds);
    p.contains_past_only = !any_future;
    p.ego_independent = !all_preds.empty();
    for (const std::string& id : all_preds) {
      const bool indep =
          catalog != nullptr && catalog->contains(id) && catalog->def(id).ego_independent;
      p.ego_independent = p.ego_independent && indep;
    }
    const auto& source = future_preds.empty() ? all_preds : future_preds;
    for (const std::string& id : source) {
      if (catalog != nullptr && catalog->contains(id)) {
        p.predicate_categories.insert(catalog->def(id).category);
      } else {
        p.predicate_categories.insert(PredicateCategory::kUncategorized);
      }
    }
    props.push_back(p);
    bucket.push_back(p.index);
    return p.index;
  }
};

struct TseitinState {
  LeafTable leaves;
  std::vector<Clause> clauses;
  std::set<int> aux;
  int next_var = 1;
  const PredicateCatalog* catalog = nullptr;
  std::string current_rule;

  int fresh_aux() {
    const int v = next_var++;
    aux.insert(v);
    return v;
  }

  // Returns the literal equivalent to the subtree (full Tseitin encoding).
  int encode(const Formula& f) {
    if (!is_boolean_connective(f)) return leaf_var(f);
    const bool conj = f.kind() == FormulaKind::kAnd;
    std::vector<int> lits;
    lits.reserve(f.children().size());
    for (const Formula& c : f.children()) lits.push_back(encode(c));
    const int v = fresh_aux();
    if (conj) {
      Clause back;
      back.push_back(v);
      for (int l : lits) {
        clauses.push_back({-v, l});
        back.push_back(-l);
      }
      clauses.push_back(back);
    } else {
      Clause fwd;
      fwd.push_back(-v);
      for (int l : lits) {
        fwd.push_back(l);
        clauses.push_back({v, -l});
      }
      clauses.push_back(fwd);
    }
    return v;
  }

  int leaf_var(const Formula& f) {
    const int idx = leaves.intern(f, catalog, current_rule);
    next_var = std::max(next_var, static_cast<int>(leaves.props.size()) + 1);
    return idx;
  }

  void assert_top(const Formula& f) {
    // flatten conjunctions into clauses; disjunctions of leaves become one
    // clause; anything deeper goes through auxiliary variables
    if (f.kind() == FormulaKind::kAnd) {
      for (const Formula& c : f.children()) assert_top(c);
      return;
    }
    if (f.kind() == FormulaKind::kOr) {
      bool flat = true;
      for (const Formula& c : f.children()) flat = flat && !is_boolean_connective(c);
      Clause cl;
      for (const Formula& c : f.children()) {
        cl.push_back(flat ? leaf_var(c) : encode(c));
      }
      clauses.push_back(std::move(cl));
      return;
    }
    clauses.push_back({leaf_var(f)});
  }
};

AbstractionResult run_tseitin(const std::vector<std::pair<std::string, Formula>>& conjunct_list,
                              const PredicateCatalog* catalog) {
  TseitinState st;
  st.catalog = catalog;

  // leaves first so proposition indices are dense and aux variables follow
  std::vector<std::pair<Formula, std::string>> conjuncts;
  for (const auto& [rule, f] : conjunct_list) conjuncts.emplace_back(f, rule);

  const std::function<void(const Formula&)> collect = [&](const Formula& f) {
    if (is_boolean_connective(f)) {
      for (const Formula& c : f.children()) collect(c);
      return;
    }
    st.leaf_var(f);
  };
  for (const auto& [f, rule] : conjuncts) {
    st.current_rule = rule;
    collect(f);
  }
  st.next_var = static_cast<int>(st.leaves.props.size()) + 1;

  for (const auto& [f, rule] : conjuncts) {
    st.current_rule = rule;
    st.assert_top(f);
  }

  AbstractionResult out;
  out.cnf = std::move(st.clauses);
  out.propositions = std::move(st.leaves.props);
  out.tseitin_aux = std::move(st.aux);
  return out;
}

}  // namespace

int AbstractionResult::num_variables() const {
  int n = static_cast<int>(propositions.size());
  for (int v : tseitin_aux) n = std::max(n, v);
  return n;
}

std::vector<Clause> AbstractionResult::all_clauses() const {
  std::vector<Clause> cs = cnf;
  cs.insert(cs.end(), learned_conflicts.begin(), learned_conflicts.end());
  return cs;
}

AbstractionResult to_cnf(const Formula& decomposed, const PredicateCatalog* catalog) {
  return run_tseitin({{"", decomposed}}, catalog);
}

AbstractionResult to_cnf_with_rules(
    const std::vector<std::pair<std::string, Formula>>& decomposed_rules,
    const PredicateCatalog* catalog) {
  return run_tseitin(decomposed_rules, catalog);
}

bool PartialValuation::assigned(int index) const {
  for (const auto& [i, v] : assignments) {
    if (i == index) return true;
  }
  return false;
}

bool PartialValuation::value(int index) const {
  for (const auto& [i, v] : assignments) {
    if (i == index) return v;
  }
  return false;
}

std::string PartialValuation::to_string() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (i) os << ", ";
    os << "s" << assignments[i].first << "=" << (assignments[i].second ? "T" : "F");
  }
  os << "}";
  return os.str();
}

AbstractionResult add_conflict(AbstractionResult ar, const PartialValuation& valuation) {
  Clause cl;
  for (const auto& [idx, val] : valuation.assignments) {
    cl.push_back(val ? -idx : idx);
  }
  if (!cl.empty()) ar.learned_conflicts.push_back(std::move(cl));
  return ar;
}

}  // namespace rulerepair
