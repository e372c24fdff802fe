#include "rulerepair/reach.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rulerepair {

namespace {

constexpr double kEps = 1e-9;
constexpr double kHuge = 1e18;

double profile_max_over(const PiecewiseProfile& p, double lo, double hi) {
  if (p.pieces.empty()) return 0.0;
  double m = p.at(lo);
  for (const auto& [s, v] : p.pieces) {
    if (s >= lo && s <= hi) m = std::max(m, v);
  }
  m = std::max(m, p.at(hi));
  return m;
}

double profile_min_over(const PiecewiseProfile& p, double lo, double hi) {
  if (p.pieces.empty()) return 0.0;
  double m = p.at(lo);
  for (const auto& [s, v] : p.pieces) {
    if (s >= lo && s <= hi) m = std::min(m, v);
  }
  m = std::min(m, p.at(hi));
  return m;
}

// One-step forward image under the double-integrator abstraction of the
// longitudinal chain. The acceleration interval is inflated so the image
// stays an overapproximation of the exact fourth-order step.
Cell forward_image(const Cell& c, const Scenario& sc) {
  const double dt = sc.dt;
  const double eta = sc.input_bounds.u_long.hi * dt * dt / 12.0;
  const double a_lo = sc.state_bounds.s_ddot.lo - eta;
  const double a_hi = sc.state_bounds.s_ddot.hi + eta;
  const double dd_lo = sc.state_bounds.d_dot.lo;
  const double dd_hi = sc.state_bounds.d_dot.hi;

  Cell img;
  img.s_lo = c.s_lo + c.sdot_lo * dt + std::min(0.0, a_lo * dt * dt / 2.0);
  img.s_hi = c.s_hi + c.sdot_hi * dt + std::max(0.0, a_hi * dt * dt / 2.0);
  img.sdot_lo = std::max(c.sdot_lo + a_lo * dt, sc.state_bounds.s_dot.lo);
  img.sdot_hi = std::min(c.sdot_hi + a_hi * dt, sc.state_bounds.s_dot.hi);
  img.d_lo = c.d_lo + dd_lo * dt;
  img.d_hi = c.d_hi + dd_hi * dt;
  return img;
}

bool cell_empty(const Cell& c) {
  return c.s_lo > c.s_hi + kEps || c.sdot_lo > c.sdot_hi + kEps || c.d_lo > c.d_hi + kEps;
}

std::optional<Cell> intersect(const Cell& a, const Cell& b) {
  Cell out;
  out.s_lo = std::max(a.s_lo, b.s_lo);
  out.s_hi = std::min(a.s_hi, b.s_hi);
  out.sdot_lo = std::max(a.sdot_lo, b.sdot_lo);
  out.sdot_hi = std::min(a.sdot_hi, b.sdot_hi);
  out.d_lo = std::max(a.d_lo, b.d_lo);
  out.d_hi = std::min(a.d_hi, b.d_hi);
  if (cell_empty(out)) return std::nullopt;
  return out;
}

Cell box_to_cell(const ConstraintBox& b) {
  Cell c;
  c.s_lo = b.s.lo;
  c.s_hi = b.s.hi;
  c.sdot_lo = b.s_dot.lo;
  c.sdot_hi = b.s_dot.hi;
  c.d_lo = b.d.lo;
  c.d_hi = b.d.hi;
  return c;
}

// a \ b, axis-aligned split
std::vector<Cell> subtract(const Cell& a, const Cell& b) {
  const auto overlap = intersect(a, b);
  if (!overlap) return {a};
  std::vector<Cell> out;
  Cell rest = a;
  const auto push = [&out](Cell c) {
    if (!cell_empty(c) && c.volume() > -kEps) out.push_back(c);
  };
  // s dimension
  if (overlap->s_lo > rest.s_lo + kEps) {
    Cell left = rest;
    left.s_hi = overlap->s_lo;
    push(left);
  }
  if (overlap->s_hi < rest.s_hi - kEps) {
    Cell right = rest;
    right.s_lo = overlap->s_hi;
    push(right);
  }
  rest.s_lo = std::max(rest.s_lo, overlap->s_lo);
  rest.s_hi = std::min(rest.s_hi, overlap->s_hi);
  // sdot dimension
  if (overlap->sdot_lo > rest.sdot_lo + kEps) {
    Cell below = rest;
    below.sdot_hi = overlap->sdot_lo;
    push(below);
  }
  if (overlap->sdot_hi < rest.sdot_hi - kEps) {
    Cell above = rest;
    above.sdot_lo = overlap->sdot_hi;
    push(above);
  }
  rest.sdot_lo = std::max(rest.sdot_lo, overlap->sdot_lo);
  rest.sdot_hi = std::min(rest.sdot_hi, overlap->sdot_hi);
  // d dimension
  if (overlap->d_lo > rest.d_lo + kEps) {
    Cell low = rest;
    low.d_hi = overlap->d_lo;
    push(low);
  }
  if (overlap->d_hi < rest.d_hi - kEps) {
    Cell high = rest;
    high.d_lo = overlap->d_hi;
    push(high);
  }
  return out;
}

bool contains_cell(const Cell& outer, const Cell& inner) {
  return outer.s_lo <= inner.s_lo + kEps && outer.s_hi >= inner.s_hi - kEps &&
         outer.sdot_lo <= inner.sdot_lo + kEps && outer.sdot_hi >= inner.sdot_hi - kEps &&
         outer.d_lo <= inner.d_lo + kEps && outer.d_hi >= inner.d_hi - kEps;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// merge cells that agree on two dimensions (to a fraction of the grid
// resolution) and touch in the third
void merge_cells(std::vector<Cell>& cells, const ReachGrid& grid) {
  const double ts = grid.ds * 1e-3;
  const double tv = grid.dsdot * 1e-3;
  const double td = grid.dd * 1e-3;
  // drop contained cells first
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells.size();) {
      if (i != j && contains_cell(cells[i], cells[j])) {
        cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(j));
        if (j < i) --i;
      } else {
        ++j;
      }
    }
  }
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < cells.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < cells.size() && !merged; ++j) {
        Cell& a = cells[i];
        Cell& b = cells[j];
        const bool same_v = near(a.sdot_lo, b.sdot_lo, tv) && near(a.sdot_hi, b.sdot_hi, tv);
        const bool same_d = near(a.d_lo, b.d_lo, td) && near(a.d_hi, b.d_hi, td);
        const bool same_s = near(a.s_lo, b.s_lo, ts) && near(a.s_hi, b.s_hi, ts);
        if (same_v && same_d && a.s_lo <= b.s_hi + ts && b.s_lo <= a.s_hi + ts) {
          a.s_lo = std::min(a.s_lo, b.s_lo);
          a.s_hi = std::max(a.s_hi, b.s_hi);
          cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        } else if (same_v && same_s && a.d_lo <= b.d_hi + td && b.d_lo <= a.d_hi + td) {
          a.d_lo = std::min(a.d_lo, b.d_lo);
          a.d_hi = std::max(a.d_hi, b.d_hi);
          cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        } else if (same_d && same_s && a.sdot_lo <= b.sdot_hi + tv &&
                   b.sdot_lo <= a.sdot_hi + tv) {
          a.sdot_lo = std::min(a.sdot_lo, b.sdot_lo);
          a.sdot_hi = std::max(a.sdot_hi, b.sdot_hi);
          cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }
}

// Projectable core of a proposition in NNF: strip universal temporal layers
// down to a literal or a conjunction of literals.
std::optional<std::vector<const Formula::Node*>> projectable_core(const Formula& f) {
  const auto& n = f.node();
  switch (n.kind) {
    case FormulaKind::kGlobally:
    case FormulaKind::kHistorically:
      return projectable_core(n.children[0]);
    case FormulaKind::kPredicate:
      return std::vector<const Formula::Node*>{&n};
    case FormulaKind::kAnd: {
      std::vector<const Formula::Node*> lits;
      for (const Formula& c : n.children) {
        auto sub = projectable_core(c);
        if (!sub) return std::nullopt;
        lits.insert(lits.end(), sub->begin(), sub->end());
      }
      return lits;
    }
    default:
      return std::nullopt;
  }
}

struct StepConstraint {
  int from_step = 0;
  ConstraintRegion region;   // intersect
  std::string description;
};

}  // namespace

bool ReachSet::contains(int k, double s, double sdot, double d, double tol) const {
  if (k < k_cut || k - k_cut >= steps()) return false;
  for (const Cell& c : at_step(k)) {
    if (c.contains(s, sdot, d, tol)) return true;
  }
  return false;
}

ReachOutcome compute_reach(const Scenario& sc, int k_cut, const Valuation& valuation,
                           const AbstractionResult& ar,
                           const std::map<std::string, int>& rule_tv, int tv,
                           const PredicateCatalog& catalog, const ReachGrid& grid) {
  ReachSet rs;
  rs.k_cut = k_cut;

  // constraints carved out of positively assigned propositions; propositions
  // without a projectable core are left to the final verification and logged
  std::vector<std::pair<int, std::vector<const Formula::Node*>>> prop_cores;
  std::optional<ProjectionUnavailable> first_unprojectable;
  for (const auto& [idx, val] : valuation.assignments.assignments) {
    if (!val) continue;  // negative literals are not enforced set-wise
    const Proposition& prop = ar.propositions.at(static_cast<std::size_t>(idx) - 1);
    const auto core = projectable_core(prop.subformula);
    bool usable = core.has_value();
    std::string reason;
    if (!usable) {
      reason = "no projectable core for " + print(prop.subformula);
    } else {
      for (const Formula::Node* lit : *core) {
        if (!catalog.contains(lit->pred_id) || !catalog.def(lit->pred_id).projectable) {
          usable = false;
          reason = "predicate " + lit->pred_id + " not projectable";
          break;
        }
      }
    }
    if (!usable) {
      rs.constraint_log.push_back(
          {k_cut, "s" + std::to_string(idx) + " not enforced set-wise (" + reason + ")"});
      if (!prop.contains_past_only && !first_unprojectable) {
        first_unprojectable = ProjectionUnavailable{idx, reason};
      }
      continue;
    }
    prop_cores.emplace_back(idx, *core);
  }
  // with no enforceable constraint at all the search space is unguided
  if (prop_cores.empty() && first_unprojectable) return *first_unprojectable;

  const auto prop_window_start = [&](int idx) {
    const Proposition& prop = ar.propositions.at(static_cast<std::size_t>(idx) - 1);
    const auto it = rule_tv.find(prop.rule);
    return it == rule_tv.end() ? tv : it->second;
  };

  const State& x0 = sc.ego_trajectory.states.at(static_cast<std::size_t>(k_cut));
  Cell init;
  init.s_lo = init.s_hi = x0.s;
  init.sdot_lo = init.sdot_hi = x0.s_dot;
  init.d_lo = init.d_hi = x0.d;
  rs.cells.push_back({init});

  const std::string rel_obs = sc.relevant_obstacle() ? sc.relevant_obstacle()->id : "";

  // Cells keep their exact interval-arithmetic bounds; the grid sets the
  // tolerance at which neighboring cells merge back together.
  for (int step = k_cut + 1; step <= sc.horizon; ++step) {
    std::vector<Cell> next;
    for (const Cell& c : rs.cells.back()) {
      const Cell img = forward_image(c, sc);
      if (!cell_empty(img)) next.push_back(img);
    }

    // (i) admissible state box is already enforced by the image clipping;
    // (ii) road bounds
    std::vector<Cell> bounded;
    for (const Cell& c : next) {
      Cell clipped = c;
      const double d_hi = profile_max_over(sc.road.road_left, c.s_lo, c.s_hi) - sc.ego_width / 2.0;
      const double d_lo = profile_min_over(sc.road.road_right, c.s_lo, c.s_hi) + sc.ego_width / 2.0;
      clipped.d_lo = std::max(clipped.d_lo, d_lo);
      clipped.d_hi = std::min(clipped.d_hi, d_hi);
      if (!cell_empty(clipped)) bounded.push_back(clipped);
    }
    next = std::move(bounded);

    // (iii) collision complements
    for (const auto& obs : sc.obstacles) {
      const State xo = obstacle_state_at(obs, step, sc.dt);
      Cell forbidden;
      forbidden.sdot_lo = -kHuge;
      forbidden.sdot_hi = kHuge;
      bool active = true;
      if (obs.frame == ObstacleFrame::kEgo) {
        forbidden.s_lo = xo.s - (sc.ego_length + obs.length) / 2.0;
        forbidden.s_hi = xo.s + (sc.ego_length + obs.length) / 2.0;
        forbidden.d_lo = xo.d - (sc.ego_width + obs.width) / 2.0;
        forbidden.d_hi = xo.d + (sc.ego_width + obs.width) / 2.0;
      } else {
        const ConflictArea* ca = sc.road.conflict_area_for(obs.id);
        active = ca != nullptr && xo.front_s(obs.length) > ca->obs_interval.lo &&
                 xo.rear_s(obs.length) < ca->obs_interval.hi;
        if (active) {
          forbidden.s_lo = ca->ego_interval.lo - sc.ego_length / 2.0;
          forbidden.s_hi = ca->ego_interval.hi + sc.ego_length / 2.0;
          forbidden.d_lo = -kHuge;
          forbidden.d_hi = kHuge;
        }
      }
      if (!active) continue;
      std::vector<Cell> survivors;
      for (const Cell& c : next) {
        auto pieces = subtract(c, forbidden);
        survivors.insert(survivors.end(), pieces.begin(), pieces.end());
      }
      next = std::move(survivors);
    }

    // (iv) valuation projections, on [TV_rule, h] only (timing separation)
    for (const auto& [idx, core] : prop_cores) {
      if (step < prop_window_start(idx)) continue;
      for (const Formula::Node* lit : core) {
        const auto region = catalog.project(lit->pred_id, sc, step, !lit->negated, rel_obs);
        if (!region) continue;  // already validated; past-only fallthrough
        std::vector<Cell> kept;
        for (const Cell& c : next) {
          for (const ConstraintBox& b : *region) {
            const auto piece = intersect(c, box_to_cell(b));
            if (piece) kept.push_back(*piece);
          }
        }
        next = std::move(kept);
        rs.constraint_log.push_back(
            {step, "s" + std::to_string(idx) + ": " + (lit->negated ? "!" : "") + lit->pred_id});
      }
    }

    merge_cells(next, grid);
    if (next.empty()) return ReachEmpty{step};
    rs.cells.push_back(std::move(next));
  }
  return rs;
}

Corridor extract_corridor(const ReachSet& rs, const Scenario& sc) {
  const int n = rs.steps();
  Corridor corridor;
  corridor.k_cut = rs.k_cut;
  if (n == 0) throw NoConnectedCorridor();

  constexpr double kFloor = 1e-12;
  std::vector<std::vector<double>> score(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> parent(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const auto& cells = rs.cells[static_cast<std::size_t>(t)];
    score[static_cast<std::size_t>(t)].assign(cells.size(),
                                              -std::numeric_limits<double>::infinity());
    parent[static_cast<std::size_t>(t)].assign(cells.size(), -1);
  }
  for (std::size_t j = 0; j < rs.cells[0].size(); ++j) {
    score[0][j] = std::log(std::max(rs.cells[0][j].volume(), kFloor));
  }
  for (int t = 1; t < n; ++t) {
    const auto& prev = rs.cells[static_cast<std::size_t>(t - 1)];
    const auto& cur = rs.cells[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!std::isfinite(score[static_cast<std::size_t>(t - 1)][i])) continue;
      const Cell img = forward_image(prev[i], sc);
      for (std::size_t j = 0; j < cur.size(); ++j) {
        if (!intersect(img, cur[j])) continue;
        const double cand = score[static_cast<std::size_t>(t - 1)][i] +
                            std::log(std::max(cur[j].volume(), kFloor));
        double& best = score[static_cast<std::size_t>(t)][j];
        if (cand > best + 1e-12) {
          best = cand;
          parent[static_cast<std::size_t>(t)][j] = static_cast<int>(i);
        } else if (std::abs(cand - best) <= 1e-12 && parent[static_cast<std::size_t>(t)][j] >= 0) {
          // tie-break toward the predecessor with the larger s_hi
          const Cell& incumbent =
              prev[static_cast<std::size_t>(parent[static_cast<std::size_t>(t)][j])];
          if (prev[i].s_hi > incumbent.s_hi) {
            parent[static_cast<std::size_t>(t)][j] = static_cast<int>(i);
          }
        }
      }
    }
  }

  // best terminal cell; ties toward larger s_hi
  int best_j = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  const auto& last = rs.cells[static_cast<std::size_t>(n - 1)];
  for (std::size_t j = 0; j < last.size(); ++j) {
    const double sc_j = score[static_cast<std::size_t>(n - 1)][j];
    if (sc_j > best_score + 1e-12 ||
        (std::abs(sc_j - best_score) <= 1e-12 && best_j >= 0 &&
         last[j].s_hi > last[static_cast<std::size_t>(best_j)].s_hi)) {
      best_score = sc_j;
      best_j = static_cast<int>(j);
    }
  }
  if (best_j < 0 || !std::isfinite(best_score)) throw NoConnectedCorridor();

  corridor.boxes.assign(static_cast<std::size_t>(n), Cell{});
  int j = best_j;
  for (int t = n - 1; t >= 0; --t) {
    corridor.boxes[static_cast<std::size_t>(t)] = rs.cells[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
    if (t > 0) {
      j = parent[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      if (j < 0) throw NoConnectedCorridor();
    }
  }
  return corridor;
}

std::string reach_to_csv(const ReachSet& rs) {
  std::ostringstream os;
  os << "step,s_lo,s_hi,sdot_lo,sdot_hi,d_lo,d_hi\n";
  for (int t = 0; t < rs.steps(); ++t) {
    for (const Cell& c : rs.cells[static_cast<std::size_t>(t)]) {
      os << (rs.k_cut + t) << "," << c.s_lo << "," << c.s_hi << "," << c.sdot_lo << ","
         << c.sdot_hi << "," << c.d_lo << "," << c.d_hi << "\n";
    }
  }
  return os.str();
}

}  // namespace rulerepair
