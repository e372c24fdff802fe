#include "rulerepair/criticality.hpp"

#include <algorithm>
#include <cmath>

namespace rulerepair {

namespace {

struct FeasibleInterval {
  double lo;
  double hi;
};

// snap interval keeping the next jerk and acceleration inside the state box
FeasibleInterval snap_interval(const Scenario& sc, const State& x) {
  const double dt = sc.dt;
  const auto& xb = sc.state_bounds;
  const auto& ub = sc.input_bounds;
  double lo = ub.u_long.lo;
  double hi = ub.u_long.hi;
  lo = std::max(lo, (xb.s_dddot.lo - x.s_dddot) / dt);
  hi = std::min(hi, (xb.s_dddot.hi - x.s_dddot) / dt);
  const double half_dt2 = dt * dt / 2.0;
  lo = std::max(lo, (xb.s_ddot.lo - x.s_ddot - x.s_dddot * dt) / half_dt2);
  hi = std::min(hi, (xb.s_ddot.hi - x.s_ddot - x.s_dddot * dt) / half_dt2);
  if (lo > hi) {
    const double mid = std::clamp(0.5 * (lo + hi), ub.u_long.lo, ub.u_long.hi);
    return {mid, mid};
  }
  return {lo, hi};
}

// snap reaching the given next velocity exactly
double snap_for_velocity(const Scenario& sc, const State& x, double v_next) {
  const double dt = sc.dt;
  return (v_next - x.s_dot - x.s_ddot * dt - x.s_dddot * dt * dt / 2.0) / (dt * dt * dt / 6.0);
}

State advance_lon(const Scenario& sc, const State& x, double u_long) {
  return step_dynamics(x, {u_long, 0.0}, sc.dt);
}

// Whether the velocity floor can still be held: greedy maximum snap until the
// acceleration is non-negative, watching the floor.
bool recoverable_low(const Scenario& sc, State x) {
  const double v_lo = sc.state_bounds.s_dot.lo;
  for (int step = 0; step < 400; ++step) {
    if (x.s_dot < v_lo - 1e-9) return false;
    if (x.s_ddot >= -1e-9 && x.s_dddot >= -1e-9) return true;
    const FeasibleInterval fi = snap_interval(sc, x);
    x = advance_lon(sc, x, fi.hi);
  }
  return false;
}

// Symmetric guard against overshooting the velocity ceiling.
bool recoverable_high(const Scenario& sc, State x) {
  const double v_hi = sc.state_bounds.s_dot.hi;
  for (int step = 0; step < 400; ++step) {
    if (x.s_dot > v_hi + 1e-9) return false;
    if (x.s_ddot <= 1e-9 && x.s_dddot <= 1e-9) return true;
    const FeasibleInterval fi = snap_interval(sc, x);
    x = advance_lon(sc, x, fi.lo);
  }
  return false;
}

// Three-step deadbeat toward (v_target, 0, 0) for the (v, a, j) chain;
// returns the first input, or nullopt when it leaves the feasible set.
std::optional<double> deadbeat_snap(const Scenario& sc, const State& x, double v_target) {
  const double dt = sc.dt;
  const double dv = x.s_dot - v_target;
  // reachability system [A^2 B, A B, B] [u0 u1 u2]' = -A^3 [dv a j]'
  const double b0 = dt * dt * dt / 6.0, b1 = dt * dt / 2.0, b2 = dt;
  // columns A^2 B, A B, B of the three-step reachability matrix
  const double a2b[3] = {b0 + 2.0 * dt * b1 + 2.0 * dt * dt * b2, b1 + 2.0 * dt * b2, b2};
  const double ab[3] = {b0 + dt * b1 + dt * dt / 2.0 * b2, b1 + dt * b2, b2};
  // A^3 x
  const double x0 = dv, x1 = x.s_ddot, x2 = x.s_dddot;
  const double t3 = 3.0 * dt;
  const double ax0 = x0 + t3 * x1 + t3 * t3 / 2.0 * x2;
  const double ax1 = x1 + t3 * x2;
  const double ax2 = x2;
  // solve [a2b ab b] u = -(ax)
  const double m[3][3] = {{a2b[0], ab[0], b0}, {a2b[1], ab[1], b1}, {a2b[2], ab[2], b2}};
  const double r[3] = {-ax0, -ax1, -ax2};
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-12) return std::nullopt;
  const double u0 = (r[0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (r[1] * m[2][2] - r[2] * m[1][2]) +
                     m[0][2] * (r[1] * m[2][1] - r[2] * m[1][1])) /
                    det;
  const double u1 = (m[0][0] * (r[1] * m[2][2] - r[2] * m[1][2]) -
                     r[0] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * r[2] - m[2][0] * r[1])) /
                    det;
  const double u2 = (m[0][0] * (m[1][1] * r[2] - m[2][1] * r[1]) -
                     m[0][1] * (m[1][0] * r[2] - m[2][0] * r[1]) +
                     r[0] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
                    det;

  const auto& ub = sc.input_bounds.u_long;
  if (u0 < ub.lo || u0 > ub.hi || u1 < ub.lo || u1 > ub.hi || u2 < ub.lo || u2 > ub.hi) {
    return std::nullopt;
  }
  // simulate the three steps to check the state box
  State xs = x;
  const double us[3] = {u0, u1, u2};
  for (double u : us) {
    const FeasibleInterval fi = snap_interval(sc, xs);
    if (u < fi.lo - 1e-9 || u > fi.hi + 1e-9) return std::nullopt;
    xs = advance_lon(sc, xs, u);
    if (xs.s_dot < sc.state_bounds.s_dot.lo - 1e-3 ||
        xs.s_dot > sc.state_bounds.s_dot.hi + 1e-3) {
      return std::nullopt;
    }
  }
  return u0;
}

// Hardest braking snap whose successor is still recoverable; near the
// velocity floor a deadbeat settle parks the chain at (v_lo, 0, 0).
double brake_snap(const Scenario& sc, const State& x) {
  const double v_lo = sc.state_bounds.s_dot.lo;
  if (x.s_dot - v_lo < 1.0 && x.s_ddot > -4.0) {
    if (std::abs(x.s_dot - v_lo) < 1e-9 && std::abs(x.s_ddot) < 1e-9 &&
        std::abs(x.s_dddot) < 1e-9) {
      return 0.0;
    }
    const auto u = deadbeat_snap(sc, x, v_lo);
    if (u) return *u;
  }
  const FeasibleInterval fi = snap_interval(sc, x);
  const double u_floor = snap_for_velocity(sc, x, v_lo);
  double lo = std::max(fi.lo, std::min(u_floor, fi.hi));
  if (recoverable_low(sc, advance_lon(sc, x, lo))) return lo;
  double hi = fi.hi;
  if (!recoverable_low(sc, advance_lon(sc, x, hi))) return hi;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (recoverable_low(sc, advance_lon(sc, x, mid))) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double kickdown_snap(const Scenario& sc, const State& x) {
  const double v_hi = sc.state_bounds.s_dot.hi;
  if (v_hi - x.s_dot < 1.0 && x.s_ddot < 4.0) {
    if (std::abs(x.s_dot - v_hi) < 1e-9 && std::abs(x.s_ddot) < 1e-9 &&
        std::abs(x.s_dddot) < 1e-9) {
      return 0.0;
    }
    const auto u = deadbeat_snap(sc, x, v_hi);
    if (u) return *u;
  }
  const FeasibleInterval fi = snap_interval(sc, x);
  const double u_ceil = snap_for_velocity(sc, x, v_hi);
  double hi = std::min(fi.hi, std::max(u_ceil, fi.lo));
  if (recoverable_high(sc, advance_lon(sc, x, hi))) return hi;
  double lo = fi.lo;
  if (!recoverable_high(sc, advance_lon(sc, x, lo))) return lo;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (recoverable_high(sc, advance_lon(sc, x, mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Snap steering acceleration and jerk toward zero, holding the velocity.
double hold_snap(const Scenario& sc, const State& x) {
  const double dt = sc.dt;
  const FeasibleInterval fi = snap_interval(sc, x);
  const double u = (-x.s_ddot - x.s_dddot * dt) / (dt * dt / 2.0);
  return std::clamp(u, fi.lo, fi.hi);
}

double lat_accel_interval_clamp(const Scenario& sc, const State& x, double u) {
  const double dt = sc.dt;
  double lo = sc.input_bounds.u_lat.lo;
  double hi = sc.input_bounds.u_lat.hi;
  lo = std::max(lo, (sc.state_bounds.d_dot.lo - x.d_dot) / dt);
  hi = std::min(hi, (sc.state_bounds.d_dot.hi - x.d_dot) / dt);
  if (lo > hi) return 0.0;
  return std::clamp(u, lo, hi);
}

double damp_lateral(const Scenario& sc, const State& x) {
  return lat_accel_interval_clamp(sc, x, -x.d_dot / sc.dt);
}

// Bang-bang double integrator toward a target offset with zero terminal rate.
double steer_accel(const Scenario& sc, const State& x, double d_target) {
  const double u_m = std::min(std::abs(sc.input_bounds.u_lat.lo), sc.input_bounds.u_lat.hi);
  const double e = x.d - d_target;
  const double v = x.d_dot;
  if (std::abs(e) < 0.05 && std::abs(v) < 0.1) {
    return lat_accel_interval_clamp(sc, x, -8.0 * e - 4.0 * v);
  }
  const double sigma = e + v * std::abs(v) / (2.0 * u_m);
  return lat_accel_interval_clamp(sc, x, sigma > 0.0 ? -u_m : u_m);
}

enum class SteerVariant { kOffset, kHeading };

std::vector<Input> maneuver_inputs_variant(const Scenario& sc, ManeuverKind kind,
                                           SteerVariant variant, const State& from, int k) {
  std::vector<Input> inputs;
  const int n = sc.horizon - k;
  if (n <= 0) return inputs;
  inputs.reserve(static_cast<std::size_t>(n));

  State x = from;
  const double lane_width = sc.road.lane_left.at(from.s) - sc.road.lane_right.at(from.s);
  const double side = kind == ManeuverKind::kSteerLeft ? 1.0 : -1.0;
  const double d_target = from.d + side * lane_width;
  const double heading_rate = std::tan(0.2) * std::max(from.s_dot, 1.0) * side;

  for (int i = 0; i < n; ++i) {
    Input u;
    switch (kind) {
      case ManeuverKind::kBrake:
        u.u_long = brake_snap(sc, x);
        u.u_lat = damp_lateral(sc, x);
        break;
      case ManeuverKind::kKickDown:
        u.u_long = kickdown_snap(sc, x);
        u.u_lat = damp_lateral(sc, x);
        break;
      case ManeuverKind::kMaintainVelocity:
        u.u_long = hold_snap(sc, x);
        u.u_lat = damp_lateral(sc, x);
        break;
      case ManeuverKind::kSteerLeft:
      case ManeuverKind::kSteerRight:
        u.u_long = hold_snap(sc, x);
        if (variant == SteerVariant::kOffset) {
          u.u_lat = steer_accel(sc, x, d_target);
        } else {
          // reach the heading-equivalent lateral rate, ease off after a
          // lane width of offset has accumulated
          if (std::abs(x.d - from.d) >= lane_width) {
            u.u_lat = damp_lateral(sc, x);
          } else {
            u.u_lat = lat_accel_interval_clamp(sc, x, (heading_rate - x.d_dot) / sc.dt);
          }
        }
        break;
    }
    x = step_dynamics(x, u, sc.dt);
    inputs.push_back(u);
  }
  return inputs;
}

}  // namespace

std::string maneuver_name(ManeuverKind kind) {
  switch (kind) {
    case ManeuverKind::kBrake:
      return "TTB";
    case ManeuverKind::kKickDown:
      return "TTK";
    case ManeuverKind::kSteerLeft:
      return "TTS_left";
    case ManeuverKind::kSteerRight:
      return "TTS_right";
    case ManeuverKind::kMaintainVelocity:
      return "TTMV";
  }
  return "?";
}

std::vector<Input> maneuver_inputs(const Scenario& sc, ManeuverKind kind, const State& from,
                                   int k) {
  return maneuver_inputs_variant(sc, kind, SteerVariant::kOffset, from, k);
}

std::pair<std::vector<int>, std::vector<ManeuverKind>> select_maneuvers(
    const Valuation& valuation, const AbstractionResult& ar,
    const std::map<int, bool>& trace_valuation_at_tv) {
  std::vector<int> flipped;
  std::set<ManeuverKind> kinds;
  for (const auto& [idx, val] : valuation.assignments.assignments) {
    const auto it = trace_valuation_at_tv.find(idx);
    if (it == trace_valuation_at_tv.end()) continue;
    if (it->second == val) continue;
    const Proposition& prop = ar.propositions.at(static_cast<std::size_t>(idx) - 1);
    if (prop.contains_past_only) continue;
    flipped.push_back(idx);
    for (PredicateCategory cat : prop.predicate_categories) {
      switch (cat) {
        case PredicateCategory::kLongitudinalPosition:
        case PredicateCategory::kVelocity:
          kinds.insert(ManeuverKind::kBrake);
          kinds.insert(ManeuverKind::kKickDown);
          break;
        case PredicateCategory::kLateralPosition:
          kinds.insert(ManeuverKind::kSteerLeft);
          kinds.insert(ManeuverKind::kSteerRight);
          break;
        case PredicateCategory::kAcceleration:
          kinds.insert(ManeuverKind::kMaintainVelocity);
          break;
        case PredicateCategory::kUncategorized:
          break;
      }
    }
  }
  if (flipped.empty() || kinds.empty()) throw NoActionableProposition();
  // deterministic kind order
  std::vector<ManeuverKind> ordered;
  for (ManeuverKind k : {ManeuverKind::kBrake, ManeuverKind::kKickDown, ManeuverKind::kSteerLeft,
                         ManeuverKind::kSteerRight, ManeuverKind::kMaintainVelocity}) {
    if (kinds.count(k)) ordered.push_back(k);
  }
  return {flipped, ordered};
}

bool collision_free(const Scenario& sc, const Trajectory& ego, int from_step) {
  for (int k = std::max(0, from_step); k < static_cast<int>(ego.states.size()); ++k) {
    const State& xe = ego.states[static_cast<std::size_t>(k)];
    for (const auto& obs : sc.obstacles) {
      const State xo = obstacle_state_at(obs, k, sc.dt);
      if (obs.frame == ObstacleFrame::kEgo) {
        if (std::abs(xe.s - xo.s) < (sc.ego_length + obs.length) / 2.0 &&
            std::abs(xe.d - xo.d) < (sc.ego_width + obs.width) / 2.0) {
          return false;
        }
      } else {
        const ConflictArea* ca = sc.road.conflict_area_for(obs.id);
        if (ca == nullptr) continue;
        const bool ego_in = xe.front_s(sc.ego_length) > ca->ego_interval.lo &&
                            xe.rear_s(sc.ego_length) < ca->ego_interval.hi;
        const bool obs_in = xo.front_s(obs.length) > ca->obs_interval.lo &&
                            xo.rear_s(obs.length) < ca->obs_interval.hi;
        if (ego_in && obs_in) return false;
      }
    }
  }
  return true;
}

Trajectory splice_maneuver(const Scenario& sc, ManeuverKind kind, int k) {
  Trajectory spliced;
  spliced.states.assign(sc.ego_trajectory.states.begin(),
                        sc.ego_trajectory.states.begin() + k + 1);
  spliced.inputs.assign(sc.ego_trajectory.inputs.begin(), sc.ego_trajectory.inputs.begin() + k);
  const std::vector<Input> man = maneuver_inputs(sc, kind, spliced.states.back(), k);
  for (const Input& u : man) {
    spliced.inputs.push_back(u);
    spliced.states.push_back(step_dynamics(spliced.states.back(), u, sc.dt));
  }
  return spliced;
}

namespace {

Trajectory splice_variant(const Scenario& sc, ManeuverKind kind, SteerVariant variant, int k) {
  Trajectory spliced;
  spliced.states.assign(sc.ego_trajectory.states.begin(),
                        sc.ego_trajectory.states.begin() + k + 1);
  spliced.inputs.assign(sc.ego_trajectory.inputs.begin(), sc.ego_trajectory.inputs.begin() + k);
  const std::vector<Input> man = maneuver_inputs_variant(sc, kind, variant, spliced.states.back(), k);
  for (const Input& u : man) {
    spliced.inputs.push_back(u);
    spliced.states.push_back(step_dynamics(spliced.states.back(), u, sc.dt));
  }
  return spliced;
}

bool maneuver_complies(const Scenario& sc, const Trajectory& spliced, const Formula& requirement,
                       int k, const PredicateCatalog& catalog) {
  if (!collision_free(sc, spliced, k)) return false;
  TraceSignal sig(sc, spliced, catalog);
  return eval_bool(requirement, sig, 0);
}

}  // namespace

double time_to_maneuver(const Scenario& sc, ManeuverKind kind, const Formula& requirement,
                        int tv, const PredicateCatalog& catalog) {
  const bool steer = kind == ManeuverKind::kSteerLeft || kind == ManeuverKind::kSteerRight;
  for (int k = std::min(tv, sc.horizon); k >= 0; --k) {
    if (maneuver_complies(sc, splice_variant(sc, kind, SteerVariant::kOffset, k), requirement, k,
                          catalog)) {
      return k;
    }
    if (steer && maneuver_complies(sc, splice_variant(sc, kind, SteerVariant::kHeading, k),
                                   requirement, k, catalog)) {
      return k;
    }
  }
  return kNegInf;
}

Formula flipped_requirement(const AbstractionResult& ar, const std::vector<int>& flipped,
                            const Valuation& valuation) {
  std::vector<Formula> parts;
  for (int idx : flipped) {
    const Formula& sub = ar.propositions.at(static_cast<std::size_t>(idx) - 1).subformula;
    parts.push_back(valuation.assignments.value(idx) ? sub : to_nnf(f_not(sub)));
  }
  if (parts.empty()) return f_true();
  return f_and(std::move(parts));
}

CutoffResult time_to_comply(const Scenario& sc, const Valuation& valuation,
                            const AbstractionResult& ar,
                            const std::map<int, bool>& trace_valuation_at_tv, int tv,
                            const PredicateCatalog& catalog) {
  CutoffResult out;
  auto [flipped, kinds] = select_maneuvers(valuation, ar, trace_valuation_at_tv);
  out.flipped_props = flipped;
  out.maneuver_set = kinds;
  const Formula requirement = flipped_requirement(ar, flipped, valuation);
  for (ManeuverKind kind : kinds) {
    const double ttm = time_to_maneuver(sc, kind, requirement, tv, catalog);
    out.per_maneuver_ttm[kind] = ttm;
    if (ttm > out.tc) {
      out.tc = ttm;
      out.best = kind;
    }
  }
  return out;
}

}  // namespace rulerepair
