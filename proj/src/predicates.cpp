#include "rulerepair/predicates.hpp"

#include <algorithm>
#include <cmath>

namespace rulerepair {

namespace {

constexpr double kBigMargin = 1e6;
constexpr double kRobEps = 1e-9;
constexpr double kUnbounded = 1e18;

double interval_overlap(double lo1, double hi1, double lo2, double hi2) {
  return std::min(hi1, hi2) - std::max(lo1, lo2);
}

}  // namespace

State obstacle_state_at(const Obstacle& obs, int k, double dt) {
  const auto& states = obs.trajectory.states;
  if (states.empty()) return State{};
  if (k < static_cast<int>(states.size())) return states[static_cast<std::size_t>(k)];
  // constant-velocity extrapolation past the recorded horizon
  State x = states.back();
  const int extra = k - (static_cast<int>(states.size()) - 1);
  x.s += x.s_dot * dt * extra;
  x.d += x.d_dot * dt * extra;
  x.t_index = k;
  return x;
}

PredicateCatalog::PredicateCatalog(PredicateParams params) : params_(params) {
  const auto add = [this](std::string id, PredicateArity arity, PredicateCategory cat,
                          bool projectable, bool ego_independent, std::string doc) {
    defs_.push_back({std::move(id), arity, cat, projectable, ego_independent, std::move(doc)});
  };
  using A = PredicateArity;
  using C = PredicateCategory;
  add("stop_line_in_front", A::kEgoOnly, C::kLongitudinalPosition, true, false,
      "nearest stop line lies ahead of the vehicle front; margin = s_stop - front");
  add("in_standstill", A::kEgoOnly, C::kVelocity, true, false,
      "margin = v_standstill - |s_dot|");
  add("behind", A::kEgoObstacle, C::kLongitudinalPosition, true, false,
      "bumper gap to the obstacle is positive; margin = gap");
  add("in_same_lane", A::kEgoObstacle, C::kLateralPosition, true, false,
      "both lateral occupancies overlap the directed lane");
  add("cut_in", A::kEgoObstacle, C::kLateralPosition, false, true,
      "obstacle encroaches the lane while moving toward its center");
  add("keeps_safe_distance_prec", A::kEgoObstacle, C::kLongitudinalPosition, true, false,
      "margin = gap - (v_ego^2/(2|a_min|) - v_obs^2/(2|a_min|) + v_ego*t_react)");
  add("keeps_lane_speed_limit", A::kEgoOnly, C::kVelocity, true, false,
      "margin = speed_limit(s) - s_dot");
  add("keeps_type_speed_limit", A::kEgoOnly, C::kVelocity, true, false,
      "margin = v_type_limit - s_dot");
  add("keeps_fov_speed_limit", A::kEgoOnly, C::kVelocity, true, false,
      "margin = v_fov_limit - s_dot");
  add("keeps_braking_speed_limit", A::kEgoOnly, C::kVelocity, true, false,
      "margin = v_braking_limit - s_dot");
  add("in_conflict_area_ego", A::kEgoObstacle, C::kLongitudinalPosition, true, false,
      "ego occupancy overlaps the conflict interval on the ego path");
  add("in_conflict_area_obs", A::kEgoObstacle, C::kLongitudinalPosition, true, true,
      "obstacle occupancy overlaps the conflict interval on its own path");
  add("on_lanelet_with_type_intersection", A::kEgoOnly, C::kLongitudinalPosition, true, false,
      "ego center inside the intersection interval");
  add("causes_braking_intersection", A::kEgoObstacle, C::kLongitudinalPosition, false, false,
      "obstacle would need more than comfortable braking to avoid the ego occupancy");
  add("at_traffic_sign_stop", A::kEgoOnly, C::kUncategorized, true, true,
      "scenario-supplied stop sign flag");
  add("relevant_traffic_light", A::kEgoOnly, C::kUncategorized, true, true,
      "scenario-supplied traffic light flag");
  add("has_priority_conflict", A::kEgoOnly, C::kUncategorized, true, true,
      "scenario-supplied priority context flag");
}

const PredicateDef& PredicateCatalog::def(const std::string& id) const {
  for (const auto& d : defs_) {
    if (d.id == id) return d;
  }
  throw UnknownPredicate(id);
}

bool PredicateCatalog::contains(const std::string& id) const {
  for (const auto& d : defs_) {
    if (d.id == id) return true;
  }
  return false;
}

namespace {

PredicateResult from_margin(double margin) { return {margin > 0.0, margin}; }

PredicateResult flag_result(bool flag) { return {flag, flag ? 1.0 : -1.0}; }

// Stop line relevant at the ego position: the nearest line ahead of the
// vehicle front; falls back to the nearest behind once all are passed.
std::optional<double> relevant_stop_line(const RoadModel& road, double front) {
  std::optional<double> ahead;
  std::optional<double> behind;
  for (double sl : road.stop_lines) {
    if (sl >= front) {
      if (!ahead || sl < *ahead) ahead = sl;
    } else {
      if (!behind || sl > *behind) behind = sl;
    }
  }
  if (ahead) return ahead;
  return behind;
}

}  // namespace

PredicateResult PredicateCatalog::eval_state(const std::string& id, const Scenario& sc,
                                             const State& ego, int k,
                                             const std::string& obstacle) const {
  const PredicateDef& d = def(id);
  const Obstacle* obs = nullptr;
  State obs_state;
  if (d.arity == PredicateArity::kEgoObstacle) {
    obs = obstacle.empty() ? sc.relevant_obstacle() : sc.find_obstacle(obstacle);
    if (obs == nullptr) throw MissingObstacle(id);
    obs_state = obstacle_state_at(*obs, k, sc.dt);
  }

  const double front = ego.front_s(sc.ego_length);

  if (id == "stop_line_in_front") {
    const auto sl = relevant_stop_line(sc.road, front);
    if (!sl) return from_margin(-kBigMargin);
    return from_margin(*sl - front);
  }
  if (id == "in_standstill") {
    return from_margin(params_.v_standstill - std::abs(ego.s_dot));
  }
  if (id == "behind") {
    const double gap = obs_state.rear_s(obs->length) - front;
    return from_margin(gap);
  }
  if (id == "in_same_lane") {
    const double top = sc.road.lane_left.at(ego.s);
    const double bot = sc.road.lane_right.at(ego.s);
    const double ego_ov = interval_overlap(ego.d - sc.ego_width / 2.0, ego.d + sc.ego_width / 2.0,
                                           bot, top);
    const double obs_ov = interval_overlap(obs_state.d - obs->width / 2.0,
                                           obs_state.d + obs->width / 2.0, bot, top);
    return from_margin(std::min(ego_ov, obs_ov));
  }
  if (id == "cut_in") {
    // The obstacle cuts in when its occupancy enters the directed lane while
    // moving toward the lane center. Purely a function of the obstacle.
    const double top = sc.road.lane_left.at(obs_state.s);
    const double bot = sc.road.lane_right.at(obs_state.s);
    const double ov = interval_overlap(obs_state.d - obs->width / 2.0,
                                       obs_state.d + obs->width / 2.0, bot, top);
    const double center = 0.5 * (top + bot);
    const double encroach_rate = (obs_state.d >= center ? -1.0 : 1.0) * obs_state.d_dot;
    return from_margin(std::min(ov, encroach_rate));
  }
  if (id == "keeps_safe_distance_prec") {
    const double gap = obs_state.rear_s(obs->length) - front;
    const double abs_amin = std::abs(params_.a_min);
    const double d_safe = ego.s_dot * ego.s_dot / (2.0 * abs_amin) -
                          obs_state.s_dot * obs_state.s_dot / (2.0 * abs_amin) +
                          ego.s_dot * params_.t_react;
    return from_margin(gap - d_safe);
  }
  if (id == "keeps_lane_speed_limit") {
    return from_margin(sc.road.speed_limit.at(ego.s) - ego.s_dot);
  }
  if (id == "keeps_type_speed_limit") {
    return from_margin(params_.v_type_limit - ego.s_dot);
  }
  if (id == "keeps_fov_speed_limit") {
    return from_margin(params_.v_fov_limit - ego.s_dot);
  }
  if (id == "keeps_braking_speed_limit") {
    return from_margin(params_.v_braking_limit - ego.s_dot);
  }
  if (id == "in_conflict_area_ego") {
    const ConflictArea* ca = sc.road.conflict_area_for(obs->id);
    if (ca == nullptr) return from_margin(-kBigMargin);
    return from_margin(interval_overlap(ego.rear_s(sc.ego_length), front,
                                        ca->ego_interval.lo, ca->ego_interval.hi));
  }
  if (id == "in_conflict_area_obs") {
    const ConflictArea* ca = sc.road.conflict_area_for(obs->id);
    if (ca == nullptr) return from_margin(-kBigMargin);
    return from_margin(interval_overlap(obs_state.rear_s(obs->length),
                                        obs_state.front_s(obs->length), ca->obs_interval.lo,
                                        ca->obs_interval.hi));
  }
  if (id == "on_lanelet_with_type_intersection") {
    if (!sc.road.intersection_interval) return from_margin(-kBigMargin);
    const Interval& iv = *sc.road.intersection_interval;
    return from_margin(std::min(ego.s - iv.lo, iv.hi - ego.s));
  }
  if (id == "causes_braking_intersection") {
    const ConflictArea* ca = sc.road.conflict_area_for(obs->id);
    if (ca == nullptr) return from_margin(-params_.a_comfort);
    const bool ego_blocks = interval_overlap(ego.rear_s(sc.ego_length), front,
                                             ca->ego_interval.lo, ca->ego_interval.hi) > 0.0;
    if (!ego_blocks) return from_margin(-params_.a_comfort);
    const double dist = ca->obs_interval.lo - obs_state.front_s(obs->length);
    if (dist <= 0.0) {
      // already at or in the area: no finite braking avoids the ego
      return from_margin(kBigMargin);
    }
    const double a_req = obs_state.s_dot * obs_state.s_dot / (2.0 * dist);
    return from_margin(a_req - params_.a_comfort);
  }
  if (id == "at_traffic_sign_stop") return flag_result(sc.context.at_traffic_sign_stop);
  if (id == "relevant_traffic_light") return flag_result(sc.context.relevant_traffic_light);
  if (id == "has_priority_conflict") return flag_result(sc.context.has_priority_conflict);

  throw UnknownPredicate(id);
}

PredicateResult PredicateCatalog::eval(const std::string& id, const Scenario& sc, int k,
                                       const std::string& obstacle) const {
  const auto& states = sc.ego_trajectory.states;
  const State& ego = states.at(static_cast<std::size_t>(std::min<int>(
      k, static_cast<int>(states.size()) - 1)));
  return eval_state(id, sc, ego, k, obstacle);
}

std::optional<ConstraintRegion> PredicateCatalog::project(const std::string& id,
                                                          const Scenario& sc, int k,
                                                          bool polarity,
                                                          const std::string& obstacle) const {
  const PredicateDef& d = def(id);
  if (!d.projectable) return std::nullopt;

  const auto full = []() { return ConstraintRegion{ConstraintBox{}}; };
  const auto empty = []() { return ConstraintRegion{}; };
  const auto box_s_upper = [](double hi) {
    ConstraintBox b;
    b.s = {-kUnbounded, hi};
    return b;
  };
  const auto box_s_lower = [](double lo) {
    ConstraintBox b;
    b.s = {lo, kUnbounded};
    return b;
  };

  const Obstacle* obs = nullptr;
  State obs_state;
  if (d.arity == PredicateArity::kEgoObstacle) {
    obs = obstacle.empty() ? sc.relevant_obstacle() : sc.find_obstacle(obstacle);
    if (obs == nullptr) throw MissingObstacle(id);
    obs_state = obstacle_state_at(*obs, k, sc.dt);
  }
  const double half_len = sc.ego_length / 2.0;

  if (id == "stop_line_in_front") {
    if (sc.road.stop_lines.empty()) return polarity ? empty() : full();
    const double last = *std::max_element(sc.road.stop_lines.begin(), sc.road.stop_lines.end());
    ConstraintRegion r;
    if (polarity) {
      r.push_back(box_s_upper(last - half_len));
    } else {
      r.push_back(box_s_lower(last - half_len));
    }
    return r;
  }
  if (id == "in_standstill") {
    ConstraintRegion r;
    if (polarity) {
      ConstraintBox b;
      b.s_dot = {-params_.v_standstill, params_.v_standstill};
      r.push_back(b);
    } else {
      ConstraintBox lo, hi;
      lo.s_dot = {-kUnbounded, -params_.v_standstill};
      hi.s_dot = {params_.v_standstill, kUnbounded};
      r.push_back(lo);
      r.push_back(hi);
    }
    return r;
  }
  if (id == "behind") {
    const double bound = obs_state.rear_s(obs->length) - half_len;
    ConstraintRegion r;
    r.push_back(polarity ? box_s_upper(bound) : box_s_lower(bound));
    return r;
  }
  if (id == "in_same_lane") {
    const double top = sc.road.lane_left.max_value();
    const double bot = sc.road.lane_right.min_value();
    const double obs_ov = interval_overlap(obs_state.d - obs->width / 2.0,
                                           obs_state.d + obs->width / 2.0,
                                           sc.road.lane_right.at(obs_state.s),
                                           sc.road.lane_left.at(obs_state.s));
    if (polarity) {
      if (obs_ov <= 0.0) return empty();
      ConstraintBox b;
      b.d = {bot - sc.ego_width / 2.0, top + sc.ego_width / 2.0};
      return ConstraintRegion{b};
    }
    // false when the ego is clear of the lane or the obstacle is
    if (obs_ov <= 0.0) return full();
    ConstraintBox below, above;
    below.d = {-kUnbounded, sc.road.lane_right.max_value() - sc.ego_width / 2.0};
    above.d = {sc.road.lane_left.min_value() + sc.ego_width / 2.0, kUnbounded};
    return ConstraintRegion{below, above};
  }
  if (id == "keeps_safe_distance_prec") {
    // Velocity-banded inversion of gap > d_safe(v); the bound shrinks with v,
    // so using the band's upper velocity is sound.
    const double abs_amin = std::abs(params_.a_min);
    const double obs_term = obs_state.s_dot * obs_state.s_dot / (2.0 * abs_amin);
    const double obs_rear = obs_state.rear_s(obs->length);
    const double v_max = sc.state_bounds.s_dot.hi;
    const double band = 0.5;
    ConstraintRegion r;
    if (polarity) {
      for (double v = 0.0; v < v_max; v += band) {
        const double v_hi = std::min(v + band, v_max);
        const double d_safe = v_hi * v_hi / (2.0 * abs_amin) - obs_term + v_hi * params_.t_react;
        ConstraintBox b;
        b.s_dot = {v, v_hi};
        b.s = {-kUnbounded, obs_rear - half_len - d_safe};
        r.push_back(b);
      }
    } else {
      for (double v = 0.0; v < v_max; v += band) {
        const double v_hi = std::min(v + band, v_max);
        const double d_safe = v * v / (2.0 * abs_amin) - obs_term + v * params_.t_react;
        ConstraintBox b;
        b.s_dot = {v, v_hi};
        b.s = {obs_rear - half_len - d_safe, kUnbounded};
        r.push_back(b);
      }
    }
    return r;
  }
  if (id == "keeps_lane_speed_limit") {
    // one box per speed-limit piece
    ConstraintRegion r;
    const auto& pieces = sc.road.speed_limit.pieces;
    if (pieces.empty()) return polarity ? full() : empty();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const double s_lo = pieces[i].first;
      const double s_hi = (i + 1 < pieces.size()) ? pieces[i + 1].first : kUnbounded;
      ConstraintBox b;
      b.s = {s_lo, s_hi};
      if (polarity) {
        b.s_dot = {-kUnbounded, pieces[i].second};
      } else {
        b.s_dot = {pieces[i].second, kUnbounded};
      }
      r.push_back(b);
    }
    if (polarity) {
      ConstraintBox head;  // before the first breakpoint the first piece holds
      head.s = {-kUnbounded, pieces.front().first};
      head.s_dot = {-kUnbounded, pieces.front().second};
      r.push_back(head);
    }
    return r;
  }
  if (id == "keeps_type_speed_limit" || id == "keeps_fov_speed_limit" ||
      id == "keeps_braking_speed_limit") {
    const double lim = id == "keeps_type_speed_limit" ? params_.v_type_limit
                       : id == "keeps_fov_speed_limit" ? params_.v_fov_limit
                                                        : params_.v_braking_limit;
    ConstraintBox b;
    if (polarity) {
      b.s_dot = {-kUnbounded, lim};
    } else {
      b.s_dot = {lim, kUnbounded};
    }
    return ConstraintRegion{b};
  }
  if (id == "in_conflict_area_ego") {
    const ConflictArea* ca = sc.road.conflict_area_for(obs->id);
    if (ca == nullptr) return polarity ? empty() : full();
    if (polarity) {
      ConstraintBox b;
      b.s = {ca->ego_interval.lo - half_len, ca->ego_interval.hi + half_len};
      return ConstraintRegion{b};
    }
    return ConstraintRegion{box_s_upper(ca->ego_interval.lo - half_len),
                            box_s_lower(ca->ego_interval.hi + half_len)};
  }
  if (id == "in_conflict_area_obs") {
    // ego-independent: the recorded obstacle either matches the polarity or not
    const PredicateResult r = eval_state(id, sc, State{}, k, obs->id);
    return r.truth == polarity ? full() : empty();
  }
  if (id == "on_lanelet_with_type_intersection") {
    if (!sc.road.intersection_interval) return polarity ? empty() : full();
    const Interval& iv = *sc.road.intersection_interval;
    if (polarity) {
      ConstraintBox b;
      b.s = {iv.lo, iv.hi};
      return ConstraintRegion{b};
    }
    return ConstraintRegion{box_s_upper(iv.lo), box_s_lower(iv.hi)};
  }
  if (id == "at_traffic_sign_stop" || id == "relevant_traffic_light" ||
      id == "has_priority_conflict") {
    const PredicateResult r = eval_state(id, sc, State{}, k);
    return r.truth == polarity ? full() : empty();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rule library

Formula RuleLibraryEntry::parse_formula(double dt) const {
  return parse(formula_text, dt, params);
}

std::vector<RuleLibraryEntry> default_rule_library() {
  std::vector<RuleLibraryEntry> lib;
  lib.push_back({
      "G1",
      "G(in_same_lane & behind & !O[0,t_c](cut_in & P(!cut_in))"
      " => keeps_safe_distance_prec)",
      {{"t_c", 3.0}},
      "keep a safe distance to the preceding vehicle",
  });
  lib.push_back({
      "G3",
      "G(keeps_lane_speed_limit & keeps_type_speed_limit & keeps_fov_speed_limit"
      " & keeps_braking_speed_limit)",
      {},
      "observe all speed limits",
  });
  lib.push_back({
      "IN1",
      "G(P(stop_line_in_front) & !stop_line_in_front & at_traffic_sign_stop"
      " & !relevant_traffic_light"
      " => O(H[0,t_slw](stop_line_in_front & in_standstill)))",
      {{"t_slw", 3.0}},
      "stop at the stop line for at least t_slw before entering",
  });
  lib.push_back({
      "IN4s",
      "G(has_priority_conflict =>"
      " G((in_conflict_area_ego => !causes_braking_intersection"
      "    & !F[0,t_ib](in_conflict_area_obs))"
      "   & (in_conflict_area_obs => !F[0,t_ia](in_conflict_area_ego)))"
      " | !on_lanelet_with_type_intersection)",
      {{"t_ia", 0.5}, {"t_ib", 1.0}},
      "do not endanger priority traffic inside the intersection",
  });
  return lib;
}

const RuleLibraryEntry* find_rule(const std::vector<RuleLibraryEntry>& lib,
                                  const std::string& name) {
  for (const auto& e : lib) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// TraceSignal

TraceSignal::TraceSignal(const Scenario& sc, const Trajectory& ego, PredicateCatalog catalog)
    : sc_(sc), ego_(ego), catalog_(std::move(catalog)) {
  const Obstacle* obs = sc.relevant_obstacle();
  if (obs != nullptr) obstacle_ = obs->id;
}

int TraceSignal::length() const { return static_cast<int>(ego_.states.size()); }

PredicateResult TraceSignal::eval_result(const std::string& pred_id, int k) const {
  const auto key = std::make_pair(pred_id, k);
  const auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const State& ego = ego_.states.at(static_cast<std::size_t>(k));
  PredicateResult r = catalog_.eval_state(pred_id, sc_, ego, k, obstacle_);
  if (r.margin == 0.0) r.margin = r.truth ? kRobEps : -kRobEps;
  cache_.emplace(key, r);
  return r;
}

bool TraceSignal::eval(const std::string& pred_id, int k) const {
  return eval_result(pred_id, k).truth;
}

double TraceSignal::rob(const std::string& pred_id, int k) const {
  const PredicateResult r = eval_result(pred_id, k);
  if (r.margin == 0.0) return r.truth ? kRobEps : -kRobEps;
  return r.margin;
}

}  // namespace rulerepair
