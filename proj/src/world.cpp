#include "rulerepair/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rulerepair {

namespace {

constexpr double kProjectionTieTol = 1e-9;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

double PiecewiseProfile::at(double s) const {
  if (pieces.empty()) return 0.0;
  double value = pieces.front().second;
  for (const auto& [start, v] : pieces) {
    if (s >= start) value = v;
  }
  return value;
}

double PiecewiseProfile::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [start, v] : pieces) m = std::max(m, v);
  return m;
}

double PiecewiseProfile::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& [start, v] : pieces) m = std::min(m, v);
  return m;
}

double RoadModel::path_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < reference_path.size(); ++i) {
    const double dx = reference_path[i].first - reference_path[i - 1].first;
    const double dy = reference_path[i].second - reference_path[i - 1].second;
    len += std::hypot(dx, dy);
  }
  return len;
}

const ConflictArea* RoadModel::conflict_area_for(const std::string& obstacle_id) const {
  for (const auto& ca : conflict_areas) {
    if (ca.obstacle == obstacle_id) return &ca;
  }
  return nullptr;
}

const Obstacle* Scenario::relevant_obstacle() const {
  if (!rule_relevant_obstacle.empty()) return find_obstacle(rule_relevant_obstacle);
  return obstacles.empty() ? nullptr : &obstacles.front();
}

const Obstacle* Scenario::find_obstacle(const std::string& id) const {
  for (const auto& o : obstacles) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

State step_dynamics(const State& x, const Input& u, double dt) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  const double dt4 = dt3 * dt;
  State next;
  // Exact ZOH of the longitudinal chain d^4 s / dt^4 = u_long.
  next.s = x.s + x.s_dot * dt + x.s_ddot * dt2 / 2.0 + x.s_dddot * dt3 / 6.0 +
           u.u_long * dt4 / 24.0;
  next.s_dot = x.s_dot + x.s_ddot * dt + x.s_dddot * dt2 / 2.0 + u.u_long * dt3 / 6.0;
  next.s_ddot = x.s_ddot + x.s_dddot * dt + u.u_long * dt2 / 2.0;
  next.s_dddot = x.s_dddot + u.u_long * dt;
  // Exact ZOH of the lateral double integrator d^2 d / dt^2 = u_lat.
  next.d = x.d + x.d_dot * dt + u.u_lat * dt2 / 2.0;
  next.d_dot = x.d_dot + u.u_lat * dt;
  next.theta = std::atan2(next.d_dot, std::max(next.s_dot, 1e-9));
  next.t_index = x.t_index + 1;
  return next;
}

Trajectory rollout(const State& x0, const std::vector<Input>& inputs, double dt) {
  Trajectory traj;
  traj.states.reserve(inputs.size() + 1);
  traj.inputs = inputs;
  traj.states.push_back(x0);
  for (const Input& u : inputs) {
    traj.states.push_back(step_dynamics(traj.states.back(), u, dt));
  }
  return traj;
}

CurvilinearPoint cartesian_to_curvilinear(double x, double y, const RoadModel& road) {
  const auto& path = road.reference_path;
  if (path.size() < 2) throw ProjectionError("reference path needs at least two points");

  double best_dist2 = std::numeric_limits<double>::infinity();
  double second_dist2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double best_d = 0.0;
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double ax = path[i].first, ay = path[i].second;
    const double bx = path[i + 1].first, by = path[i + 1].second;
    const double ex = bx - ax, ey = by - ay;
    const double seg_len2 = ex * ex + ey * ey;
    if (seg_len2 <= 0.0) continue;
    const double seg_len = std::sqrt(seg_len2);
    const double t = clamp(((x - ax) * ex + (y - ay) * ey) / seg_len2, 0.0, 1.0);
    const double px = ax + t * ex, py = ay + t * ey;
    const double dx = x - px, dy = y - py;
    const double dist2 = dx * dx + dy * dy;
    // signed offset: positive to the left of the path direction
    const double cross = ex * dy - ey * dx;
    const double s_here = arc + t * seg_len;
    if (dist2 < best_dist2 - kProjectionTieTol) {
      second_dist2 = best_dist2;
      best_dist2 = dist2;
      best_s = s_here;
      best_d = (cross >= 0.0 ? 1.0 : -1.0) * std::sqrt(dist2);
    } else if (std::abs(dist2 - best_dist2) <= kProjectionTieTol) {
      // Equal-distance projection: shared polyline vertices tie exactly and are
      // resolved toward smaller s; distinct feet are ambiguous.
      const double foot_gap = std::abs(s_here - best_s);
      if (foot_gap > seg_len * 1e-6 && t > 0.0) {
        const double px0 = ax, py0 = ay;
        const double gap2 = (px - px0) * (px - px0) + (py - py0) * (py - py0);
        if (gap2 > kProjectionTieTol) {
          throw ProjectionError("ambiguous projection onto reference path");
        }
      }
    } else {
      second_dist2 = std::min(second_dist2, dist2);
    }
    arc += seg_len;
  }
  (void)second_dist2;
  return {best_s, best_d};
}

std::pair<double, double> curvilinear_to_cartesian(double s, double d, const RoadModel& road) {
  const auto& path = road.reference_path;
  if (path.size() < 2) throw ProjectionError("reference path needs at least two points");
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double ax = path[i].first, ay = path[i].second;
    const double bx = path[i + 1].first, by = path[i + 1].second;
    const double seg_len = std::hypot(bx - ax, by - ay);
    if (seg_len <= 0.0) continue;
    if (s <= arc + seg_len || i + 2 == path.size()) {
      const double t = (s - arc) / seg_len;
      const double ex = (bx - ax) / seg_len, ey = (by - ay) / seg_len;
      // left normal
      const double nx = -ey, ny = ex;
      return {ax + t * (bx - ax) + d * nx, ay + t * (by - ay) + d * ny};
    }
    arc += seg_len;
  }
  return {0.0, 0.0};
}

std::vector<ScenarioViolation> validate_scenario(const Scenario& sc) {
  std::vector<ScenarioViolation> out;
  const auto add = [&out](std::string code, std::string detail) {
    out.push_back({std::move(code), std::move(detail)});
  };

  if (sc.dt <= 0.0) add("NonPositiveDt", "dt must be > 0");
  if (sc.horizon < 1) add("NonPositiveHorizon", "horizon must be >= 1");
  if (sc.road.reference_path.size() < 2) add("DegeneratePath", "reference path too short");

  const double path_len = sc.road.path_length();
  for (double sl : sc.road.stop_lines) {
    if (sl < 0.0 || sl > path_len) add("StopLineOutOfDomain", "stop line at s=" + std::to_string(sl));
  }
  for (const auto& ca : sc.road.conflict_areas) {
    if (ca.ego_interval.lo < 0.0 || ca.ego_interval.hi > path_len ||
        ca.ego_interval.lo > ca.ego_interval.hi) {
      add("ConflictAreaOutOfDomain", ca.obstacle);
    }
    if (sc.find_obstacle(ca.obstacle) == nullptr) add("ConflictAreaUnknownObstacle", ca.obstacle);
  }

  // lane_right < lane_left over the path domain, sampled at profile breakpoints
  const double lr_max = sc.road.lane_right.max_value();
  const double ll_min = sc.road.lane_left.min_value();
  if (!sc.road.lane_left.pieces.empty() && !sc.road.lane_right.pieces.empty() && lr_max >= ll_min) {
    add("LaneBoundsInverted", "lane_right >= lane_left somewhere");
  }

  const auto check_traj = [&](const Trajectory& t, const std::string& who) {
    if (t.states.size() != t.inputs.size() + 1) {
      add("LengthMismatch", who + ": states != inputs + 1");
      return;
    }
    if (static_cast<int>(t.inputs.size()) != sc.horizon) {
      add("HorizonMismatch", who + ": horizon differs from scenario");
    }
  };
  check_traj(sc.ego_trajectory, "ego");
  for (const auto& o : sc.obstacles) check_traj(o.trajectory, o.id);

  if (!sc.ego_trajectory.states.empty()) {
    const State& x0 = sc.ego_trajectory.states.front();
    if (x0.s != sc.ego_initial.s || x0.s_dot != sc.ego_initial.s_dot ||
        x0.d != sc.ego_initial.d) {
      add("InitialStateMismatch", "ego trajectory does not start at ego_initial");
    }
    if (!trajectory_consistent(sc.ego_trajectory, sc.dt)) {
      add("DynamicsInconsistent", "ego trajectory violates step dynamics");
    }
  }
  if (!sc.rule_relevant_obstacle.empty() && sc.find_obstacle(sc.rule_relevant_obstacle) == nullptr) {
    add("UnknownRelevantObstacle", sc.rule_relevant_obstacle);
  }
  return out;
}

bool trajectory_consistent(const Trajectory& traj, double dt, double tol) {
  if (traj.states.size() != traj.inputs.size() + 1) return false;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const State pred = step_dynamics(traj.states[k], traj.inputs[k], dt);
    const State& got = traj.states[k + 1];
    if (std::abs(pred.s - got.s) > tol || std::abs(pred.s_dot - got.s_dot) > tol ||
        std::abs(pred.s_ddot - got.s_ddot) > tol || std::abs(pred.s_dddot - got.s_dddot) > tol ||
        std::abs(pred.d - got.d) > tol || std::abs(pred.d_dot - got.d_dot) > tol) {
      return false;
    }
  }
  return true;
}

}  // namespace rulerepair
