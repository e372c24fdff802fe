// Bundled scenario builders shared by the unit tests, the acceptance suite,
// and the scenario-file generator.
#pragma once

#include "rulerepair/engine.hpp"
#include "rulerepair/world.hpp"

namespace fixtures {

using namespace rulerepair;

inline RoadModel straight_road(double length, double speed_limit = 30.0) {
  RoadModel road;
  road.reference_path = {{0.0, 0.0}, {length, 0.0}};
  road.lane_left.pieces = {{0.0, 1.75}};
  road.lane_right.pieces = {{0.0, -1.75}};
  road.road_left.pieces = {{0.0, 5.25}};
  road.road_right.pieces = {{0.0, -3.5}};
  road.speed_limit.pieces = {{0.0, speed_limit}};
  return road;
}

inline Trajectory constant_velocity(double s0, double v, double d, int horizon, double dt) {
  State x0;
  x0.s = s0;
  x0.s_dot = v;
  x0.d = d;
  return rollout(x0, std::vector<Input>(static_cast<std::size_t>(horizon), Input{}), dt);
}

inline void default_bounds(Scenario* sc) {
  sc->state_bounds.s_dot = {0.0, 30.0};
  sc->state_bounds.s_ddot = {-15.0, 6.0};
  sc->state_bounds.s_dddot = {-60.0, 60.0};
  sc->state_bounds.d_dot = {-3.0, 3.0};
  sc->input_bounds.u_long = {-1200.0, 1200.0};
  sc->input_bounds.u_lat = {-5.0, 5.0};
}

/// Stop-line scenario: constant 4.5 m/s toward a stop line at s = 15.6, front
/// crosses at k = 15 without ever standing still.
inline Scenario stopline() {
  Scenario sc;
  sc.name = "stopline";
  sc.dt = 0.2;
  sc.horizon = 40;
  sc.road = straight_road(80.0);
  sc.road.stop_lines = {15.6};
  sc.ego_length = 4.3;
  sc.ego_width = 1.8;
  sc.ego_initial.s_dot = 4.5;
  sc.ego_trajectory = constant_velocity(0.0, 4.5, 0.0, sc.horizon, sc.dt);
  sc.context.at_traffic_sign_stop = true;
  default_bounds(&sc);
  return sc;
}

/// Narrow sampling windows keep the robustness ordering deterministic on the
/// desk-scale stop-line scenario.
inline SampleConfig stopline_mpr() {
  SampleConfig cfg;
  cfg.v_window = 3.0;
  return cfg;
}

/// Highway scenario violating both the safe-distance and the speed-limit
/// rules: ego at 15 m/s closes on a 10 m/s leader (gap below the safe
/// distance at k = 13) and enters a 13 m/s zone at s = 45 (k = 15).
inline Scenario multirule() {
  Scenario sc;
  sc.name = "multirule";
  sc.dt = 0.2;
  sc.horizon = 20;
  sc.road = straight_road(200.0, 20.0);
  sc.road.speed_limit.pieces = {{0.0, 20.0}, {45.0, 13.0}};
  sc.ego_length = 4.5;
  sc.ego_width = 1.8;
  sc.ego_initial.s_dot = 15.0;
  sc.ego_trajectory = constant_velocity(0.0, 15.0, 0.0, sc.horizon, sc.dt);

  Obstacle leader;
  leader.id = "leader";
  leader.length = 4.5;
  leader.width = 1.8;
  leader.trajectory = constant_velocity(29.25, 10.0, 0.0, sc.horizon, sc.dt);
  sc.obstacles.push_back(leader);
  default_bounds(&sc);
  return sc;
}

/// Intersection priority scenario: the ego enters the conflict area while a
/// crossing vehicle with the right of way is about to occupy it.
inline Scenario priority() {
  Scenario sc;
  sc.name = "priority";
  sc.dt = 0.2;
  sc.horizon = 20;
  sc.road = straight_road(100.0);
  sc.road.intersection_interval = Interval{28.5, 48.0};
  sc.ego_length = 4.5;
  sc.ego_width = 1.8;
  sc.ego_initial.s = 12.0;
  sc.ego_initial.s_dot = 10.0;
  sc.ego_trajectory = constant_velocity(12.0, 10.0, 0.0, sc.horizon, sc.dt);

  Obstacle crossing;
  crossing.id = "crossing";
  crossing.length = 4.5;
  crossing.width = 1.8;
  crossing.frame = ObstacleFrame::kCrossing;
  crossing.trajectory = constant_velocity(-4.0, 8.0, 0.0, sc.horizon, sc.dt);
  sc.obstacles.push_back(crossing);

  sc.road.conflict_areas.push_back({"crossing", Interval{31.4, 39.0}, Interval{14.0, 20.0}});
  sc.context.has_priority_conflict = true;
  default_bounds(&sc);
  return sc;
}

/// Compliant cruise: no rule is violated.
inline Scenario compliant() {
  Scenario sc;
  sc.name = "compliant";
  sc.dt = 0.2;
  sc.horizon = 20;
  sc.road = straight_road(150.0, 20.0);
  sc.ego_length = 4.5;
  sc.ego_width = 1.8;
  sc.ego_initial.s_dot = 12.0;
  sc.ego_trajectory = constant_velocity(0.0, 12.0, 0.0, sc.horizon, sc.dt);

  Obstacle leader;
  leader.id = "leader";
  leader.trajectory = constant_velocity(80.0, 12.0, 0.0, sc.horizon, sc.dt);
  sc.obstacles.push_back(leader);
  default_bounds(&sc);
  return sc;
}

/// Speed-limit-only violation, repairable by braking.
inline Scenario speeding() {
  Scenario sc;
  sc.name = "speeding";
  sc.dt = 0.2;
  sc.horizon = 20;
  sc.road = straight_road(150.0, 20.0);
  sc.road.speed_limit.pieces = {{0.0, 20.0}, {40.0, 12.0}};
  sc.ego_length = 4.5;
  sc.ego_width = 1.8;
  sc.ego_initial.s_dot = 16.0;
  sc.ego_trajectory = constant_velocity(0.0, 16.0, 0.0, sc.horizon, sc.dt);
  default_bounds(&sc);
  return sc;
}

/// Safe-distance-only violation with a slower leader.
inline Scenario tailgating() {
  Scenario sc;
  sc.name = "tailgating";
  sc.dt = 0.2;
  sc.horizon = 20;
  sc.road = straight_road(200.0, 30.0);
  sc.ego_length = 4.5;
  sc.ego_width = 1.8;
  sc.ego_initial.s_dot = 14.0;
  sc.ego_trajectory = constant_velocity(0.0, 14.0, 0.0, sc.horizon, sc.dt);

  Obstacle leader;
  leader.id = "leader";
  leader.trajectory = constant_velocity(24.0, 9.0, 0.0, sc.horizon, sc.dt);
  sc.obstacles.push_back(leader);
  default_bounds(&sc);
  return sc;
}

inline std::vector<std::string> rules_for(const Scenario& sc) {
  if (sc.name == "stopline") return {"IN1"};
  if (sc.name == "multirule") return {"G1", "G3"};
  if (sc.name == "priority") return {"IN4s"};
  if (sc.name == "speeding") return {"G3"};
  if (sc.name == "tailgating") return {"G1"};
  return {"G1", "G3"};
}

inline EngineConfig config_for(const Scenario& sc) {
  EngineConfig cfg;
  if (sc.name == "stopline") cfg.mpr = stopline_mpr();
  return cfg;
}

}  // namespace fixtures
