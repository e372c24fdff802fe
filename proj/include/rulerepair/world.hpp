#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rulerepair {

/// Vehicle state in curvilinear coordinates along the reference path.
/// Longitudinal chain: s, s_dot, s_ddot, s_dddot (driven by the snap input),
/// lateral chain: d, d_dot (driven by the lateral acceleration input).
struct State {
  double s = 0.0;        // longitudinal position [m]
  double s_dot = 0.0;    // longitudinal velocity [m/s]
  double s_ddot = 0.0;   // longitudinal acceleration [m/s^2]
  double s_dddot = 0.0;  // longitudinal jerk [m/s^3]
  double d = 0.0;        // lateral offset, left of path positive [m]
  double d_dot = 0.0;    // lateral velocity [m/s]
  double theta = 0.0;    // orientation relative to path [rad]
  int t_index = 0;       // discrete time step k

  double front_s(double length) const { return s + 0.5 * length; }
  double rear_s(double length) const { return s - 0.5 * length; }
};

struct Input {
  double u_long = 0.0;  // input of the longitudinal integrator chain [m/s^4]
  double u_lat = 0.0;   // lateral acceleration [m/s^2]
};

struct Trajectory {
  std::vector<State> states;  // k in [0, h]
  std::vector<Input> inputs;  // k in [0, h-1]

  int horizon() const { return static_cast<int>(inputs.size()); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

/// Piecewise-constant profile over arc length, e.g. speed limits.
/// Breakpoints are (s, value): value holds from s until the next breakpoint.
struct PiecewiseProfile {
  std::vector<std::pair<double, double>> pieces;

  double at(double s) const;
  double max_value() const;
  double min_value() const;
};

/// Conflict region between the ego path and a crossing obstacle's path.
/// Both intervals are longitudinal, each in the respective vehicle's frame.
struct ConflictArea {
  std::string obstacle;
  Interval ego_interval;
  Interval obs_interval;
};

struct RoadModel {
  std::vector<std::pair<double, double>> reference_path;  // Cartesian polyline
  PiecewiseProfile lane_left;    // left lane bound offset d(s) [m]
  PiecewiseProfile lane_right;   // right lane bound offset d(s) [m]
  PiecewiseProfile road_left;    // left road boundary offset d(s) [m]
  PiecewiseProfile road_right;   // right road boundary offset d(s) [m]
  std::vector<double> stop_lines;
  PiecewiseProfile speed_limit;
  std::vector<ConflictArea> conflict_areas;
  std::optional<Interval> intersection_interval;

  double path_length() const;
  const ConflictArea* conflict_area_for(const std::string& obstacle_id) const;
};

/// Which curvilinear frame an obstacle trajectory is expressed in.
enum class ObstacleFrame { kEgo, kCrossing };

struct Obstacle {
  std::string id;
  Trajectory trajectory;
  double length = 4.5;
  double width = 1.8;
  ObstacleFrame frame = ObstacleFrame::kEgo;
};

/// Per-step admissible boxes. Constant over the horizon.
struct StateBounds {
  Interval s_dot{0.0, 60.0};
  Interval s_ddot{-10.0, 8.0};
  Interval s_dddot{-30.0, 30.0};
  Interval d_dot{-4.0, 4.0};
};

struct InputBounds {
  Interval u_long{-300.0, 300.0};
  Interval u_lat{-6.0, 6.0};
};

/// Static rule context supplied by the scenario (no perception model).
struct RuleContext {
  bool at_traffic_sign_stop = false;
  bool relevant_traffic_light = false;
  bool has_priority_conflict = false;
};

struct Scenario {
  RoadModel road;
  State ego_initial;
  Trajectory ego_trajectory;  // the planner's initial trajectory
  std::vector<Obstacle> obstacles;
  double ego_length = 4.5;
  double ego_width = 1.8;
  double dt = 0.2;
  int horizon = 20;
  StateBounds state_bounds;
  InputBounds input_bounds;
  RuleContext context;
  std::string rule_relevant_obstacle;  // empty: first obstacle, if any
  std::string name;

  const Obstacle* relevant_obstacle() const;
  const Obstacle* find_obstacle(const std::string& id) const;
};

/// Exact zero-order-hold step of the decoupled integrator chains.
State step_dynamics(const State& x, const Input& u, double dt);

/// Simulates a full trajectory from an initial state and input sequence.
Trajectory rollout(const State& x0, const std::vector<Input>& inputs, double dt);

struct CurvilinearPoint {
  double s = 0.0;
  double d = 0.0;
};

class ProjectionError : public std::exception {
 public:
  explicit ProjectionError(std::string what) : what_(std::move(what)) {}
  const char* what() const noexcept override { return what_.c_str(); }

 private:
  std::string what_;
};

/// Projects a Cartesian point onto the reference path. Throws ProjectionError
/// when two segments yield equal-distance projections beyond tolerance.
CurvilinearPoint cartesian_to_curvilinear(double x, double y, const RoadModel& road);

/// Inverse map: curvilinear (s, d) to Cartesian coordinates.
std::pair<double, double> curvilinear_to_cartesian(double s, double d, const RoadModel& road);

struct ScenarioViolation {
  std::string code;
  std::string detail;
};

/// Checks all scenario invariants; empty result means the scenario is valid.
std::vector<ScenarioViolation> validate_scenario(const Scenario& sc);

/// True when every consecutive state pair matches step_dynamics within tol.
bool trajectory_consistent(const Trajectory& traj, double dt, double tol = 1e-9);

}  // namespace rulerepair
