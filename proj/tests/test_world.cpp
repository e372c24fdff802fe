#include "doctest.h"

#include <cmath>
#include <random>

#include "rulerepair/world.hpp"

using namespace rulerepair;

namespace {

// fine Euler sub-stepping of the integrator chains, the independent oracle
// for the exact ZOH step
State euler_oracle(State x, const Input& u, double dt, double sub_dt = 1e-5) {
  const int n = static_cast<int>(std::round(dt / sub_dt));
  for (int i = 0; i < n; ++i) {
    State next = x;
    next.s += x.s_dot * sub_dt;
    next.s_dot += x.s_ddot * sub_dt;
    next.s_ddot += x.s_dddot * sub_dt;
    next.s_dddot += u.u_long * sub_dt;
    next.d += x.d_dot * sub_dt;
    next.d_dot += u.u_lat * sub_dt;
    x = next;
  }
  return x;
}

RoadModel straight_road(double length = 100.0) {
  RoadModel road;
  road.reference_path = {{0.0, 0.0}, {length, 0.0}};
  road.lane_left.pieces = {{0.0, 1.75}};
  road.lane_right.pieces = {{0.0, -1.75}};
  road.road_left.pieces = {{0.0, 3.5}};
  road.road_right.pieces = {{0.0, -3.5}};
  road.speed_limit.pieces = {{0.0, 30.0}};
  return road;
}

}  // namespace

TEST_CASE("step_dynamics equilibrium and constant velocity") {
  State zero;
  const State still = step_dynamics(zero, {0.0, 0.0}, 0.2);
  CHECK(still.s == 0.0);
  CHECK(still.s_dot == 0.0);
  CHECK(still.d == 0.0);
  CHECK(still.t_index == 1);

  State moving;
  moving.s_dot = 10.0;
  const State next = step_dynamics(moving, {0.0, 0.0}, 0.2);
  CHECK(next.s == doctest::Approx(2.0));
  CHECK(next.s_dot == doctest::Approx(10.0));
}

TEST_CASE("step_dynamics matches fine Euler sub-stepping for a pure input") {
  // expected values computed with the Euler oracle at sub_dt = 1e-5 and
  // frozen: exact ZOH of the chain driven at the fourth derivative
  State zero;
  const Input u{6.0, 0.0};
  const State got = step_dynamics(zero, u, 0.2);
  const State want = euler_oracle(zero, u, 0.2);
  CHECK(got.s_dddot == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(got.s_ddot == doctest::Approx(0.12).epsilon(1e-3));
  CHECK(got.s_dot == doctest::Approx(0.008).epsilon(1e-3));
  CHECK(got.s == doctest::Approx(0.0004).epsilon(1e-3));
  CHECK(got.s_ddot == doctest::Approx(want.s_ddot).epsilon(1e-4));
  CHECK(got.s_dot == doctest::Approx(want.s_dot).epsilon(1e-4));
  CHECK(got.s == doctest::Approx(want.s).epsilon(1e-4));
}

TEST_CASE("ZOH exactness: one dt step equals two dt/2 steps") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    State x;
    x.s = dist(rng);
    x.s_dot = dist(rng) + 6.0;
    x.s_ddot = dist(rng);
    x.s_dddot = dist(rng);
    x.d = dist(rng) / 5.0;
    x.d_dot = dist(rng) / 5.0;
    const Input u{dist(rng), dist(rng)};
    const State one = step_dynamics(x, u, 0.2);
    const State two = step_dynamics(step_dynamics(x, u, 0.1), u, 0.1);
    CHECK(one.s == doctest::Approx(two.s).epsilon(1e-12));
    CHECK(one.s_dot == doctest::Approx(two.s_dot).epsilon(1e-12));
    CHECK(one.s_ddot == doctest::Approx(two.s_ddot).epsilon(1e-12));
    CHECK(one.s_dddot == doctest::Approx(two.s_dddot).epsilon(1e-12));
    CHECK(one.d == doctest::Approx(two.d).epsilon(1e-12));
    CHECK(one.d_dot == doctest::Approx(two.d_dot).epsilon(1e-12));
  }
}

TEST_CASE("trajectory invariant accepts exactly rollout-generated trajectories") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  State x0;
  x0.s_dot = 8.0;
  std::vector<Input> inputs;
  for (int k = 0; k < 15; ++k) inputs.push_back({dist(rng), dist(rng) / 3.0});
  Trajectory traj = rollout(x0, inputs, 0.2);
  CHECK(trajectory_consistent(traj, 0.2));
  traj.states[7].s_dot += 1e-6;
  CHECK_FALSE(trajectory_consistent(traj, 0.2));
}

TEST_CASE("curvilinear projection on and beside a straight path") {
  const RoadModel road = straight_road();
  const auto on_path = cartesian_to_curvilinear(5.0, 0.0, road);
  CHECK(on_path.s == doctest::Approx(5.0));
  CHECK(on_path.d == doctest::Approx(0.0));

  const auto left = cartesian_to_curvilinear(5.0, 2.0, road);
  CHECK(left.s == doctest::Approx(5.0));
  CHECK(left.d == doctest::Approx(2.0));
}

TEST_CASE("projection near a right-angle corner picks the nearer segment") {
  RoadModel road;
  road.reference_path = {{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}};

  // brute-force nearest point over a dense sampling of the polyline
  const auto brute = [&road](double px, double py) {
    double best_d2 = 1e18, best_s = 0.0;
    double arc = 0.0;
    for (std::size_t i = 0; i + 1 < road.reference_path.size(); ++i) {
      const auto [ax, ay] = road.reference_path[i];
      const auto [bx, by] = road.reference_path[i + 1];
      const double len = std::hypot(bx - ax, by - ay);
      for (int j = 0; j <= 10000; ++j) {
        const double t = j / 10000.0;
        const double x = ax + t * (bx - ax), y = ay + t * (by - ay);
        const double d2 = (px - x) * (px - x) + (py - y) * (py - y);
        if (d2 < best_d2 - 1e-12) {
          best_d2 = d2;
          best_s = arc + t * len;
        }
      }
      arc += len;
    }
    return best_s;
  };

  const double px = 9.0, py = 2.5;  // nearer to the vertical segment
  const auto got = cartesian_to_curvilinear(px, py, road);
  CHECK(got.s == doctest::Approx(brute(px, py)).epsilon(1e-3));

  // a point on the corner diagonal projects ambiguously onto both segments
  CHECK_THROWS_AS(cartesian_to_curvilinear(8.0, 2.0, road), ProjectionError);
}

TEST_CASE("curvilinear round trip within lane bounds") {
  // piecewise-linear frame: the round trip is exact for points projecting
  // onto segment interiors, so sampling keeps clear of the corner wedges
  RoadModel road;
  road.reference_path = {{0.0, 0.0}, {20.0, 0.0}, {40.0, 8.0}, {60.0, 8.0}};
  const double corner1 = 20.0;
  const double corner2 = 20.0 + std::hypot(20.0, 8.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> s_dist(1.0, 55.0);
  std::uniform_real_distribution<double> d_dist(-1.5, 1.5);
  int tested = 0;
  for (int i = 0; i < 600; ++i) {
    const double s = s_dist(rng);
    const double d = d_dist(rng);
    if (std::abs(s - corner1) < 2.0 || std::abs(s - corner2) < 2.0) continue;
    const auto [x, y] = curvilinear_to_cartesian(s, d, road);
    const auto back = cartesian_to_curvilinear(x, y, road);
    CHECK(back.s == doctest::Approx(s).epsilon(1e-6));
    CHECK(back.d == doctest::Approx(d).epsilon(1e-6));
    ++tested;
  }
  CHECK(tested > 300);
}

TEST_CASE("validate_scenario reports machine-readable codes") {
  Scenario sc;
  sc.road = straight_road();
  sc.dt = 0.2;
  sc.horizon = 10;
  sc.ego_initial.s_dot = 5.0;
  sc.ego_trajectory = rollout(sc.ego_initial, std::vector<Input>(10, Input{}), sc.dt);
  CHECK(validate_scenario(sc).empty());

  SUBCASE("length mismatch") {
    sc.ego_trajectory.states.pop_back();
    bool found = false;
    for (const auto& v : validate_scenario(sc)) found = found || v.code == "LengthMismatch";
    CHECK(found);
  }
  SUBCASE("stop line outside path domain") {
    sc.road.stop_lines.push_back(500.0);
    bool found = false;
    for (const auto& v : validate_scenario(sc)) found = found || v.code == "StopLineOutOfDomain";
    CHECK(found);
  }
  SUBCASE("inconsistent dynamics") {
    sc.ego_trajectory.states[3].s += 0.01;
    bool found = false;
    for (const auto& v : validate_scenario(sc)) found = found || v.code == "DynamicsInconsistent";
    CHECK(found);
  }
}
