#include "rulerepair/mpr.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rulerepair {

namespace {

constexpr double kRobEps = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, int k, std::uint64_t salt) {
  return splitmix64(splitmix64(seed ^ (0x51ed2700u + static_cast<std::uint64_t>(k))) ^ salt);
}

// quartic longitudinal connection: fixed (s0, v0, a0), terminal (v_T, a_T = 0)
struct Quartic {
  double c0, c1, c2, c3, c4;

  double pos(double t) const { return c0 + t * (c1 + t * (c2 + t * (c3 + t * c4))); }
  double vel(double t) const { return c1 + t * (2 * c2 + t * (3 * c3 + t * 4 * c4)); }
  double acc(double t) const { return 2 * c2 + t * (6 * c3 + t * 12 * c4); }
  double jerk(double t) const { return 6 * c3 + 24 * c4 * t; }
  double snap() const { return 24 * c4; }
};

Quartic solve_quartic(double s0, double v0, double a0, double v_t, double T) {
  Quartic q{s0, v0, a0 / 2.0, 0.0, 0.0};
  // v(T) = c1 + 2 c2 T + 3 c3 T^2 + 4 c4 T^3 = v_t
  // a(T) = 2 c2 + 6 c3 T + 12 c4 T^2 = 0
  const double T2 = T * T;
  const double r1 = v_t - v0 - a0 * T;
  const double r2 = -a0;
  const double det = 3 * T2 * 12 * T2 - 4 * T * T2 * 6 * T;  // 12 T^4
  q.c3 = (r1 * 12 * T2 - r2 * 4 * T * T2) / det;
  q.c4 = (r2 * 3 * T2 - r1 * 6 * T) / det;
  return q;
}

// quintic lateral connection: fixed (d0, dd0, 0), terminal (d_T, dd_T, 0)
struct Quintic {
  double c0, c1, c2, c3, c4, c5;

  double pos(double t) const {
    return c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
  }
  double vel(double t) const {
    return c1 + t * (2 * c2 + t * (3 * c3 + t * (4 * c4 + t * 5 * c5)));
  }
  double acc(double t) const {
    return 2 * c2 + t * (6 * c3 + t * (12 * c4 + t * 20 * c5));
  }
};

Quintic solve_quintic(double d0, double dd0, double d_t, double dd_t, double T) {
  Quintic q{d0, dd0, 0.0, 0.0, 0.0, 0.0};
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  // remaining conditions: pos(T), vel(T), acc(T) = (d_t, dd_t, 0)
  const double b1 = d_t - (d0 + dd0 * T);
  const double b2 = dd_t - dd0;
  const double b3 = 0.0;
  // [T3 T4 T5; 3T2 4T3 5T4; 6T 12T2 20T3] [c3 c4 c5]' = [b1 b2 b3]'
  const double m00 = T3, m01 = T4, m02 = T5;
  const double m10 = 3 * T2, m11 = 4 * T3, m12 = 5 * T4;
  const double m20 = 6 * T, m21 = 12 * T2, m22 = 20 * T3;
  const double det = m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) +
                     m02 * (m10 * m21 - m11 * m20);
  q.c3 = (b1 * (m11 * m22 - m12 * m21) - m01 * (b2 * m22 - b3 * m12) +
          m02 * (b2 * m21 - b3 * m11)) /
         det;
  q.c4 = (m00 * (b2 * m22 - b3 * m12) - b1 * (m10 * m22 - m12 * m20) +
          m02 * (m10 * b3 - b2 * m20)) /
         det;
  q.c5 = (m00 * (m11 * b3 - m21 * b2) - m01 * (m10 * b3 - m20 * b2) +
          b1 * (m10 * m21 - m11 * m20)) /
         det;
  return q;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

}  // namespace

std::vector<State> sample_futures(const Scenario& sc, int k, const SampleConfig& cfg,
                                  std::uint64_t salt, SampleDiagnostics* diag) {
  if (k < 0 || k >= static_cast<int>(sc.ego_trajectory.states.size())) throw HorizonExceeded();
  const State& x = sc.ego_trajectory.states[static_cast<std::size_t>(k)];

  const int n_steps = std::max(1, static_cast<int>(std::ceil(cfg.horizon_pred / sc.dt)));
  const double T = n_steps * sc.dt;
  const bool low_speed = x.s_dot < cfg.v_switch;
  const double d_window = low_speed ? cfg.d_window_low : cfg.d_window_high;
  const double dd_window = low_speed ? cfg.d_dot_window_low : cfg.d_dot_window_high;

  std::mt19937_64 rng(stream_seed(cfg.rng_seed, k, salt));
  std::vector<State> samples;
  samples.reserve(static_cast<std::size_t>(cfg.n_samples));

  const auto& xb = sc.state_bounds;
  const auto& ub = sc.input_bounds;
  int drawn = 0;
  const int max_draws = cfg.n_samples * 10;
  while (static_cast<int>(samples.size()) < cfg.n_samples && drawn < max_draws) {
    ++drawn;
    const double v_t =
        uniform(rng, std::max(0.0, x.s_dot - cfg.v_window), x.s_dot + cfg.v_window);
    const double d_t = uniform(rng, x.d - d_window, x.d + d_window);
    const double dd_t = uniform(rng, -dd_window, dd_window);

    const Quartic lon = solve_quartic(x.s, x.s_dot, x.s_ddot, v_t, T);
    const Quintic lat = solve_quintic(x.d, x.d_dot, d_t, dd_t, T);

    // feasibility at step resolution
    bool ok = std::abs(lon.snap()) <= ub.u_long.hi && lon.snap() >= ub.u_long.lo;
    for (int j = 0; j <= n_steps && ok; ++j) {
      const double t = j * sc.dt;
      const double v = lon.vel(t);
      const double a = lon.acc(t);
      const double jj = lon.jerk(t);
      ok = v >= xb.s_dot.lo - 1e-9 && v <= xb.s_dot.hi + 1e-9 && xb.s_ddot.contains(a) &&
           xb.s_dddot.contains(jj);
      if (ok && j < n_steps) {
        const double ul = lat.acc(t);
        ok = ul >= ub.u_lat.lo - 1e-9 && ul <= ub.u_lat.hi + 1e-9;
      }
    }
    if (!ok) continue;

    State terminal;
    terminal.t_index = k + n_steps;
    terminal.s = lon.pos(T);
    terminal.s_dot = lon.vel(T);
    terminal.s_ddot = lon.acc(T);
    terminal.s_dddot = lon.jerk(T);
    if (low_speed) {
      // lateral motion follows longitudinal progress; no progress, no offset
      const double travel = lon.pos(T) - x.s;
      const double frac = std::clamp(travel / (cfg.v_switch * T), 0.0, 1.0);
      terminal.d = x.d + (lat.pos(T) - x.d) * frac;
      terminal.d_dot = lat.vel(T) * frac;
    } else {
      terminal.d = lat.pos(T);
      terminal.d_dot = lat.vel(T);
    }
    terminal.theta = std::atan2(terminal.d_dot, std::max(terminal.s_dot, 1e-9));
    samples.push_back(terminal);
  }
  if (diag != nullptr) {
    diag->requested = cfg.n_samples;
    diag->produced = static_cast<int>(samples.size());
  }
  return samples;
}

RobustnessEstimate mpr_robustness(const std::string& pred_id, const Scenario& sc, int k,
                                  const std::string& obstacle, const SampleConfig& cfg,
                                  const PredicateCatalog& catalog) {
  RobustnessEstimate est;
  est.truth = catalog.eval(pred_id, sc, k, obstacle).truth;

  SampleConfig salted = cfg;
  const std::uint64_t salt = std::hash<std::string>{}(pred_id);
  SampleDiagnostics diag;
  const std::vector<State> samples = sample_futures(sc, k, salted, salt, &diag);

  int compliant = 0;
  for (const State& terminal : samples) {
    if (catalog.eval_state(pred_id, sc, terminal, terminal.t_index, obstacle).truth) {
      ++compliant;
    }
  }
  est.compliant_count = compliant;
  est.total_count = static_cast<int>(samples.size());
  if (est.total_count == 0) {
    est.value = est.truth ? kRobEps : -kRobEps;
    return est;
  }
  if (est.truth) {
    est.value = static_cast<double>(compliant) / est.total_count;
    if (est.value == 0.0) est.value = kRobEps;
  } else {
    est.value = -static_cast<double>(est.total_count - compliant) / est.total_count;
    if (est.value == 0.0) est.value = -kRobEps;
  }
  return est;
}

MprSignal::MprSignal(const Scenario& sc, const SampleConfig& cfg, PredicateCatalog catalog)
    : sc_(sc), cfg_(cfg), catalog_(std::move(catalog)) {
  const Obstacle* obs = sc.relevant_obstacle();
  if (obs != nullptr) obstacle_ = obs->id;
}

int MprSignal::length() const { return static_cast<int>(sc_.ego_trajectory.states.size()); }

bool MprSignal::eval(const std::string& pred_id, int k) const {
  return catalog_.eval(pred_id, sc_, k, obstacle_).truth;
}

double MprSignal::rob(const std::string& pred_id, int k) const {
  const auto key = std::make_pair(pred_id, k);
  const auto it = cache_.find(key);
  if (it != cache_.end()) return it->second.value;
  const RobustnessEstimate est = mpr_robustness(pred_id, sc_, k, obstacle_, cfg_, catalog_);
  cache_.emplace(key, est);
  return est.value;
}

double proposition_robustness(const Proposition& prop, const Scenario& sc, int window_start,
                              const SampleConfig& cfg, const PredicateCatalog& catalog) {
  MprSignal sig(sc, cfg, catalog);
  return proposition_robustness(prop, sig, window_start);
}

double proposition_robustness(const Proposition& prop, const SignalView& sig, int window_start) {
  return robustness(prop.subformula, sig, window_start);
}

std::map<std::string, double> extract_features(const Scenario& sc, int k,
                                               const std::string& pred_id,
                                               const std::string& obstacle,
                                               const PredicateCatalog& catalog) {
  std::map<std::string, double> f;
  const State& ego = sc.ego_trajectory.states.at(static_cast<std::size_t>(k));
  const PredicateResult pr = catalog.eval(pred_id, sc, k, obstacle);
  const bool intersection = sc.road.intersection_interval.has_value();

  f["characteristic"] = pr.truth ? 1.0 : -1.0;
  f["ego_length"] = sc.ego_length;
  f["ego_width"] = sc.ego_width;
  f["ego_s"] = ego.s;
  f["ego_s_dot"] = ego.s_dot;
  f["ego_s_ddot"] = ego.s_ddot;
  f["ego_d"] = ego.d;
  f["ego_d_dot"] = ego.d_dot;
  f["ego_dist_lane_left"] = sc.road.lane_left.at(ego.s) - (ego.d + sc.ego_width / 2.0);
  f["ego_dist_lane_right"] = (ego.d - sc.ego_width / 2.0) - sc.road.lane_right.at(ego.s);
  if (intersection) {
    const Interval& iv = *sc.road.intersection_interval;
    f["ego_s_entry"] = iv.lo - ego.s;
    f["ego_s_exit"] = iv.hi - ego.s;
    double nearest = 1e9;
    for (double sl : sc.road.stop_lines) nearest = std::min(nearest, sl - ego.s);
    f["ego_s_stop"] = sc.road.stop_lines.empty() ? 1e3 : nearest;
  } else {
    f["ego_dist_road_left"] = sc.road.road_left.at(ego.s) - (ego.d + sc.ego_width / 2.0);
    f["ego_dist_road_right"] = (ego.d - sc.ego_width / 2.0) - sc.road.road_right.at(ego.s);
  }

  const Obstacle* obs =
      obstacle.empty() ? sc.relevant_obstacle() : sc.find_obstacle(obstacle);
  if (obs != nullptr && catalog.def(pred_id).arity == PredicateArity::kEgoObstacle) {
    const State xo = obstacle_state_at(*obs, k, sc.dt);
    f["obs_length"] = obs->length;
    f["obs_width"] = obs->width;
    f["obs_s"] = xo.s;
    f["obs_s_dot"] = xo.s_dot;
    f["obs_d"] = xo.d;
    f["rel_s_ego"] = xo.s - ego.s;
    f["rel_d_ego"] = xo.d - ego.d;
    f["rel_v_s"] = xo.s_dot - ego.s_dot;
    f["rel_v_d"] = xo.d_dot - ego.d_dot;
    if (intersection) {
      const ConflictArea* ca = sc.road.conflict_area_for(obs->id);
      if (ca != nullptr) {
        f["obs_s_entry"] = ca->obs_interval.lo - xo.s;
        f["obs_s_exit"] = ca->obs_interval.hi - xo.s;
      }
    }
  }
  return f;
}

}  // namespace rulerepair
