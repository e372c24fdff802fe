#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rulerepair/engine.hpp"

namespace rulerepair {

namespace {

using nlohmann::json;

PiecewiseProfile profile_from(const json& j, double fallback) {
  PiecewiseProfile p;
  if (j.is_null()) {
    p.pieces.emplace_back(0.0, fallback);
  } else if (j.is_number()) {
    p.pieces.emplace_back(0.0, j.get<double>());
  } else {
    for (const auto& piece : j) {
      p.pieces.emplace_back(piece.at(0).get<double>(), piece.at(1).get<double>());
    }
  }
  return p;
}

json profile_to(const PiecewiseProfile& p) {
  if (p.pieces.size() == 1 && p.pieces.front().first == 0.0) return p.pieces.front().second;
  json j = json::array();
  for (const auto& [s, v] : p.pieces) j.push_back({s, v});
  return j;
}

State state_from(const json& j) {
  State x;
  x.s = j.value("s", 0.0);
  x.s_dot = j.value("s_dot", 0.0);
  x.s_ddot = j.value("s_ddot", 0.0);
  x.s_dddot = j.value("s_dddot", 0.0);
  x.d = j.value("d", 0.0);
  x.d_dot = j.value("d_dot", 0.0);
  x.theta = j.value("theta", 0.0);
  x.t_index = j.value("k", 0);
  return x;
}

json state_to(const State& x) {
  return json{{"s", x.s},         {"s_dot", x.s_dot}, {"s_ddot", x.s_ddot},
              {"s_dddot", x.s_dddot}, {"d", x.d},     {"d_dot", x.d_dot},
              {"theta", x.theta}, {"k", x.t_index}};
}

Trajectory trajectory_from(const json& j, const State& x0, double dt) {
  Trajectory t;
  if (j.contains("inputs")) {
    std::vector<Input> inputs;
    for (const auto& u : j.at("inputs")) {
      inputs.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
    }
    t = rollout(x0, inputs, dt);
  } else if (j.contains("states")) {
    for (const auto& s : j.at("states")) t.states.push_back(state_from(s));
    if (j.contains("inputs_explicit")) {
      for (const auto& u : j.at("inputs_explicit")) {
        t.inputs.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
      }
    } else {
      t.inputs.assign(t.states.empty() ? 0 : t.states.size() - 1, Input{});
    }
  }
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    t.states[k].t_index = static_cast<int>(k);
  }
  return t;
}

Interval interval_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  Scenario sc;
  sc.dt = j.at("dt").get<double>();
  sc.horizon = j.at("horizon").get<int>();
  sc.name = j.value("name", "");

  const json& road = j.at("road");
  if (road.contains("reference_path")) {
    for (const auto& pt : road.at("reference_path")) {
      sc.road.reference_path.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    }
  } else {
    const double len = road.value("length", 200.0);
    sc.road.reference_path = {{0.0, 0.0}, {len, 0.0}};
  }
  sc.road.lane_left = profile_from(road.value("lane_left", json(nullptr)), 1.75);
  sc.road.lane_right = profile_from(road.value("lane_right", json(nullptr)), -1.75);
  sc.road.road_left = profile_from(road.value("road_left", json(nullptr)), 3.5);
  sc.road.road_right = profile_from(road.value("road_right", json(nullptr)), -3.5);
  sc.road.speed_limit = profile_from(road.value("speed_limit", json(nullptr)), 50.0);
  if (road.contains("stop_lines")) {
    for (const auto& sl : road.at("stop_lines")) sc.road.stop_lines.push_back(sl.get<double>());
  }
  if (road.contains("intersection")) {
    sc.road.intersection_interval = interval_from(road.at("intersection"));
  }
  if (road.contains("conflict_areas")) {
    for (const auto& ca : road.at("conflict_areas")) {
      sc.road.conflict_areas.push_back({ca.at("obstacle").get<std::string>(),
                                        interval_from(ca.at("ego_interval")),
                                        interval_from(ca.at("obs_interval"))});
    }
  }

  const json& ego = j.at("ego");
  sc.ego_length = ego.value("length", 4.5);
  sc.ego_width = ego.value("width", 1.8);
  sc.ego_initial = state_from(ego.at("initial"));
  sc.ego_trajectory = trajectory_from(ego.at("trajectory"), sc.ego_initial, sc.dt);

  if (j.contains("obstacles")) {
    for (const auto& jo : j.at("obstacles")) {
      Obstacle o;
      o.id = jo.at("id").get<std::string>();
      o.length = jo.value("length", 4.5);
      o.width = jo.value("width", 1.8);
      o.frame = jo.value("frame", std::string("ego")) == "crossing" ? ObstacleFrame::kCrossing
                                                                    : ObstacleFrame::kEgo;
      const State x0 = jo.contains("initial") ? state_from(jo.at("initial")) : State{};
      o.trajectory = trajectory_from(jo.at("trajectory"), x0, sc.dt);
      sc.obstacles.push_back(std::move(o));
    }
  }
  sc.rule_relevant_obstacle = j.value("rule_relevant_obstacle", "");

  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    if (b.contains("state")) {
      const json& s = b.at("state");
      if (s.contains("s_dot")) sc.state_bounds.s_dot = interval_from(s.at("s_dot"));
      if (s.contains("s_ddot")) sc.state_bounds.s_ddot = interval_from(s.at("s_ddot"));
      if (s.contains("s_dddot")) sc.state_bounds.s_dddot = interval_from(s.at("s_dddot"));
      if (s.contains("d_dot")) sc.state_bounds.d_dot = interval_from(s.at("d_dot"));
    }
    if (b.contains("input")) {
      const json& u = b.at("input");
      if (u.contains("u_long")) sc.input_bounds.u_long = interval_from(u.at("u_long"));
      if (u.contains("u_lat")) sc.input_bounds.u_lat = interval_from(u.at("u_lat"));
    }
  }

  if (j.contains("context")) {
    const json& c = j.at("context");
    sc.context.at_traffic_sign_stop = c.value("at_traffic_sign_stop", false);
    sc.context.relevant_traffic_light = c.value("relevant_traffic_light", false);
    sc.context.has_priority_conflict = c.value("has_priority_conflict", false);
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json_text(buffer.str());
}

std::string scenario_to_json_text(const Scenario& sc) {
  json j;
  j["dt"] = sc.dt;
  j["horizon"] = sc.horizon;
  j["name"] = sc.name;
  json road;
  road["reference_path"] = json::array();
  for (const auto& [x, y] : sc.road.reference_path) road["reference_path"].push_back({x, y});
  road["lane_left"] = profile_to(sc.road.lane_left);
  road["lane_right"] = profile_to(sc.road.lane_right);
  road["road_left"] = profile_to(sc.road.road_left);
  road["road_right"] = profile_to(sc.road.road_right);
  road["speed_limit"] = profile_to(sc.road.speed_limit);
  road["stop_lines"] = sc.road.stop_lines;
  if (sc.road.intersection_interval) {
    road["intersection"] = {sc.road.intersection_interval->lo, sc.road.intersection_interval->hi};
  }
  if (!sc.road.conflict_areas.empty()) {
    road["conflict_areas"] = json::array();
    for (const auto& ca : sc.road.conflict_areas) {
      road["conflict_areas"].push_back(
          {{"obstacle", ca.obstacle},
           {"ego_interval", {ca.ego_interval.lo, ca.ego_interval.hi}},
           {"obs_interval", {ca.obs_interval.lo, ca.obs_interval.hi}}});
    }
  }
  j["road"] = road;

  json ego;
  ego["length"] = sc.ego_length;
  ego["width"] = sc.ego_width;
  ego["initial"] = state_to(sc.ego_initial);
  json inputs = json::array();
  for (const Input& u : sc.ego_trajectory.inputs) inputs.push_back({u.u_long, u.u_lat});
  ego["trajectory"] = {{"inputs", inputs}};
  j["ego"] = ego;

  j["obstacles"] = json::array();
  for (const auto& o : sc.obstacles) {
    json jo;
    jo["id"] = o.id;
    jo["length"] = o.length;
    jo["width"] = o.width;
    jo["frame"] = o.frame == ObstacleFrame::kCrossing ? "crossing" : "ego";
    jo["initial"] = state_to(o.trajectory.states.empty() ? State{} : o.trajectory.states.front());
    json ostates = json::array();
    for (const State& x : o.trajectory.states) ostates.push_back(state_to(x));
    jo["trajectory"] = {{"states", ostates}};
    j["obstacles"].push_back(jo);
  }
  if (!sc.rule_relevant_obstacle.empty()) j["rule_relevant_obstacle"] = sc.rule_relevant_obstacle;

  j["bounds"] = {
      {"state",
       {{"s_dot", {sc.state_bounds.s_dot.lo, sc.state_bounds.s_dot.hi}},
        {"s_ddot", {sc.state_bounds.s_ddot.lo, sc.state_bounds.s_ddot.hi}},
        {"s_dddot", {sc.state_bounds.s_dddot.lo, sc.state_bounds.s_dddot.hi}},
        {"d_dot", {sc.state_bounds.d_dot.lo, sc.state_bounds.d_dot.hi}}}},
      {"input",
       {{"u_long", {sc.input_bounds.u_long.lo, sc.input_bounds.u_long.hi}},
        {"u_lat", {sc.input_bounds.u_lat.lo, sc.input_bounds.u_lat.hi}}}}};
  j["context"] = {{"at_traffic_sign_stop", sc.context.at_traffic_sign_stop},
                  {"relevant_traffic_light", sc.context.relevant_traffic_light},
                  {"has_priority_conflict", sc.context.has_priority_conflict}};
  return j.dump(2);
}

std::string trajectory_to_json_text(const Trajectory& traj) {
  json j;
  j["states"] = json::array();
  for (const State& x : traj.states) j["states"].push_back(state_to(x));
  j["inputs"] = json::array();
  for (const Input& u : traj.inputs) j["inputs"].push_back({u.u_long, u.u_lat});
  return j.dump(2);
}

std::string outcome_to_json_text(const RepairOutcome& outcome, const Scenario& sc) {
  json j;
  j["scenario"] = sc.name;
  const auto diag_to = [](const RepairDiagnostics& d) {
    json jd;
    jd["tv"] = std::isinf(d.tv) ? json("inf") : json(d.tv);
    jd["rule_tvs"] = json::object();
    for (const auto& rtv : d.rule_tvs) {
      jd["rule_tvs"][rtv.name] = std::isinf(rtv.tv) ? json("inf") : json(rtv.tv);
    }
    jd["proposition_rho"] = json::array();
    for (const auto& [idx, rho] : d.proposition_rho) {
      jd["proposition_rho"].push_back({{"sigma", idx}, {"rho", rho}});
    }
    jd["wall_ms"] = d.wall_ms;
    jd["stage_ms"] = d.stage_ms;
    jd["iterations"] = json::array();
    for (const auto& rec : d.iterations) {
      json ji{{"iteration", rec.iteration},
              {"valuation", rec.valuation},
              {"outcome", rec.outcome}};
      if (!rec.ttm.empty()) ji["ttm"] = rec.ttm;
      if (std::isfinite(rec.tc)) ji["tc"] = rec.tc;
      jd["iterations"].push_back(ji);
    }
    return jd;
  };

  if (const auto* nv = std::get_if<NoViolation>(&outcome)) {
    j["outcome"] = "no_violation";
    j["diagnostics"] = diag_to(nv->diagnostics);
  } else if (const auto* r = std::get_if<Repaired>(&outcome)) {
    j["outcome"] = "repaired";
    j["k_cut"] = r->k_cut;
    j["iterations"] = r->iterations;
    j["valuation"] = r->valuation.to_string();
    j["diagnostics"] = diag_to(r->diagnostics);
    j["trajectory"] = json::parse(trajectory_to_json_text(r->trajectory));
  } else {
    const auto& inf = std::get<Infeasible>(outcome);
    j["outcome"] = "infeasible";
    j["reason"] = infeasible_reason_name(inf.reason);
    j["detail"] = inf.detail;
    j["diagnostics"] = diag_to(inf.diagnostics);
  }
  return j.dump(2);
}

std::string batch_report_to_json_text(const BatchReport& report) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : report.entries) {
    j["entries"].push_back({{"file", e.file},
                            {"outcome", e.outcome},
                            {"wall_ms", e.wall_ms},
                            {"k_cut", e.k_cut},
                            {"detail", e.detail}});
  }
  j["repaired"] = report.repaired;
  j["no_violation"] = report.no_violation;
  j["infeasible"] = report.infeasible;
  j["errors"] = report.errors;
  j["success_rate"] = report.success_rate();
  j["mean_ms"] = report.mean_ms;
  j["p90_ms"] = report.p90_ms;
  return j.dump(2);
}

}  // namespace rulerepair
