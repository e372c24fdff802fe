// Command-line front end: scenario ingestion, rule selection, repair
// execution, report and plot-data emission.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rulerepair/engine.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitInputError = 3;
constexpr int kExitInternalError = 4;

int log_level() {
  const char* env = std::getenv("RULEREPAIR_LOG");
  if (env == nullptr) return 1;
  const std::string v(env);
  if (v == "debug") return 2;
  if (v == "quiet") return 0;
  return 1;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string velocity_csv(const rulerepair::Trajectory& traj, double dt) {
  std::ostringstream os;
  os << "k,t,s,s_dot,s_ddot,d\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& x = traj.states[k];
    os << k << "," << k * dt << "," << x.s << "," << x.s_dot << "," << x.s_ddot << "," << x.d
       << "\n";
  }
  return os.str();
}

std::string velocity_svg(const rulerepair::Trajectory& initial,
                         const rulerepair::Trajectory& repaired, double dt) {
  const int w = 640, h = 360, margin = 45;
  double v_max = 1.0, t_max = 1.0;
  for (const auto& x : initial.states) v_max = std::max(v_max, x.s_dot);
  for (const auto& x : repaired.states) v_max = std::max(v_max, x.s_dot);
  t_max = dt * static_cast<double>(std::max(initial.states.size(), repaired.states.size()) - 1);
  const auto sx = [&](double t) { return margin + t / t_max * (w - 2 * margin); };
  const auto sy = [&](double v) { return h - margin - v / (1.1 * v_max) * (h - 2 * margin); };
  const auto polyline = [&](const rulerepair::Trajectory& traj, const char* color) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      os << sx(static_cast<double>(k) * dt) << "," << sy(traj.states[k].s_dot) << " ";
    }
    os << "\"/>";
    return os.str();
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
     << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
     << h - margin << "\" stroke=\"black\"/>\n";
  os << polyline(initial, "#888888") << "\n" << polyline(repaired, "#cc3311") << "\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
     << "\" text-anchor=\"middle\" font-size=\"12\">t [s]</text>\n";
  os << "<text x=\"12\" y=\"" << h / 2 << "\" font-size=\"12\">v [m/s]</text>\n";
  os << "<text x=\"" << w - margin << "\" y=\"" << margin
     << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#888888\">initial</text>\n";
  os << "<text x=\"" << w - margin << "\" y=\"" << margin + 16
     << "\" text-anchor=\"end\" font-size=\"12\" fill=\"#cc3311\">repaired</text>\n";
  os << "</svg>\n";
  return os.str();
}

void apply_config_file(const std::string& path, rulerepair::EngineConfig* cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  if (j.contains("mpr")) {
    const auto& m = j.at("mpr");
    cfg->mpr.n_samples = m.value("n_samples", cfg->mpr.n_samples);
    cfg->mpr.horizon_pred = m.value("horizon_pred", cfg->mpr.horizon_pred);
    cfg->mpr.v_window = m.value("v_window", cfg->mpr.v_window);
    cfg->mpr.d_window_high = m.value("d_window_high", cfg->mpr.d_window_high);
    cfg->mpr.d_window_low = m.value("d_window_low", cfg->mpr.d_window_low);
    cfg->mpr.d_dot_window_high = m.value("d_dot_window_high", cfg->mpr.d_dot_window_high);
    cfg->mpr.d_dot_window_low = m.value("d_dot_window_low", cfg->mpr.d_dot_window_low);
    cfg->mpr.v_switch = m.value("v_switch", cfg->mpr.v_switch);
    cfg->mpr.rng_seed = m.value("rng_seed", cfg->mpr.rng_seed);
  }
  if (j.contains("engine")) {
    const auto& e = j.at("engine");
    cfg->max_iterations = e.value("max_iterations", cfg->max_iterations);
    cfg->budget_ms = e.value("budget_ms", cfg->budget_ms);
    cfg->maneuver_fallback = e.value("maneuver_fallback", cfg->maneuver_fallback);
  }
  if (j.contains("reach")) {
    const auto& r = j.at("reach");
    cfg->grid.ds = r.value("ds", cfg->grid.ds);
    cfg->grid.dsdot = r.value("dsdot", cfg->grid.dsdot);
    cfg->grid.dd = r.value("dd", cfg->grid.dd);
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    cfg->weights.w_jerk = w.value("w_jerk", cfg->weights.w_jerk);
    cfg->weights.w_acc = w.value("w_acc", cfg->weights.w_acc);
    cfg->weights.w_dev = w.value("w_dev", cfg->weights.w_dev);
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace rulerepair;
  CLI::App app{"traffic-rule-compliant trajectory repair"};
  app.require_subcommand(1);

  std::string scenario_path, dir_path, out_path, config_path, plot_format, rule_csv = "IN1";
  std::uint64_t seed = 42;
  int max_iter = 16;
  double budget_ms = 1000.0;
  bool dump_cnf = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--rules", rule_csv, "comma-separated rule names");
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "sampling seed");
    cmd->add_option("--out", out_path, "output file (default stdout)");
    cmd->add_option("--max-iter", max_iter, "SMT iteration budget");
    cmd->add_option("--budget-ms", budget_ms, "wall clock budget per repair [ms]");
  };

  CLI::App* cmd_repair = app.add_subcommand("repair", "repair one scenario");
  cmd_repair->add_option("--scenario", scenario_path, "scenario JSON")->required();
  cmd_repair->add_option("--plot", plot_format, "emit plot data: csv or svg");
  cmd_repair->add_flag("--dump-cnf", dump_cnf, "print the abstraction in DIMACS form");
  add_common(cmd_repair);

  CLI::App* cmd_batch = app.add_subcommand("batch", "repair every scenario in a directory");
  cmd_batch->add_option("--dir", dir_path, "scenario directory")->required();
  add_common(cmd_batch);

  CLI::App* cmd_monitor = app.add_subcommand("monitor", "print TV and per-rule robustness");
  cmd_monitor->add_option("--scenario", scenario_path, "scenario JSON")->required();
  add_common(cmd_monitor);

  CLI::App* cmd_abstract = app.add_subcommand("abstract", "print the propositional abstraction");
  cmd_abstract->add_option("--rule", rule_csv, "rule name")->required();
  add_common(cmd_abstract);

  CLI::App* cmd_predicates = app.add_subcommand("predicates", "predicate catalog");
  cmd_predicates->add_flag("--list", dump_cnf, "list catalog entries");

  CLI::App* cmd_dump_reach = app.add_subcommand("dump-reach", "emit reach cells as CSV");
  cmd_dump_reach->add_option("--scenario", scenario_path, "scenario JSON")->required();
  add_common(cmd_dump_reach);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInputError;
  }

  const auto emit = [&](const std::string& text) {
    if (out_path.empty()) {
      std::cout << text << "\n";
    } else {
      write_file(out_path, text);
    }
  };

  std::vector<std::string> rules;
  {
    std::stringstream ss(rule_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) rules.push_back(item);
    }
  }

  try {
    EngineConfig cfg;
    if (!config_path.empty()) apply_config_file(config_path, &cfg);
    cfg.mpr.rng_seed = seed;
    cfg.max_iterations = max_iter;
    cfg.budget_ms = budget_ms;

    if (cmd_predicates->parsed()) {
      const PredicateCatalog catalog;
      std::ostringstream os;
      for (const auto& d : catalog.defs()) {
        os << d.id << "  ["
           << (d.arity == PredicateArity::kEgoObstacle ? "ego-obstacle" : "ego-only") << ", "
           << (d.projectable ? "projectable" : "not projectable") << "]\n    " << d.doc << "\n";
      }
      emit(os.str());
      return kExitOk;
    }

    if (cmd_abstract->parsed()) {
      const auto lib = default_rule_library();
      std::ostringstream os;
      const PredicateCatalog catalog;
      std::vector<std::pair<std::string, Formula>> decomposed;
      for (const std::string& name : rules) {
        const RuleLibraryEntry* entry = find_rule(lib, name);
        if (entry == nullptr) throw std::runtime_error("unknown rule " + name);
        const Formula f = entry->parse_formula(0.2);
        os << name << ": " << print(f) << "\n";
        const Formula nnf = to_nnf(f);
        os << "NNF: " << print(nnf) << "\n";
        const Decomposition dec = decompose(nnf);
        os << "decomposed: " << print(dec.formula) << "\n";
        decomposed.emplace_back(name, dec.formula);
      }
      const AbstractionResult ar = to_cnf_with_rules(decomposed, &catalog);
      os << to_dimacs(ar);
      emit(os.str());
      return kExitOk;
    }

    if (cmd_monitor->parsed()) {
      const Scenario sc = load_scenario(scenario_path);
      const PredicateCatalog catalog(cfg.predicate_params);
      const auto lib = default_rule_library();
      std::vector<std::pair<std::string, Formula>> parsed_rules;
      for (const std::string& name : rules) {
        const RuleLibraryEntry* entry = find_rule(lib, name);
        if (entry == nullptr) throw std::runtime_error("unknown rule " + name);
        parsed_rules.emplace_back(name, entry->parse_formula(sc.dt));
      }
      TraceSignal sig(sc, sc.ego_trajectory, catalog);
      std::ostringstream os;
      double tv_min = kInfTime;
      const auto tvs = per_rule_tv(parsed_rules, sig, 0);
      for (std::size_t i = 0; i < tvs.size(); ++i) {
        tv_min = std::min(tv_min, tvs[i].tv);
        const double rho = robustness(parsed_rules[i].second, sig, 0);
        os << tvs[i].name << ": TV = "
           << (std::isinf(tvs[i].tv) ? "inf" : std::to_string(static_cast<int>(tvs[i].tv)))
           << ", robustness = " << rho << "\n";
      }
      os << "TV = " << (std::isinf(tv_min) ? "inf" : std::to_string(static_cast<int>(tv_min)));
      emit(os.str());
      return kExitOk;
    }

    if (cmd_dump_reach->parsed()) {
      const Scenario sc = load_scenario(scenario_path);
      const PredicateCatalog catalog(cfg.predicate_params);
      Valuation empty_valuation;
      AbstractionResult empty_ar;
      const ReachOutcome out = compute_reach(sc, 0, empty_valuation, empty_ar, {}, sc.horizon,
                                             catalog, cfg.grid);
      if (const auto* rs = std::get_if<ReachSet>(&out)) {
        emit(reach_to_csv(*rs));
        return kExitOk;
      }
      std::cerr << "reach computation terminated early\n";
      return kExitInfeasible;
    }

    if (cmd_batch->parsed()) {
      const BatchReport report = run_batch(dir_path, rules, cfg);
      emit(batch_report_to_json_text(report));
      return report.errors == 0 ? kExitOk : kExitInternalError;
    }

    // repair
    const Scenario sc = load_scenario(scenario_path);
    if (dump_cnf) {
      const auto lib = default_rule_library();
      const PredicateCatalog catalog(cfg.predicate_params);
      std::vector<std::pair<std::string, Formula>> decomposed;
      for (const std::string& name : rules) {
        const RuleLibraryEntry* entry = find_rule(lib, name);
        if (entry == nullptr) throw std::runtime_error("unknown rule " + name);
        decomposed.emplace_back(name, decompose(to_nnf(entry->parse_formula(sc.dt))).formula);
      }
      std::cerr << to_dimacs(to_cnf_with_rules(decomposed, &catalog));
    }
    const RepairOutcome outcome = repair(sc, rules, cfg);
    emit(outcome_to_json_text(outcome, sc));

    if (const auto* r = std::get_if<Repaired>(&outcome)) {
      if (plot_format == "csv") {
        write_file(out_path.empty() ? "repaired.csv" : out_path + ".csv",
                   velocity_csv(r->trajectory, sc.dt));
      } else if (plot_format == "svg") {
        write_file(out_path.empty() ? "repaired.svg" : out_path + ".svg",
                   velocity_svg(sc.ego_trajectory, r->trajectory, sc.dt));
      }
      if (log_level() >= 1) {
        std::cerr << "repaired: k_cut = " << r->k_cut << ", iterations = " << r->iterations
                  << ", " << r->diagnostics.wall_ms << " ms\n";
      }
      return kExitOk;
    }
    if (std::holds_alternative<NoViolation>(outcome)) {
      if (log_level() >= 1) std::cerr << "no violation\n";
      return kExitOk;
    }
    const auto& inf = std::get<Infeasible>(outcome);
    std::cerr << "infeasible: " << infeasible_reason_name(inf.reason) << " " << inf.detail
              << "\n";
    return kExitInfeasible;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternalError;
  }
}
