#include "semplan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semplan/export.hpp"
#include "semplan/planner.hpp"
#include "semplan/scenario.hpp"
#include "semplan/sim.hpp"

namespace semplan {

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> n_max;
  bool no_bias = false;
  std::optional<double> p_rand;
  std::optional<double> p_new;
  std::optional<double> tau;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "Random seed override");
  cmd->add_option("--n-max", ov.n_max, "Iteration budget override");
  cmd->add_flag("--no-bias", ov.no_bias, "Uniform bucket and control sampling");
  cmd->add_option("--p-rand", ov.p_rand, "Bucket bias weight, in (0.5, 1)");
  cmd->add_option("--p-new", ov.p_new, "Control bias weight, in (0.5, 1)");
  cmd->add_option("--tau", ov.tau, "Time step override, > 0");
}

void apply_overrides(PlannerConfig& cfg, const Overrides& ov) {
  std::vector<std::string> issues;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.n_max) {
    if (*ov.n_max < 1) issues.push_back("--n-max must be at least 1");
    cfg.n_max = *ov.n_max;
  }
  if (ov.no_bias) cfg.bias = false;
  if (ov.p_rand) {
    if (!(*ov.p_rand > 0.5 && *ov.p_rand < 1.0))
      issues.push_back("--p-rand must lie strictly between 0.5 and 1");
    cfg.p_rand = *ov.p_rand;
  }
  if (ov.p_new) {
    if (!(*ov.p_new > 0.5 && *ov.p_new < 1.0))
      issues.push_back("--p-new must lie strictly between 0.5 and 1");
    cfg.p_new = *ov.p_new;
  }
  if (ov.tau) {
    if (!(*ov.tau > 0)) issues.push_back("--tau must be positive");
    cfg.tau = *ov.tau;
  }
  if (!issues.empty()) throw ScenarioError(std::move(issues));
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

int cmd_plan(const std::string& scenario_path, const std::string& out_path,
             const Overrides& ov) {
  Scenario scenario = load_scenario(scenario_path);
  apply_overrides(scenario.planner, ov);
  Planner planner(scenario, scenario.planner);
  const PlanResult result = planner.plan();
  const PlannerStats& st = result.stats;
  std::cout << "status: " << (result.status == PlanStatus::Found ? "found" : "not-found")
            << "\n"
            << "iterations: " << st.iterations << "\n"
            << "nodes: " << st.nodes << "\n"
            << "buckets: " << st.buckets << "\n"
            << "accepting nodes: " << st.accepting_nodes << "\n"
            << "wall seconds: " << st.wall_seconds << "\n";
  if (st.prune_fallback)
    std::cout << "note: automaton pruning would disconnect the goal; using the full"
                 " transition set\n";
  if (result.status != PlanStatus::Found) return 2;
  std::cout << "horizon: " << result.plan->horizon << "\n"
            << "cost: " << result.plan->cost << "\n";
  save_plan(*result.plan, out_path);
  std::cout << "plan written to " << out_path << "\n";
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& plan_path,
                 std::uint64_t seed, const std::string& out_dir,
                 std::optional<int> max_replans_flag) {
  Scenario scenario = load_scenario(scenario_path);
  Plan plan = load_plan(plan_path);
  if (auto err = replay_validate(plan, scenario))
    throw std::runtime_error("plan does not match the scenario: " + *err);
  GroundTruth truth(scenario);
  const int max_replans =
      max_replans_flag ? *max_replans_flag : scenario.planner.max_replans;
  const ExecutionTrace trace = execute(plan, scenario, truth, max_replans, seed);

  std::filesystem::create_directories(out_dir);
  const std::string trace_path = out_dir + "/trace.csv";
  const std::string summary_path = out_dir + "/summary.json";
  {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write file: " + trace_path);
    write_trace_csv(trace, scenario, os);
  }
  write_text_file(summary_path, trace_summary(trace, scenario).dump(2) + "\n");

  std::cout << "status: " << exec_status_name(trace.status) << "\n"
            << "replans: " << trace.replans << "\n"
            << "steps: " << (trace.steps.empty() ? 0 : trace.steps.back().t) << "\n"
            << "realized cost: " << trace.realized_cost << "\n"
            << "trace written to " << trace_path << "\n"
            << "summary written to " << summary_path << "\n";
  switch (trace.status) {
    case ExecStatus::Satisfied: return 0;
    case ExecStatus::FailedMaxReplans: return 2;
    case ExecStatus::FailedViolation: return 3;
  }
  return 1;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_benchmark(const std::string& sweep_path, const std::string& out_path) {
  std::ifstream in(sweep_path);
  if (!in) throw std::runtime_error("cannot open sweep file: " + sweep_path);
  Json sweep;
  try {
    sweep = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("sweep file: parse error: ") + e.what());
  }
  if (!sweep.contains("scenarios") || !sweep["scenarios"].is_array() ||
      sweep["scenarios"].empty())
    throw std::runtime_error("sweep file needs a nonempty \"scenarios\" array");
  std::vector<std::string> scenarios = sweep["scenarios"].get<std::vector<std::string>>();
  std::vector<double> taus =
      sweep.contains("taus") ? sweep["taus"].get<std::vector<double>>() : std::vector<double>{};
  std::vector<std::uint64_t> seeds =
      sweep.contains("seeds") ? sweep["seeds"].get<std::vector<std::uint64_t>>()
                              : std::vector<std::uint64_t>{1, 2, 3, 4, 5};
  int n_max_override = 0;  // 0 = keep each scenario's own budget
  if (sweep.contains("n_max")) n_max_override = sweep["n_max"].get<int>();
  const bool stop_on_first =
      sweep.contains("stop_on_first") ? sweep["stop_on_first"].get<bool>() : true;

  std::sort(scenarios.begin(), scenarios.end());
  std::sort(taus.begin(), taus.end());

  std::ostringstream csv;
  csv << "scenario,robots,landmarks,tau,runs,solved,unsolved,errors,"
         "median_runtime_s,median_horizon,median_cost,median_iterations\n";
  for (const std::string& path : scenarios) {
    Scenario base = load_scenario(path);
    std::vector<double> cell_taus = taus.empty() ? std::vector<double>{base.planner.tau} : taus;
    for (double tau : cell_taus) {
      std::vector<double> runtimes, horizons, costs, iterations;
      int solved = 0, unsolved = 0, errors = 0;
      for (std::uint64_t seed : seeds) {
        try {
          PlannerConfig cfg = base.planner;
          cfg.tau = tau;
          cfg.seed = seed;
          cfg.stop_on_first = stop_on_first;
          if (n_max_override > 0) cfg.n_max = n_max_override;
          Planner planner(base, cfg);
          const PlanResult result = planner.plan();
          runtimes.push_back(result.stats.wall_seconds);
          iterations.push_back(static_cast<double>(result.stats.iterations));
          if (result.status == PlanStatus::Found) {
            ++solved;
            horizons.push_back(static_cast<double>(result.plan->horizon));
            costs.push_back(result.plan->cost);
          } else {
            ++unsolved;
          }
        } catch (const std::exception& e) {
          ++errors;
          std::cerr << "benchmark cell (" << path << ", tau=" << tau << ", seed=" << seed
                    << ") failed: " << e.what() << "\n";
        }
      }
      csv << path << ',' << base.robots.size() << ',' << base.landmarks.size() << ',' << tau
          << ',' << seeds.size() << ',' << solved << ',' << unsolved << ',' << errors << ','
          << median(runtimes) << ',' << median(horizons) << ',' << median(costs) << ','
          << median(iterations) << "\n";
    }
  }
  write_text_file(out_path, csv.str());
  std::cout << csv.str();
  std::cout << "results written to " << out_path << "\n";
  return 0;
}

int cmd_export(const std::string& scenario_path, const std::string& plan_path,
               const std::string& format, std::string out_path) {
  Scenario scenario = load_scenario(scenario_path);
  std::ostringstream os;
  if (format == "dot") {
    if (out_path.empty()) out_path = "mission.dot";
    write_mission_dot(scenario, os);
  } else if (format == "svg" || format == "csv") {
    if (plan_path.empty())
      throw std::runtime_error("--plan is required for format \"" + format + "\"");
    Plan plan = load_plan(plan_path);
    if (auto err = replay_validate(plan, scenario))
      throw std::runtime_error("plan does not match the scenario: " + *err);
    if (format == "svg") {
      if (out_path.empty()) out_path = "plan.svg";
      write_plan_svg(scenario, plan, os);
    } else {
      if (out_path.empty()) out_path = "det.csv";
      write_plan_det_csv(scenario, plan, os);
    }
  } else {
    throw std::runtime_error("unknown format \"" + format + "\" (expected svg, dot, or csv)");
  }
  write_text_file(out_path, os.str());
  std::cout << format << " written to " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multi-robot mission planning over uncertain landmark maps"};
  app.require_subcommand(1);

  // plan
  std::string plan_scenario, plan_out = "plan.json";
  Overrides plan_ov;
  CLI::App* plan_cmd = app.add_subcommand("plan", "Grow a plan for a scenario");
  plan_cmd->add_option("scenario", plan_scenario, "Scenario file")->required();
  plan_cmd->add_option("--out", plan_out, "Plan output path");
  add_override_flags(plan_cmd, plan_ov);

  // simulate
  std::string sim_scenario, sim_plan, sim_out = ".";
  std::uint64_t sim_seed = 0;
  std::optional<int> sim_max_replans;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Execute a plan against ground truth");
  sim_cmd->add_option("scenario", sim_scenario, "Scenario file")->required();
  sim_cmd->add_option("plan", sim_plan, "Plan file")->required();
  sim_cmd->add_option("--seed", sim_seed, "Measurement noise seed");
  sim_cmd->add_option("--out", sim_out, "Output directory");
  sim_cmd->add_option("--max-replans", sim_max_replans, "Replanning budget override");

  // benchmark
  std::string bench_sweep, bench_out = "benchmark.csv";
  CLI::App* bench_cmd = app.add_subcommand("benchmark", "Sweep scenarios, taus and seeds");
  bench_cmd->add_option("sweep", bench_sweep, "Sweep description file")->required();
  bench_cmd->add_option("--out", bench_out, "CSV output path");

  // export
  std::string exp_scenario, exp_plan, exp_format = "svg", exp_out;
  CLI::App* exp_cmd = app.add_subcommand("export", "Render plans and automata");
  exp_cmd->add_option("scenario", exp_scenario, "Scenario file")->required();
  exp_cmd->add_option("--plan", exp_plan, "Plan file (svg and csv formats)");
  exp_cmd->add_option("--format", exp_format, "svg, dot, or csv");
  exp_cmd->add_option("--out", exp_out, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (plan_cmd->parsed()) return cmd_plan(plan_scenario, plan_out, plan_ov);
    if (sim_cmd->parsed())
      return cmd_simulate(sim_scenario, sim_plan, sim_seed, sim_out, sim_max_replans);
    if (bench_cmd->parsed()) return cmd_benchmark(bench_sweep, bench_out);
    if (exp_cmd->parsed()) return cmd_export(exp_scenario, exp_plan, exp_format, exp_out);
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace semplan
