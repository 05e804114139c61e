// Command-line front end: run / compare scenarios, run the acceptance checks.

#include "projctl/projctl.hpp"

#include "acceptance/criteria.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::string out;
  long long seed = 1;
  bool quiet = false;
};

std::string optimizer_label(const projctl::OptimizerOptions& o) {
  std::string s = projctl::to_string(o.type);
  if (o.type == projctl::OptimizerType::qcqp_relaxed) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_rho%g", o.rho);
    s += buf;
  }
  return s;
}

std::filesystem::path out_dir(const projctl::RunConfig& rc, const Options& opt) {
  return opt.out.empty() ? std::filesystem::path(rc.output.dir) : std::filesystem::path(opt.out);
}

int cmd_run(const Options& opt) {
  projctl::RunConfig rc = projctl::load_config(opt.config);
  const auto dir = out_dir(rc, opt);
  projctl::RunReport report;
  report.scenario = rc.scenario.id;
  report.controller = projctl::to_string(rc.scenario.controller.type);
  const auto trace = projctl::simulate(rc.scenario);
  report.rows.push_back(projctl::summarize(trace, rc.scenario.integrator.dt));
  projctl::write_atomic(dir / (rc.output.prefix + "_trace.csv"), projctl::trace_csv(trace));
  projctl::write_atomic(dir / (rc.output.prefix + "_report.json"), report.to_json().dump(2) + "\n");
  if (!opt.quiet) std::cout << projctl::report_text(report);
  return kExitOk;
}

int cmd_compare(const Options& opt) {
  projctl::RunConfig rc = projctl::load_config(opt.config);
  std::vector<projctl::OptimizerOptions> runs = rc.compare;
  for (double rho : rc.rho_sweep) {
    projctl::OptimizerOptions o = rc.scenario.optimizer;
    o.type = projctl::OptimizerType::qcqp_relaxed;
    o.rho = rho;
    runs.push_back(o);
  }
  if (runs.size() < 2) {
    throw projctl::ConfigError("compare", "needs at least two optimizer entries");
  }
  const auto dir = out_dir(rc, opt);
  projctl::RunReport report;
  report.scenario = rc.scenario.id;
  report.controller = projctl::to_string(rc.scenario.controller.type);
  for (const auto& o : runs) {
    projctl::Scenario sc = rc.scenario;
    sc.optimizer = o;
    const auto trace = projctl::simulate(sc);
    auto row = projctl::summarize(trace, sc.integrator.dt);
    row.optimizer = optimizer_label(o);
    report.rows.push_back(row);
    projctl::write_atomic(dir / (rc.output.prefix + "_" + row.optimizer + "_trace.csv"),
                          projctl::trace_csv(trace));
  }
  projctl::check_dominance(report);
  if (report.dominance_applicable && !report.dominance_holds) {
    report.exit_status = "dominance_violated";
    report.message = "qcqp dissipated more energy than min_norm with both runs feasible";
  }
  projctl::write_atomic(dir / (rc.output.prefix + "_compare.json"), report.to_json().dump(2) + "\n");
  if (!opt.quiet) std::cout << projctl::report_text(report);
  if (report.exit_status != "ok") {
    std::cerr << "error: " << report.message << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_check(const Options& opt) {
  const auto results = projctl_acceptance::run_all(static_cast<std::uint64_t>(opt.seed),
                                                   PROJCTL_SCENARIO_DIR);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    if (!opt.quiet || !r.passed) std::cout << projctl_acceptance::format_line(r) << '\n';
  }
  return all ? kExitOk : kExitRuntime;
}

int cmd_list_models() {
  for (const auto& m : projctl::model_catalog()) {
    std::printf("%-20s %s\n", m.name.c_str(), m.description.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection-based contact dynamics and power-optimal torque allocation"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--out", opt.out, "output directory (overrides output.dir)");
  app.add_option("--seed", opt.seed, "seed for the randomized checks");
  app.add_flag("--quiet", opt.quiet, "suppress the summary on stdout");

  auto* run = app.add_subcommand("run", "simulate a scenario and write its trace and report");
  run->add_option("config", opt.config, "scenario JSON")->required();
  auto* compare = app.add_subcommand("compare", "run a scenario under each listed optimizer");
  compare->add_option("config", opt.config, "scenario JSON")->required();
  auto* check = app.add_subcommand("check", "run the property and acceptance suites");
  auto* list = app.add_subcommand("list-models", "print the model catalog");
  for (auto* sub : {run, compare, check, list}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*compare) return cmd_compare(opt);
    if (*check) return cmd_check(opt);
    if (*list) return cmd_list_models();
  } catch (const projctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
