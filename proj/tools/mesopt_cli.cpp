#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mesopt/mesopt.h"

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2, kNoSolution = 3, kIo = 4 };

int exit_code(mesopt_status s) {
  switch (s) {
    case MESOPT_OK: return kOk;
    case MESOPT_ERR_ARGUMENT:
    case MESOPT_ERR_PARSE:
    case MESOPT_ERR_SCHEMA:
    case MESOPT_ERR_MODEL: return kInvalid;
    case MESOPT_ERR_INFEASIBLE:
    case MESOPT_ERR_UNBOUNDED: return kNoSolution;
    case MESOPT_ERR_MISSING_FILE:
    case MESOPT_ERR_IO: return kIo;
    default: return kFailure;
  }
}

int report(mesopt_status s) {
  std::fprintf(stderr, "error (%s): %s\n", mesopt_status_name(s), mesopt_last_error());
  return exit_code(s);
}

struct Scenario {
  mesopt_scenario* handle = nullptr;
  ~Scenario() { mesopt_scenario_free(handle); }
};

struct Result {
  mesopt_result* handle = nullptr;
  ~Result() { mesopt_result_free(handle); }
};

/// Loads the scenario and runs the topology checks, printing every violation.
int load(const std::string& path, Scenario& scenario) {
  if (auto s = mesopt_scenario_load(path.c_str(), &scenario.handle)) return report(s);
  size_t n = 0;
  if (auto s = mesopt_scenario_check(scenario.handle, &n)) return report(s);
  for (size_t i = 0; i < n; ++i) {
    const char* msg = nullptr;
    mesopt_scenario_violation(scenario.handle, i, &msg);
    std::fprintf(stderr, "violation: %s\n", msg);
  }
  return n == 0 ? kOk : kInvalid;
}

bool parse_aggregate(const std::string& text, size_t& k, size_t& period_length) {
  auto x = text.find('x');
  if (x == std::string::npos) return false;
  try {
    std::size_t used = 0;
    k = std::stoul(text.substr(0, x), &used);
    if (used != x) return false;
    period_length = std::stoul(text.substr(x + 1), &used);
    return used == text.size() - x - 1 && k > 0 && period_length > 0;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical multi-energy system optimizer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mesopt_version());

  std::string scenario_path, out_dir, lp_dir, aggregate, lp_file;
  double rel_gap = -1.0;
  size_t pareto = 0;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "Solve a scenario and write the result files");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--lp-export", lp_dir, "Also write the LP of every solved level to this directory");
  run->add_option("--rel-gap", rel_gap, "Relative MIP gap")->check(CLI::Range(0.0, 1.0));
  run->add_option("--pareto", pareto, "Number of Pareto points")->check(CLI::Range(2, 1000));
  run->add_option("--aggregate", aggregate, "Typical periods as <k>x<period_length>, e.g. 4x24");
  run->add_flag("--verbose,-v", verbose, "Print per-level statistics");

  auto* validate = app.add_subcommand("validate", "Check a scenario without solving it");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  auto* export_lp = app.add_subcommand("export-lp", "Write the LP of the scenario's top level");
  export_lp->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  export_lp->add_option("--out", lp_file, "LP file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  Scenario scenario;
  if (int code = load(scenario_path, scenario)) return code;

  if (*validate) {
    const char* name = nullptr;
    const char* level = nullptr;
    mesopt_scenario_name(scenario.handle, &name);
    mesopt_scenario_level(scenario.handle, &level);
    std::printf("%s: valid %s scenario '%s'\n", scenario_path.c_str(), level, name);
    return kOk;
  }

  if (*export_lp) {
    if (auto s = mesopt_scenario_export_lp(scenario.handle, lp_file.c_str())) return report(s);
    return kOk;
  }

  if (rel_gap >= 0.0)
    if (auto s = mesopt_scenario_set_rel_gap(scenario.handle, rel_gap)) return report(s);
  if (pareto > 0)
    if (auto s = mesopt_scenario_set_pareto_points(scenario.handle, pareto)) return report(s);
  if (!aggregate.empty()) {
    size_t k = 0, length = 0;
    if (!parse_aggregate(aggregate, k, length)) {
      std::fprintf(stderr, "error: --aggregate expects <k>x<period_length>, got '%s'\n", aggregate.c_str());
      return kInvalid;
    }
    if (auto s = mesopt_scenario_set_aggregation(scenario.handle, k, length)) return report(s);
  }

  Result result;
  if (auto s = mesopt_run(scenario.handle, &result.handle)) return report(s);
  size_t files = 0;
  if (auto s = mesopt_result_write(result.handle, out_dir.c_str(), &files)) return report(s);
  if (!lp_dir.empty())
    if (auto s = mesopt_result_export_lp(result.handle, lp_dir.c_str())) return report(s);

  size_t levels = 0;
  mesopt_result_level_count(result.handle, &levels);
  for (size_t i = 0; i < levels; ++i) {
    const char* label = nullptr;
    const char* status = nullptr;
    double objective = 0.0, gap = 0.0;
    mesopt_result_level(result.handle, i, &label, &status, &objective, &gap);
    if (verbose || i + 1 == levels)
      std::printf("%-28s %-9s objective %.6f  gap %.2e\n", label, status, objective, gap);
  }
  int has_reference = 0;
  double mono = 0.0, bottom_up = 0.0;
  mesopt_result_decomposition(result.handle, &has_reference, &mono, &bottom_up);
  if (has_reference) std::printf("monolithic %.6f  bottom-up %.6f  gap %.6f\n", mono, bottom_up, bottom_up - mono);
  if (verbose) {
    double seconds = 0.0;
    mesopt_result_wall_time(result.handle, &seconds);
    std::fprintf(stderr, "wall time %.3f s\n", seconds);
    for (size_t i = 0; i < files; ++i) {
      const char* path = nullptr;
      mesopt_result_written_file(result.handle, i, &path);
      std::fprintf(stderr, "wrote %s\n", path);
    }
  }
  return kOk;
}
