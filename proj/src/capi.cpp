#include "mesopt/mesopt.h"

#include <fstream>
#include <string>

#include "mesopt/scenario.hpp"

struct mesopt_scenario {
  mesopt::ScenarioConfig config;
  std::string level;
  std::vector<std::string> violations;
};

struct mesopt_result {
  mesopt::ResultBundle bundle;
  std::vector<std::string> statuses;
  std::vector<std::string> written;
};

namespace {

thread_local std::string last_error;

mesopt_status status_for(mesopt::ErrorCode code) {
  using mesopt::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError: return MESOPT_ERR_PARSE;
    case ErrorCode::SchemaError: return MESOPT_ERR_SCHEMA;
    case ErrorCode::Infeasible: return MESOPT_ERR_INFEASIBLE;
    case ErrorCode::Unbounded: return MESOPT_ERR_UNBOUNDED;
    case ErrorCode::MissingFile: return MESOPT_ERR_MISSING_FILE;
    case ErrorCode::IoError: return MESOPT_ERR_IO;
    case ErrorCode::NumericalBreakdown:
    case ErrorCode::NodeLimitExceeded: return MESOPT_ERR_NUMERICAL;
    case ErrorCode::InvalidArgument: return MESOPT_ERR_ARGUMENT;
    default: return MESOPT_ERR_MODEL;
  }
}

mesopt_status fail(mesopt_status s, std::string message) {
  last_error = std::move(message);
  return s;
}

template <class F>
mesopt_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const mesopt::Error& e) {
    return fail(status_for(e.code()), std::string(mesopt::error_code_name(e.code())) + ": " + e.what());
  } catch (const std::bad_alloc&) {
    return fail(MESOPT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MESOPT_ERR_INTERNAL, e.what());
  }
}

#define MESOPT_REQUIRE(cond) \
  if (!(cond)) return fail(MESOPT_ERR_ARGUMENT, "invalid argument: " #cond)

}  // namespace

extern "C" {

const char* mesopt_version(void) { return "1.0.0"; }

const char* mesopt_status_name(mesopt_status status) {
  switch (status) {
    case MESOPT_OK: return "ok";
    case MESOPT_ERR_ARGUMENT: return "invalid argument";
    case MESOPT_ERR_PARSE: return "parse error";
    case MESOPT_ERR_SCHEMA: return "schema error";
    case MESOPT_ERR_MODEL: return "invalid model";
    case MESOPT_ERR_INFEASIBLE: return "infeasible";
    case MESOPT_ERR_UNBOUNDED: return "unbounded";
    case MESOPT_ERR_MISSING_FILE: return "missing file";
    case MESOPT_ERR_IO: return "i/o error";
    case MESOPT_ERR_NUMERICAL: return "numerical failure";
    case MESOPT_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* mesopt_last_error(void) { return last_error.c_str(); }

mesopt_status mesopt_scenario_load(const char* path, mesopt_scenario** out) {
  MESOPT_REQUIRE(path && out);
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<mesopt_scenario>();
    s->config = mesopt::load_scenario(path);
    s->level = std::string(mesopt::level_name(s->config.level));
    *out = s.release();
    return MESOPT_OK;
  });
}

void mesopt_scenario_free(mesopt_scenario* scenario) { delete scenario; }

mesopt_status mesopt_scenario_name(const mesopt_scenario* scenario, const char** name) {
  MESOPT_REQUIRE(scenario && name);
  *name = scenario->config.name.c_str();
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_level(const mesopt_scenario* scenario, const char** level) {
  MESOPT_REQUIRE(scenario && level);
  *level = scenario->level.c_str();
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_check(mesopt_scenario* scenario, size_t* violations) {
  MESOPT_REQUIRE(scenario && violations);
  return guarded([&] {
    scenario->violations = mesopt::check_topologies(scenario->config);
    *violations = scenario->violations.size();
    return MESOPT_OK;
  });
}

mesopt_status mesopt_scenario_violation(const mesopt_scenario* scenario, size_t index, const char** message) {
  MESOPT_REQUIRE(scenario && message && index < scenario->violations.size());
  *message = scenario->violations[index].c_str();
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_set_rel_gap(mesopt_scenario* scenario, double rel_gap) {
  MESOPT_REQUIRE(scenario && rel_gap >= 0.0 && rel_gap < 1.0);
  scenario->config.solver.rel_gap = rel_gap;
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_set_pareto_points(mesopt_scenario* scenario, size_t points) {
  MESOPT_REQUIRE(scenario && points >= 2);
  auto& p = scenario->config.pareto;
  if (!p) p = mesopt::ParetoSettings{{mesopt::ObjectiveKind::CO2, {}}, points};
  p->points = points;
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_set_aggregation(mesopt_scenario* scenario, size_t k, size_t period_length) {
  MESOPT_REQUIRE(scenario);
  if (k == 0) {
    scenario->config.aggregation.reset();
    return MESOPT_OK;
  }
  const auto steps = scenario->config.horizon.steps;
  if (period_length == 0 || steps % period_length != 0)
    return fail(MESOPT_ERR_ARGUMENT, "IndivisibleLength: period length " + std::to_string(period_length) +
                                         " does not divide the horizon of " + std::to_string(steps) + " steps");
  if (k > steps / period_length)
    return fail(MESOPT_ERR_ARGUMENT, "KTooLarge: " + std::to_string(k) + " typical periods requested, the horizon has " +
                                         std::to_string(steps / period_length));
  scenario->config.aggregation = mesopt::AggregationSettings{period_length, k};
  return MESOPT_OK;
}

mesopt_status mesopt_scenario_export_lp(const mesopt_scenario* scenario, const char* path) {
  MESOPT_REQUIRE(scenario && path);
  return guarded([&] {
    std::string text = mesopt::export_scenario_lp(scenario->config);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || (out.close(), !out))
      return fail(MESOPT_ERR_IO, std::string("IoError: cannot write '") + path + "'");
    return MESOPT_OK;
  });
}

mesopt_status mesopt_run(const mesopt_scenario* scenario, mesopt_result** out) {
  MESOPT_REQUIRE(scenario && out);
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<mesopt_result>();
    r->bundle = mesopt::run_scenario(scenario->config);
    for (const auto& l : r->bundle.levels) r->statuses.emplace_back(mesopt::status_name(l.status));
    *out = r.release();
    return MESOPT_OK;
  });
}

void mesopt_result_free(mesopt_result* result) { delete result; }

mesopt_status mesopt_result_level_count(const mesopt_result* result, size_t* count) {
  MESOPT_REQUIRE(result && count);
  *count = result->bundle.levels.size();
  return MESOPT_OK;
}

mesopt_status mesopt_result_level(const mesopt_result* result, size_t index, const char** label, const char** status,
                                  double* objective, double* gap) {
  MESOPT_REQUIRE(result && index < result->bundle.levels.size());
  const auto& l = result->bundle.levels[index];
  if (label) *label = result->bundle.labels[index].c_str();
  if (status) *status = result->statuses[index].c_str();
  if (objective) *objective = l.objective;
  if (gap) *gap = l.gap;
  return MESOPT_OK;
}

mesopt_status mesopt_result_wall_time(const mesopt_result* result, double* seconds) {
  MESOPT_REQUIRE(result && seconds);
  *seconds = result->bundle.wall_time_s;
  return MESOPT_OK;
}

mesopt_status mesopt_result_decomposition(const mesopt_result* result, int* available, double* monolithic,
                                          double* bottom_up) {
  MESOPT_REQUIRE(result && available);
  const auto& d = result->bundle.decomposition;
  *available = d ? 1 : 0;
  if (d && monolithic) *monolithic = d->monolithic;
  if (d && bottom_up) *bottom_up = d->bottom_up;
  return MESOPT_OK;
}

mesopt_status mesopt_result_write(mesopt_result* result, const char* out_dir, size_t* files) {
  MESOPT_REQUIRE(result && out_dir);
  return guarded([&] {
    result->written.clear();
    for (const auto& p : mesopt::write_results(result->bundle, out_dir)) result->written.push_back(p.string());
    if (files) *files = result->written.size();
    return MESOPT_OK;
  });
}

mesopt_status mesopt_result_written_file(const mesopt_result* result, size_t index, const char** path) {
  MESOPT_REQUIRE(result && path && index < result->written.size());
  *path = result->written[index].c_str();
  return MESOPT_OK;
}

mesopt_status mesopt_result_export_lp(const mesopt_result* result, const char* out_dir) {
  MESOPT_REQUIRE(result && out_dir);
  return guarded([&] {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) return fail(MESOPT_ERR_IO, std::string("IoError: cannot create '") + out_dir + "'");
    for (std::size_t k = 0; k < result->bundle.levels.size(); ++k) {
      std::string file = result->bundle.labels[k];
      for (char& c : file)
        if (c == '/') c = '_';
      auto path = std::filesystem::path(out_dir) / (file + ".lp");
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << mesopt::export_lp_text(result->bundle.levels[k].model->problem);
      out.close();
      if (!out) return fail(MESOPT_ERR_IO, "IoError: cannot write '" + path.string() + "'");
    }
    return MESOPT_OK;
  });
}

}  // extern "C"
