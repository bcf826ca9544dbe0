/* mesopt C interface. Every call returns a mesopt_status; on failure
 * mesopt_last_error() describes the cause for the calling thread. Strings
 * returned by the library stay valid until the owning handle is freed. */
#ifndef MESOPT_H
#define MESOPT_H

#include <stddef.h>

#if defined(_WIN32)
#define MESOPT_API __declspec(dllexport)
#else
#define MESOPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mesopt_status {
  MESOPT_OK = 0,
  MESOPT_ERR_ARGUMENT = 1,    /* null pointer, index out of range, bad value */
  MESOPT_ERR_PARSE = 2,       /* malformed scenario or profile file */
  MESOPT_ERR_SCHEMA = 3,      /* scenario violates the schema */
  MESOPT_ERR_MODEL = 4,       /* invalid topology, component or cost data */
  MESOPT_ERR_INFEASIBLE = 5,
  MESOPT_ERR_UNBOUNDED = 6,
  MESOPT_ERR_MISSING_FILE = 7,
  MESOPT_ERR_IO = 8,
  MESOPT_ERR_NUMERICAL = 9,   /* solver breakdown or node limit */
  MESOPT_ERR_INTERNAL = 10
} mesopt_status;

typedef struct mesopt_scenario mesopt_scenario;
typedef struct mesopt_result mesopt_result;

MESOPT_API const char* mesopt_version(void);
MESOPT_API const char* mesopt_status_name(mesopt_status status);
MESOPT_API const char* mesopt_last_error(void);

/* Scenarios */
MESOPT_API mesopt_status mesopt_scenario_load(const char* path, mesopt_scenario** out);
MESOPT_API void mesopt_scenario_free(mesopt_scenario* scenario);
MESOPT_API mesopt_status mesopt_scenario_name(const mesopt_scenario* scenario, const char** name);
MESOPT_API mesopt_status mesopt_scenario_level(const mesopt_scenario* scenario, const char** level);
/* Topology checks on top of the schema; passes when the count is 0. */
MESOPT_API mesopt_status mesopt_scenario_check(mesopt_scenario* scenario, size_t* violations);
MESOPT_API mesopt_status mesopt_scenario_violation(const mesopt_scenario* scenario, size_t index,
                                                   const char** message);
MESOPT_API mesopt_status mesopt_scenario_set_rel_gap(mesopt_scenario* scenario, double rel_gap);
/* Trades the main objective against the scenario's Pareto objective (CO2 if none). */
MESOPT_API mesopt_status mesopt_scenario_set_pareto_points(mesopt_scenario* scenario, size_t points);
/* k = 0 turns aggregation off. */
MESOPT_API mesopt_status mesopt_scenario_set_aggregation(mesopt_scenario* scenario, size_t k,
                                                         size_t period_length);
MESOPT_API mesopt_status mesopt_scenario_export_lp(const mesopt_scenario* scenario, const char* path);

/* Runs */
MESOPT_API mesopt_status mesopt_run(const mesopt_scenario* scenario, mesopt_result** out);
MESOPT_API void mesopt_result_free(mesopt_result* result);
MESOPT_API mesopt_status mesopt_result_level_count(const mesopt_result* result, size_t* count);
/* label is "L1/<prosumer>", "L2/<district>" or "L3/<city>"; status is the solve
 * status ("Optimal" or "Feasible"). Null output pointers are skipped. */
MESOPT_API mesopt_status mesopt_result_level(const mesopt_result* result, size_t index, const char** label,
                                             const char** status, double* objective, double* gap);
MESOPT_API mesopt_status mesopt_result_wall_time(const mesopt_result* result, double* seconds);
/* Set to 1 when the scenario requested the monolithic reference. */
MESOPT_API mesopt_status mesopt_result_decomposition(const mesopt_result* result, int* available,
                                                     double* monolithic, double* bottom_up);
MESOPT_API mesopt_status mesopt_result_write(mesopt_result* result, const char* out_dir, size_t* files);
MESOPT_API mesopt_status mesopt_result_written_file(const mesopt_result* result, size_t index,
                                                    const char** path);
/* One <label>.lp file per solved level. */
MESOPT_API mesopt_status mesopt_result_export_lp(const mesopt_result* result, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
