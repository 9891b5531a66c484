/* C interface to the hybrid energy-management laboratory.
 *
 * All functions returning hems_status set a thread-local error message on
 * failure, readable through hems_last_error() until the next failing call
 * on the same thread. Strings returned through char** out-parameters are
 * heap-allocated and must be released with hems_string_free().
 */
#ifndef HEMS_H
#define HEMS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HEMS_API __declspec(dllexport)
#else
#define HEMS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hems_status {
  HEMS_OK = 0,
  HEMS_IO_ERROR = 1,
  HEMS_PARSE_ERROR = 2,
  HEMS_INVALID_ARGUMENT = 3,
  HEMS_OUT_OF_RANGE = 4,
  HEMS_BAD_STATE = 5,
  HEMS_DIVERGED = 6,
  HEMS_INTERNAL_ERROR = 7
} hems_status;

HEMS_API const char* hems_version(void);

/* Message of the last failing call on this thread; never NULL. */
HEMS_API const char* hems_last_error(void);

HEMS_API void hems_string_free(char* s);

/* ---- drive cycles ---- */

typedef struct hems_cycle hems_cycle;

HEMS_API hems_status hems_cycle_load(const char* path, double dt, hems_cycle** out);
HEMS_API hems_status hems_cycle_synth(const char* kind, double duration_s, uint64_t seed,
                                      double dt, hems_cycle** out);
HEMS_API hems_status hems_cycle_save(const hems_cycle* c, const char* path);
HEMS_API size_t hems_cycle_length(const hems_cycle* c);
HEMS_API double hems_cycle_duration_s(const hems_cycle* c);
HEMS_API double hems_cycle_distance_m(const hems_cycle* c);
HEMS_API void hems_cycle_free(hems_cycle* c);

/* ---- experiments ---- */

typedef struct hems_experiment hems_experiment;

HEMS_API hems_status hems_experiment_create(hems_experiment** out);

/* Applies a flat key = value config file on top of the defaults. */
HEMS_API hems_status hems_experiment_load_config(hems_experiment* ex, const char* path);

HEMS_API hems_status hems_experiment_set(hems_experiment* ex, const char* key,
                                         const char* value);

/* Current value of one key, as it would appear in the config snapshot. */
HEMS_API hems_status hems_experiment_get(const hems_experiment* ex, const char* key,
                                         char** out_value);

/* The full snapshot as config-file text (every key with its value). */
HEMS_API hems_status hems_experiment_snapshot(const hems_experiment* ex, char** out_text);

HEMS_API void hems_experiment_free(hems_experiment* ex);

/* ---- commands; each returns the created run directory ---- */

HEMS_API hems_status hems_run_dp(const hems_experiment* ex, char** out_run_dir);

HEMS_API hems_status hems_run_train(const hems_experiment* ex, uint64_t seed,
                                    char** out_run_dir);

HEMS_API hems_status hems_run_eval(const hems_experiment* ex, char** out_run_dir);

/* Cross-run table from n report.json paths; *out_all_pass is 1 when every
 * ordering flag holds. out_root may be NULL for the default. */
HEMS_API hems_status hems_compare(const char* const* report_paths, size_t n_paths,
                                  const char* out_root, int* out_all_pass,
                                  char** out_run_dir);

#ifdef __cplusplus
}
#endif

#endif /* HEMS_H */
