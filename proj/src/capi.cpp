#include "hems.h"

#include <cstring>
#include <new>
#include <string>

#include "hems/commands.hpp"

using hems::Error;
using hems::Experiment;
using hems::Status;

struct hems_cycle {
  hems::DriveCycle c;
};

struct hems_experiment {
  Experiment e;
};

namespace {

thread_local std::string g_last_error = "no error";

hems_status to_c_status(Status s) {
  switch (s) {
    case Status::ok: return HEMS_OK;
    case Status::io_error: return HEMS_IO_ERROR;
    case Status::parse_error: return HEMS_PARSE_ERROR;
    case Status::invalid_argument: return HEMS_INVALID_ARGUMENT;
    case Status::out_of_range: return HEMS_OUT_OF_RANGE;
    case Status::bad_state: return HEMS_BAD_STATE;
    case Status::diverged: return HEMS_DIVERGED;
    case Status::internal: return HEMS_INTERNAL_ERROR;
  }
  return HEMS_INTERNAL_ERROR;
}

hems_status set_error(hems_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hems_status require(bool ok, const char* message) {
  return ok ? HEMS_OK : set_error(HEMS_INVALID_ARGUMENT, message);
}

// Runs a callable, translating exceptions into status codes.
template <typename Fn>
hems_status guarded(Fn&& fn) {
  try {
    fn();
    return HEMS_OK;
  } catch (const Error& e) {
    return set_error(to_c_status(e.status()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(HEMS_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return set_error(HEMS_INTERNAL_ERROR, e.what());
  } catch (...) {
    return set_error(HEMS_INTERNAL_ERROR, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* hems_version(void) { return "1.0.0"; }

const char* hems_last_error(void) { return g_last_error.c_str(); }

void hems_string_free(char* s) { delete[] s; }

hems_status hems_cycle_load(const char* path, double dt, hems_cycle** out) {
  if (hems_status s = require(path && out, "hems_cycle_load: NULL argument")) return s;
  return guarded([&] { *out = new hems_cycle{hems::load_cycle(path, dt)}; });
}

hems_status hems_cycle_synth(const char* kind, double duration_s, uint64_t seed, double dt,
                             hems_cycle** out) {
  if (hems_status s = require(kind && out, "hems_cycle_synth: NULL argument")) return s;
  return guarded([&] {
    *out = new hems_cycle{
        hems::synth_cycle(hems::cycle_kind_from_string(kind), duration_s, seed, dt)};
  });
}

hems_status hems_cycle_save(const hems_cycle* c, const char* path) {
  if (hems_status s = require(c && path, "hems_cycle_save: NULL argument")) return s;
  return guarded([&] { hems::save_cycle(c->c, path); });
}

size_t hems_cycle_length(const hems_cycle* c) { return c ? c->c.length() : 0; }

double hems_cycle_duration_s(const hems_cycle* c) { return c ? c->c.duration() : 0.0; }

double hems_cycle_distance_m(const hems_cycle* c) { return c ? c->c.distance_m() : 0.0; }

void hems_cycle_free(hems_cycle* c) { delete c; }

hems_status hems_experiment_create(hems_experiment** out) {
  if (hems_status s = require(out != nullptr, "hems_experiment_create: NULL argument")) return s;
  return guarded([&] { *out = new hems_experiment{}; });
}

hems_status hems_experiment_load_config(hems_experiment* ex, const char* path) {
  if (hems_status s = require(ex && path, "hems_experiment_load_config: NULL argument")) return s;
  return guarded([&] { ex->e.apply(hems::load_key_value_file(path)); });
}

hems_status hems_experiment_set(hems_experiment* ex, const char* key, const char* value) {
  if (hems_status s = require(ex && key && value, "hems_experiment_set: NULL argument")) return s;
  return guarded([&] { ex->e.set_key(key, value); });
}

hems_status hems_experiment_get(const hems_experiment* ex, const char* key, char** out_value) {
  if (hems_status s = require(ex && key && out_value, "hems_experiment_get: NULL argument"))
    return s;
  return guarded([&] {
    hems::KeyValueMap kv = ex->e.snapshot();
    auto it = kv.find(key);
    if (it == kv.end())
      hems::fail(Status::invalid_argument, std::string("unknown config key '") + key + "'");
    *out_value = dup_string(it->second);
    if (!*out_value) hems::fail(Status::internal, "out of memory");
  });
}

hems_status hems_experiment_snapshot(const hems_experiment* ex, char** out_text) {
  if (hems_status s = require(ex && out_text, "hems_experiment_snapshot: NULL argument"))
    return s;
  return guarded([&] {
    *out_text = dup_string(hems::render_key_values(ex->e.snapshot()));
    if (!*out_text) hems::fail(Status::internal, "out of memory");
  });
}

void hems_experiment_free(hems_experiment* ex) { delete ex; }

hems_status hems_run_dp(const hems_experiment* ex, char** out_run_dir) {
  if (hems_status s = require(ex && out_run_dir, "hems_run_dp: NULL argument")) return s;
  return guarded([&] {
    hems::CommandOutcome outcome = hems::cmd_dp(ex->e);
    *out_run_dir = dup_string(outcome.run_dir);
    if (!*out_run_dir) hems::fail(Status::internal, "out of memory");
  });
}

hems_status hems_run_train(const hems_experiment* ex, uint64_t seed, char** out_run_dir) {
  if (hems_status s = require(ex && out_run_dir, "hems_run_train: NULL argument")) return s;
  return guarded([&] {
    hems::CommandOutcome outcome = hems::cmd_train(ex->e, seed);
    *out_run_dir = dup_string(outcome.run_dir);
    if (!*out_run_dir) hems::fail(Status::internal, "out of memory");
  });
}

hems_status hems_run_eval(const hems_experiment* ex, char** out_run_dir) {
  if (hems_status s = require(ex && out_run_dir, "hems_run_eval: NULL argument")) return s;
  return guarded([&] {
    hems::CommandOutcome outcome = hems::cmd_eval(ex->e);
    *out_run_dir = dup_string(outcome.run_dir);
    if (!*out_run_dir) hems::fail(Status::internal, "out of memory");
  });
}

hems_status hems_compare(const char* const* report_paths, size_t n_paths, const char* out_root,
                         int* out_all_pass, char** out_run_dir) {
  if (hems_status s =
          require(report_paths && out_all_pass && out_run_dir, "hems_compare: NULL argument"))
    return s;
  return guarded([&] {
    std::vector<std::string> paths(report_paths, report_paths + n_paths);
    hems::CompareOutcome outcome = hems::cmd_compare(paths, out_root ? out_root : "");
    *out_all_pass = outcome.comparison.all_pass() ? 1 : 0;
    *out_run_dir = dup_string(outcome.run_dir);
    if (!*out_run_dir) hems::fail(Status::internal, "out of memory");
  });
}

}  // extern "C"
