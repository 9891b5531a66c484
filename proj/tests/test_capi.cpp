// Exercises the shared library strictly through the C boundary: opaque
// handles, status codes, the thread-local error string, and string ownership.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hems.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string scratch = (fs::temp_directory_path() / "hems_capi_scratch").string();

struct ScratchInit {
  ScratchInit() {
    fs::remove_all(scratch);
    fs::create_directories(scratch);
  }
} scratch_init;

// Takes ownership of a char* out-parameter.
std::string take(char* s) {
  std::string out = s ? s : "";
  hems_string_free(s);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ExperimentHandle {
  hems_experiment* ex = nullptr;
  ExperimentHandle() { REQUIRE(hems_experiment_create(&ex) == HEMS_OK); }
  ~ExperimentHandle() { hems_experiment_free(ex); }
  void set(const char* key, const std::string& value) {
    REQUIRE_MESSAGE(hems_experiment_set(ex, key, value.c_str()) == HEMS_OK, hems_last_error());
  }
};

// Shared tiny pipeline: one dp run and one guarded training run.
const std::string& dp_dir() {
  static std::string dir = [] {
    ExperimentHandle h;
    h.set("strategy", "dp");
    h.set("cycle_kind", "pulse");
    h.set("cycle_duration_s", "60");
    h.set("cycle_dt", "2");
    h.set("out_root", scratch);
    char* run = nullptr;
    REQUIRE_MESSAGE(hems_run_dp(h.ex, &run) == HEMS_OK, hems_last_error());
    return take(run);
  }();
  return dir;
}

const std::string& train_dir() {
  static std::string dir = [] {
    ExperimentHandle h;
    h.set("strategy", "ddpg_guarded");
    h.set("cycle_kind", "pulse");
    h.set("cycle_duration_s", "60");
    h.set("cycle_dt", "2");
    h.set("expert_file", dp_dir() + "/expert.csv");
    h.set("episodes", "25");
    h.set("capacity", "256");
    h.set("batch", "16");
    h.set("out_root", scratch);
    char* run = nullptr;
    REQUIRE_MESSAGE(hems_run_train(h.ex, 0, &run) == HEMS_OK, hems_last_error());
    return take(run);
  }();
  return dir;
}

}  // namespace

TEST_CASE("version and error strings are always available") {
  const char* v = hems_version();
  REQUIRE(v != nullptr);
  CHECK(std::string(v).find('.') != std::string::npos);
  REQUIRE(hems_last_error() != nullptr);
}

TEST_CASE("failures set a status code and a readable message") {
  hems_cycle* c = nullptr;
  CHECK(hems_cycle_load((scratch + "/absent.csv").c_str(), 1.0, &c) == HEMS_IO_ERROR);
  CHECK(c == nullptr);
  CHECK(std::string(hems_last_error()).find("absent.csv") != std::string::npos);

  CHECK(hems_cycle_synth("freeway", 120.0, 0, 1.0, &c) == HEMS_INVALID_ARGUMENT);
  CHECK(std::string(hems_last_error()).find("freeway") != std::string::npos);
}

TEST_CASE("NULL arguments are rejected without crashing") {
  hems_cycle* c = nullptr;
  CHECK(hems_cycle_load(nullptr, 1.0, &c) == HEMS_INVALID_ARGUMENT);
  CHECK(hems_cycle_synth("pulse", 60.0, 0, 1.0, nullptr) == HEMS_INVALID_ARGUMENT);
  CHECK(hems_experiment_create(nullptr) == HEMS_INVALID_ARGUMENT);

  ExperimentHandle h;
  CHECK(hems_experiment_set(h.ex, nullptr, "x") == HEMS_INVALID_ARGUMENT);
  CHECK(hems_experiment_set(nullptr, "lr", "0.001") == HEMS_INVALID_ARGUMENT);
  char* out = nullptr;
  CHECK(hems_experiment_get(h.ex, "lr", nullptr) == HEMS_INVALID_ARGUMENT);
  CHECK(hems_run_dp(h.ex, nullptr) == HEMS_INVALID_ARGUMENT);
  CHECK(hems_compare(nullptr, 0, nullptr, nullptr, &out) == HEMS_INVALID_ARGUMENT);
}

TEST_CASE("cycles round-trip through the handle API") {
  hems_cycle* c = nullptr;
  REQUIRE(hems_cycle_synth("pulse", 60.0, 0, 2.0, &c) == HEMS_OK);
  REQUIRE(c != nullptr);
  CHECK(hems_cycle_length(c) == 31);
  CHECK(hems_cycle_duration_s(c) == doctest::Approx(60.0));
  CHECK(hems_cycle_distance_m(c) > 0.0);

  std::string path = scratch + "/roundtrip.csv";
  REQUIRE(hems_cycle_save(c, path.c_str()) == HEMS_OK);
  hems_cycle* back = nullptr;
  REQUIRE(hems_cycle_load(path.c_str(), 2.0, &back) == HEMS_OK);
  CHECK(hems_cycle_length(back) == hems_cycle_length(c));
  CHECK(hems_cycle_distance_m(back) == doctest::Approx(hems_cycle_distance_m(c)).epsilon(1e-12));
  hems_cycle_free(back);
  hems_cycle_free(c);
}

TEST_CASE("experiment keys set, get, and snapshot consistently") {
  ExperimentHandle h;
  h.set("strategy", "dql");
  h.set("lr", "0.0005");

  char* v = nullptr;
  REQUIRE(hems_experiment_get(h.ex, "strategy", &v) == HEMS_OK);
  CHECK(take(v) == "dql");
  REQUIRE(hems_experiment_get(h.ex, "lr", &v) == HEMS_OK);
  CHECK(take(v) == "0.0005");

  CHECK(hems_experiment_set(h.ex, "warp_drive", "1") == HEMS_INVALID_ARGUMENT);
  CHECK(std::string(hems_last_error()).find("warp_drive") != std::string::npos);
  CHECK(hems_experiment_get(h.ex, "warp_drive", &v) == HEMS_INVALID_ARGUMENT);

  char* text = nullptr;
  REQUIRE(hems_experiment_snapshot(h.ex, &text) == HEMS_OK);
  std::string snap = take(text);
  CHECK(snap.find("strategy = dql") != std::string::npos);
  CHECK(snap.find("lr = 0.0005") != std::string::npos);
  CHECK(snap.find("radius_anneal_frac") != std::string::npos);

  // The snapshot is itself a loadable config.
  std::string path = scratch + "/snap.txt";
  std::ofstream(path) << snap;
  ExperimentHandle h2;
  REQUIRE_MESSAGE(hems_experiment_load_config(h2.ex, path.c_str()) == HEMS_OK,
                  hems_last_error());
  REQUIRE(hems_experiment_get(h2.ex, "strategy", &v) == HEMS_OK);
  CHECK(take(v) == "dql");
}

TEST_CASE("dp, train, eval, and compare run end to end") {
  CHECK(fs::exists(dp_dir() + "/expert.csv"));
  CHECK(fs::exists(dp_dir() + "/report.json"));
  CHECK(fs::exists(train_dir() + "/actor.ckpt"));
  CHECK(fs::exists(train_dir() + "/guard_log.csv"));

  ExperimentHandle h;
  h.set("cycle_kind", "pulse");
  h.set("cycle_duration_s", "60");
  h.set("cycle_dt", "2");
  h.set("checkpoint_file", train_dir() + "/actor.ckpt");
  h.set("out_root", scratch);
  char* run = nullptr;
  REQUIRE_MESSAGE(hems_run_eval(h.ex, &run) == HEMS_OK, hems_last_error());
  std::string eval_dir = take(run);
  CHECK(fs::exists(eval_dir + "/report.json"));
  CHECK(slurp(eval_dir + "/report.json").find("\"strategy\": \"ddpg_guarded\"") !=
        std::string::npos);

  std::string dp_report = dp_dir() + "/report.json";
  std::string train_report = train_dir() + "/report.json";
  const char* paths[] = {dp_report.c_str(), train_report.c_str()};
  int all_pass = -1;
  char* cmp = nullptr;
  REQUIRE_MESSAGE(hems_compare(paths, 2, scratch.c_str(), &all_pass, &cmp) == HEMS_OK,
                  hems_last_error());
  std::string cmp_dir = take(cmp);
  CHECK((all_pass == 0 || all_pass == 1));
  std::string table = slurp(cmp_dir + "/comparison.csv");
  CHECK(table.find("strategy,total_cost") != std::string::npos);
  CHECK(table.find("\ndp,") != std::string::npos);
  CHECK(table.find("\nddpg_guarded,") != std::string::npos);
}

TEST_CASE("training failures surface as HEMS_DIVERGED") {
  ExperimentHandle h;
  h.set("strategy", "ddpg");
  h.set("cycle_kind", "pulse");
  h.set("cycle_duration_s", "60");
  h.set("cycle_dt", "2");
  h.set("episodes", "25");
  h.set("capacity", "256");
  h.set("batch", "16");
  h.set("reward_scale", "1e308");
  h.set("soc0", "0.21");
  h.set("out_root", scratch + "/diverge");
  char* run = nullptr;
  CHECK(hems_run_train(h.ex, 0, &run) == HEMS_DIVERGED);
  CHECK(run == nullptr);
  CHECK(std::string(hems_last_error()).size() > 0);
}
