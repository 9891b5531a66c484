// Command-line front end over the C API. Subcommands mirror the library
// commands one-to-one; every run writes a self-describing directory whose
// config.txt re-runs the experiment.
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "hems.h"

namespace {

struct Settings {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> pairs;  // applied in order
  std::vector<std::string> raw_sets;                       // --set key=value
};

int die(hems_status status) {
  std::fprintf(stderr, "error: %s\n", hems_last_error());
  return static_cast<int>(status);
}

// Owning wrapper so every exit path frees the experiment.
struct ExperimentHandle {
  hems_experiment* ex = nullptr;
  ~ExperimentHandle() { hems_experiment_free(ex); }
};

// Builds an experiment from --config, the convenience flags, then --set
// overrides, in that order.
hems_status build(const Settings& s, ExperimentHandle& h) {
  if (hems_status st = hems_experiment_create(&h.ex)) return st;
  if (!s.config_path.empty())
    if (hems_status st = hems_experiment_load_config(h.ex, s.config_path.c_str())) return st;
  for (const auto& [key, value] : s.pairs)
    if (hems_status st = hems_experiment_set(h.ex, key.c_str(), value.c_str())) return st;
  for (const std::string& kv : s.raw_sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return HEMS_INVALID_ARGUMENT;
    }
    if (hems_status st =
            hems_experiment_set(h.ex, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()))
      return st;
  }
  return HEMS_OK;
}

// Registers --config/--set plus one convenience flag per config key a
// subcommand commonly needs.
void add_common(CLI::App* cmd, Settings& s, bool with_cycle) {
  cmd->add_option("--config", s.config_path, "key = value config file");
  cmd->add_option("--set", s.raw_sets, "override one config key (repeatable)")
      ->type_name("KEY=VALUE");
  auto alias = [cmd, &s](const std::string& flag, const std::string& key,
                         const std::string& help) {
    cmd->add_option_function<std::string>(
           flag, [&s, key](const std::string& v) { s.pairs.emplace_back(key, v); }, help)
        ->type_name("TEXT");
  };
  alias("--out", "out_root", "output root (default $HEMS_OUT_ROOT or ./runs)");
  alias("--params", "params_file", "powertrain parameter file");
  alias("--map", "map_file", "engine map CSV");
  if (with_cycle) {
    alias("--cycle", "cycle_file", "drive cycle CSV (omit to synthesize)");
    alias("--kind", "cycle_kind", "synthetic cycle kind: pulse | urban_like | highway_like");
    alias("--duration", "cycle_duration_s", "synthetic cycle duration [s]");
    alias("--cycle-seed", "cycle_seed", "synthetic cycle seed");
    alias("--dt", "cycle_dt", "sample interval [s]");
  }
}

std::string default_key_listing() {
  ExperimentHandle h;
  if (hems_experiment_create(&h.ex) != HEMS_OK) return {};
  char* text = nullptr;
  if (hems_experiment_snapshot(h.ex, &text) != HEMS_OK) return {};
  std::string body = text;
  hems_string_free(text);
  std::string indented;
  std::size_t start = 0;
  while (start < body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string::npos) end = body.size();
    indented += "  " + body.substr(start, end - start) + "\n";
    start = end + 1;
  }
  return "Config keys and their defaults (config file, --set, and flags all "
         "address the same keys):\n" +
         indented;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hems: hybrid-vehicle energy management laboratory"};
  app.require_subcommand(1);
  app.footer(default_key_listing());

  // gen-cycle
  std::string gen_kind = "urban_like", gen_out;
  double gen_duration = 300.0, gen_dt = 1.0;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-cycle", "synthesize a drive cycle CSV");
  gen->add_option("--kind", gen_kind, "pulse | urban_like | highway_like");
  gen->add_option("--duration", gen_duration, "duration [s]");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--dt", gen_dt, "sample interval [s]");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // dp
  Settings dp_settings;
  CLI::App* dp = app.add_subcommand("dp", "solve the finite-horizon global optimum");
  add_common(dp, dp_settings, true);

  // train
  Settings train_settings;
  std::string train_seeds;
  CLI::App* train = app.add_subcommand("train", "train a controller, one run dir per seed");
  add_common(train, train_settings, true);
  train->add_option_function<std::string>(
           "--strategy",
           [&train_settings](const std::string& v) {
             train_settings.pairs.emplace_back("strategy", v);
           },
           "ddpg_guarded | ddpg | dql")
      ->type_name("TEXT");
  train->add_option_function<std::string>(
           "--expert",
           [&train_settings](const std::string& v) {
             train_settings.pairs.emplace_back("expert_file", v);
           },
           "expert power CSV (required for ddpg_guarded)")
      ->type_name("TEXT");
  train->add_option_function<std::string>(
           "--seeds",
           [&train_settings](const std::string& v) {
             train_settings.pairs.emplace_back("seeds", v);
           },
           "comma-separated seed list")
      ->type_name("TEXT");
  train->add_option_function<std::string>(
           "--episodes",
           [&train_settings](const std::string& v) {
             train_settings.pairs.emplace_back("episodes", v);
           },
           "training episodes")
      ->type_name("INT");

  // eval
  Settings eval_settings;
  CLI::App* eval = app.add_subcommand("eval", "greedy rollout of a saved checkpoint");
  add_common(eval, eval_settings, true);
  eval->add_option_function<std::string>(
          "--checkpoint",
          [&eval_settings](const std::string& v) {
            eval_settings.pairs.emplace_back("checkpoint_file", v);
          },
          "actor or q-net checkpoint")
      ->type_name("TEXT");

  // compare
  std::vector<std::string> compare_reports;
  std::string compare_out;
  CLI::App* cmp = app.add_subcommand("compare", "cross-run table from report.json files");
  cmp->add_option("reports", compare_reports, "report.json paths")->required()->expected(-2);
  cmp->add_option("--out", compare_out, "output root");

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    hems_cycle* c = nullptr;
    if (hems_status st = hems_cycle_synth(gen_kind.c_str(), gen_duration, gen_seed, gen_dt, &c))
      return die(st);
    if (hems_status st = hems_cycle_save(c, gen_out.c_str())) {
      hems_cycle_free(c);
      return die(st);
    }
    std::printf("wrote %s: %zu samples, %.1f s, %.1f m\n", gen_out.c_str(),
                hems_cycle_length(c), hems_cycle_duration_s(c), hems_cycle_distance_m(c));
    hems_cycle_free(c);
    return 0;
  }

  if (*dp) {
    ExperimentHandle h;
    if (hems_status st = build(dp_settings, h)) return die(st);
    char* run_dir = nullptr;
    if (hems_status st = hems_run_dp(h.ex, &run_dir)) return die(st);
    std::printf("%s\n", run_dir);
    hems_string_free(run_dir);
    return 0;
  }

  if (*train) {
    ExperimentHandle h;
    if (hems_status st = build(train_settings, h)) return die(st);
    char* seeds_value = nullptr;
    if (hems_status st = hems_experiment_get(h.ex, "seeds", &seeds_value)) return die(st);
    std::vector<std::uint64_t> seeds;
    std::string cell;
    for (const char* c = seeds_value;; ++c) {
      if (*c == ',' || *c == '\0') {
        if (!cell.empty()) seeds.push_back(std::stoull(cell));
        cell.clear();
        if (*c == '\0') break;
      } else {
        cell += *c;
      }
    }
    hems_string_free(seeds_value);
    for (std::uint64_t seed : seeds) {
      char* run_dir = nullptr;
      if (hems_status st = hems_run_train(h.ex, seed, &run_dir)) return die(st);
      std::printf("%s\n", run_dir);
      hems_string_free(run_dir);
    }
    return 0;
  }

  if (*eval) {
    ExperimentHandle h;
    if (hems_status st = build(eval_settings, h)) return die(st);
    char* run_dir = nullptr;
    if (hems_status st = hems_run_eval(h.ex, &run_dir)) return die(st);
    std::printf("%s\n", run_dir);
    hems_string_free(run_dir);
    return 0;
  }

  if (*cmp) {
    std::vector<const char*> paths;
    paths.reserve(compare_reports.size());
    for (const std::string& p : compare_reports) paths.push_back(p.c_str());
    int all_pass = 0;
    char* run_dir = nullptr;
    if (hems_status st = hems_compare(paths.data(), paths.size(),
                                      compare_out.empty() ? nullptr : compare_out.c_str(),
                                      &all_pass, &run_dir))
      return die(st);
    std::printf("%s\nordering: %s\n", run_dir, all_pass ? "pass" : "violated");
    hems_string_free(run_dir);
    return 0;
  }

  return 0;
}
