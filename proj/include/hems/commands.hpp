#pragma once

#include "hems/drl.hpp"
#include "hems/evaluate.hpp"
#include "hems/runio.hpp"

namespace hems {

// A full experiment description assembled from a flat key-value config plus
// per-key overrides. Structural keys pick the strategy and the input files;
// the remaining keys map one-to-one onto the owning module's structs. Every
// key appears in the snapshot a command writes before doing any work, so a
// run directory re-runs from its own config.txt.
struct Experiment {
  // Structure and inputs.
  std::string strategy = "ddpg_guarded";  // dp | ddpg | ddpg_guarded | dql
  std::string cycle_file;                 // empty: synthesize from the keys below
  std::string cycle_name;                 // empty: derive from file stem / generator
  std::string cycle_kind = "urban_like";
  double cycle_duration_s = 300.0;
  double cycle_dt = 1.0;
  std::uint64_t cycle_seed = 0;
  std::string expert_file;     // required by ddpg_guarded
  std::string map_file;        // empty: built-in map
  std::string params_file;     // empty: defaults
  std::string checkpoint_file; // eval input
  std::string out_root;        // empty: HEMS_OUT_ROOT or ./runs
  std::vector<std::uint64_t> seeds = {0};

  // Module configs, overridable key by key.
  PowertrainParams params;
  CostWeights weights;
  DpConfig dp;
  TrainConfig train;

  // Applies one `key = value` pair; unknown keys are errors.
  void set_key(const std::string& key, const std::string& value);
  void apply(const KeyValueMap& kv);

  // Every key with its current value. Per-seed run directories overwrite
  // the seeds entry with their single seed before writing config.txt.
  KeyValueMap snapshot() const;

  DriveCycle resolve_cycle() const;
  EngineMap resolve_map() const;
  void resolve_params();  // folds params_file into params when set
};

Experiment experiment_from_config(const std::string& config_path);

struct CommandOutcome {
  std::string run_dir;
  RunReport report;
};

// Solves DP on the configured cycle. The run directory carries the value
// grid, the expert CSV consumed by guarded training, traces, and a report.
CommandOutcome cmd_dp(const Experiment& ex);

// Trains one strategy for one seed; the run directory gets the config
// snapshot, reward history, checkpoints, final greedy-rollout traces, and a
// report. A divergence abort is recorded in error.txt before propagating.
CommandOutcome cmd_train(const Experiment& ex, std::uint64_t seed);

// Greedy guard-free rollout of a saved checkpoint on the configured cycle.
// When the checkpoint was trained on a different cycle the report carries
// that cycle's name in training_cycle.
CommandOutcome cmd_eval(const Experiment& ex);

struct CompareOutcome {
  std::string run_dir;
  Comparison comparison;
};

// Cross-run table plus merged plot data from saved report files.
CompareOutcome cmd_compare(const std::vector<std::string>& report_paths,
                           const std::string& out_root);

}  // namespace hems
