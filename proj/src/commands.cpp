#include "hems/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace hems {

namespace {

bool parse_bool(const std::string& s, const std::string& what) {
  std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  fail(Status::parse_error, what + ": expected true or false, got '" + s + "'");
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::string t = trim(s);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    fail(Status::parse_error, what + ": expected a non-negative integer, got '" + s + "'");
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    fail(Status::parse_error, what + ": integer out of range: '" + s + "'");
  }
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  return static_cast<std::size_t>(parse_u64(s, what));
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& cell : split(s, ','))
    if (!trim(cell).empty()) out.push_back(parse_u64(cell, "seeds"));
  if (out.empty()) fail(Status::invalid_argument, "seeds: empty list");
  return out;
}

void check_strategy(const std::string& s) {
  if (s != "dp" && s != "ddpg" && s != "ddpg_guarded" && s != "dql")
    fail(Status::invalid_argument,
         "unknown strategy '" + s + "' (expected dp, ddpg, ddpg_guarded, or dql)");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void validate_all(const Experiment& e) {
  check_strategy(e.strategy);
  e.params.validate();
  e.weights.validate(e.params);
  e.dp.validate();
  e.train.validate();
  if (e.seeds.empty()) fail(Status::invalid_argument, "seeds: empty list");
}

// Creates the run directory and writes the config snapshot before anything
// else, followed by run-local copies of every input the snapshot references,
// so the directory re-runs from its own config.txt.
std::string begin_run(const Experiment& e, const DriveCycle& cycle, const EngineMap& map,
                      const std::string& label, std::uint64_t seed, const ExpertPolicy* expert) {
  std::string root = e.out_root.empty() ? default_out_root() : e.out_root;
  std::string run_dir = make_run_dir(root, label);

  Experiment snap = e;
  snap.cycle_name = cycle.name;
  snap.cycle_file = join_path(run_dir, "cycle.csv");
  if (!e.map_file.empty()) snap.map_file = join_path(run_dir, "map.csv");
  if (!e.params_file.empty()) snap.params_file = join_path(run_dir, "params.txt");
  if (expert) snap.expert_file = join_path(run_dir, "expert_in.csv");
  if (!e.checkpoint_file.empty()) snap.checkpoint_file = join_path(run_dir, "checkpoint_in.ckpt");
  KeyValueMap kv = snap.snapshot();
  kv["seeds"] = std::to_string(seed);
  write_text_file(join_path(run_dir, "config.txt"), render_key_values(kv));

  save_cycle(cycle, snap.cycle_file);
  if (!e.map_file.empty()) save_engine_map(map, snap.map_file);
  if (!e.params_file.empty()) save_params(e.params, snap.params_file);
  if (expert) save_expert(*expert, snap.expert_file);
  if (!e.checkpoint_file.empty())
    write_text_file(snap.checkpoint_file, read_text_file(e.checkpoint_file));
  return run_dir;
}

void fill_economy(RunReport& rep, const DriveCycle& cycle, const PowertrainParams& p,
                  const EngineMap& map) {
  rep.equivalent_fuel_g =
      equivalent_fuel(rep.raw_fuel_g, rep.initial_soc, rep.final_soc, p, map);
  Economy ec = mpg(rep.equivalent_fuel_g, cycle);
  rep.mpg = ec.mpg;
  rep.infinite_economy = ec.infinite_economy;
}

// Reads one named column from a CSV written by this project.
std::vector<double> csv_column(const std::string& path, const std::string& column) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": empty CSV");
  std::vector<std::string> header = split(trim(line), ',');
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == column) col = i;
  if (col == header.size())
    fail(Status::parse_error, path + ": no column named '" + column + "'");
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cells = split(t, ',');
    if (cells.size() != header.size())
      fail(Status::parse_error, path + ": ragged CSV row");
    out.push_back(parse_double(cells[col], path + " " + column));
  }
  return out;
}

// Writes a merged plot-data CSV: one shared x column plus one named series
// per run, truncated to the shortest series.
void write_series_csv(const std::string& path, const std::string& x_name,
                      const std::vector<double>& x,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  if (series.empty()) return;
  std::size_t n = x.size();
  for (const auto& s : series) n = std::min(n, s.second.size());
  std::string text = x_name;
  for (const auto& s : series) text += "," + s.first;
  text += "\n";
  for (std::size_t k = 0; k < n; ++k) {
    text += format_double(x[k]);
    for (const auto& s : series) text += "," + format_double(s.second[k]);
    text += "\n";
  }
  write_text_file(path, text);
}

}  // namespace

void Experiment::set_key(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "strategy") {
    check_strategy(v);
    strategy = v;
  } else if (key == "cycle_file") {
    cycle_file = v;
  } else if (key == "cycle_name") {
    cycle_name = v;
  } else if (key == "cycle_kind") {
    cycle_kind_from_string(v);  // validates
    cycle_kind = v;
  } else if (key == "cycle_duration_s") {
    cycle_duration_s = parse_double(v, key);
  } else if (key == "cycle_dt") {
    cycle_dt = parse_double(v, key);
  } else if (key == "cycle_seed") {
    cycle_seed = parse_u64(v, key);
  } else if (key == "expert_file") {
    expert_file = v;
  } else if (key == "map_file") {
    map_file = v;
  } else if (key == "params_file") {
    params_file = v;
  } else if (key == "checkpoint_file") {
    checkpoint_file = v;
  } else if (key == "out_root") {
    out_root = v;
  } else if (key == "seeds") {
    seeds = parse_seed_list(v);
  } else if (key == "delta") {
    weights.delta = parse_double(v, key);
  } else if (key == "soc_ref") {
    weights.soc_ref = parse_double(v, key);
  } else if (key == "reward_scale") {
    weights.reward_scale = parse_double(v, key);
  } else if (key == "soc_points") {
    dp.soc_points = parse_size(v, key);
  } else if (key == "action_points") {
    dp.action_points = parse_size(v, key);
  } else if (key == "terminal_weight") {
    dp.terminal_weight = parse_double(v, key);
  } else if (key == "snap_soc") {
    dp.snap_soc = parse_bool(v, key);
  } else if (key == "lr") {
    train.lr = parse_double(v, key);
  } else if (key == "gamma") {
    train.gamma = parse_double(v, key);
  } else if (key == "episodes") {
    train.episodes = parse_size(v, key);
  } else if (key == "batch") {
    train.batch = parse_size(v, key);
  } else if (key == "capacity") {
    train.capacity = parse_size(v, key);
  } else if (key == "tau") {
    train.tau = parse_double(v, key);
  } else if (key == "noise_sigma_w") {
    train.noise_sigma_w = parse_double(v, key);
  } else if (key == "eps_tau") {
    train.eps_tau = parse_double(v, key);
  } else if (key == "eps_literal") {
    train.eps_literal = parse_bool(v, key);
  } else if (key == "radius_start_w") {
    train.radius_start_w = parse_double(v, key);
  } else if (key == "radius_end_w") {
    train.radius_end_w = parse_double(v, key);
  } else if (key == "radius_anneal_frac") {
    train.radius_anneal_frac = parse_double(v, key);
  } else if (key == "dql_actions") {
    train.dql_actions = parse_size(v, key);
  } else if (key == "replay") {
    train.replay = replay_mode_from_string(v);
  } else if (key == "soc0") {
    train.soc0 = parse_double(v, key);
  } else {
    fail(Status::invalid_argument, "unknown config key '" + key + "'");
  }
}

void Experiment::apply(const KeyValueMap& kv) {
  for (const auto& [key, value] : kv) set_key(key, value);
}

KeyValueMap Experiment::snapshot() const {
  KeyValueMap kv;
  kv["strategy"] = strategy;
  kv["cycle_file"] = cycle_file;
  kv["cycle_name"] = cycle_name;
  kv["cycle_kind"] = cycle_kind;
  kv["cycle_duration_s"] = format_double(cycle_duration_s);
  kv["cycle_dt"] = format_double(cycle_dt);
  kv["cycle_seed"] = std::to_string(cycle_seed);
  kv["expert_file"] = expert_file;
  kv["map_file"] = map_file;
  kv["params_file"] = params_file;
  kv["checkpoint_file"] = checkpoint_file;
  kv["out_root"] = out_root;
  std::string seed_list;
  for (std::uint64_t s : seeds) seed_list += (seed_list.empty() ? "" : ",") + std::to_string(s);
  kv["seeds"] = seed_list;
  kv["delta"] = format_double(weights.delta);
  kv["soc_ref"] = format_double(weights.soc_ref);
  kv["reward_scale"] = format_double(weights.reward_scale);
  kv["soc_points"] = std::to_string(dp.soc_points);
  kv["action_points"] = std::to_string(dp.action_points);
  kv["terminal_weight"] = format_double(dp.terminal_weight);
  kv["snap_soc"] = dp.snap_soc ? "true" : "false";
  kv["lr"] = format_double(train.lr);
  kv["gamma"] = format_double(train.gamma);
  kv["episodes"] = std::to_string(train.episodes);
  kv["batch"] = std::to_string(train.batch);
  kv["capacity"] = std::to_string(train.capacity);
  kv["tau"] = format_double(train.tau);
  kv["noise_sigma_w"] = format_double(train.noise_sigma_w);
  kv["eps_tau"] = format_double(train.eps_tau);
  kv["eps_literal"] = train.eps_literal ? "true" : "false";
  kv["radius_start_w"] = format_double(train.radius_start_w);
  kv["radius_end_w"] = format_double(train.radius_end_w);
  kv["radius_anneal_frac"] = format_double(train.radius_anneal_frac);
  kv["dql_actions"] = std::to_string(train.dql_actions);
  kv["replay"] = to_string(train.replay);
  kv["soc0"] = format_double(train.soc0);
  return kv;
}

DriveCycle Experiment::resolve_cycle() const {
  DriveCycle c = cycle_file.empty()
                     ? synth_cycle(cycle_kind_from_string(cycle_kind), cycle_duration_s,
                                   cycle_seed, cycle_dt)
                     : load_cycle(cycle_file, cycle_dt);
  if (!cycle_name.empty()) c.name = cycle_name;
  return c;
}

EngineMap Experiment::resolve_map() const {
  return map_file.empty() ? default_engine_map() : load_engine_map(map_file, params.P_e_max);
}

void Experiment::resolve_params() {
  if (!params_file.empty()) params = load_params(params_file);
}

Experiment experiment_from_config(const std::string& config_path) {
  Experiment ex;
  ex.apply(load_key_value_file(config_path));
  return ex;
}

CommandOutcome cmd_dp(const Experiment& ex) {
  Experiment e = ex;
  e.resolve_params();
  validate_all(e);
  DriveCycle cycle = e.resolve_cycle();
  EngineMap map = e.resolve_map();
  std::string run_dir = begin_run(e, cycle, map, "dp_" + cycle.name, e.train.seed, nullptr);

  auto t0 = std::chrono::steady_clock::now();
  ValueGrid grid = solve(cycle, e.dp, e.params, map, e.weights);
  DpTrajectory traj =
      extract_trajectory(grid, cycle, e.train.soc0, e.dp, e.params, map, e.weights);
  double wall = seconds_since(t0);

  save_value_grid(grid, join_path(run_dir, "value_grid.txt"));
  save_expert(traj.policy, join_path(run_dir, "expert.csv"));
  write_traces_csv(traces_from_dp(cycle, traj), join_path(run_dir, "traces.csv"));

  RunReport rep;
  rep.strategy = "dp";
  rep.cycle_name = cycle.name;
  rep.raw_fuel_g = traj.total_fuel_g;
  rep.initial_soc = e.train.soc0;
  rep.final_soc = traj.soc_trace.back();
  fill_economy(rep, cycle, e.params, map);
  rep.total_cost = traj.total_cost;
  rep.wall_seconds = wall;
  rep.flagged_steps = traj.flagged_steps;
  rep.traces_path = join_path(run_dir, "traces.csv");
  rep.checkpoint_path = join_path(run_dir, "value_grid.txt");
  save_report(rep, join_path(run_dir, "report.json"));
  return {run_dir, rep};
}

CommandOutcome cmd_train(const Experiment& ex, std::uint64_t seed) {
  Experiment e = ex;
  e.train.seed = seed;
  if (e.strategy == "dp")
    fail(Status::invalid_argument, "train: strategy must be ddpg, ddpg_guarded, or dql");
  e.resolve_params();
  validate_all(e);
  DriveCycle cycle = e.resolve_cycle();
  EngineMap map = e.resolve_map();

  ExpertGuard guard;
  if (e.strategy == "ddpg_guarded") {
    if (e.expert_file.empty())
      fail(Status::invalid_argument,
           "ddpg_guarded requires expert_file (point it at a dp run's expert.csv)");
    guard.policy = load_expert(e.expert_file, cycle, e.params.P_e_max);
    guard.p_e_max_w = e.params.P_e_max;
    guard.radius_w = e.train.radius_start_w;
    guard.enabled = true;
  }

  std::string run_dir =
      begin_run(e, cycle, map, e.strategy + "_" + cycle.name + "_" + std::to_string(seed), seed,
                guard.enabled ? &guard.policy : nullptr);

  std::vector<EpisodeStat> history;
  std::vector<std::size_t> guard_log;
  std::size_t projected = 0, violations = 0;
  Mlp policy_net;
  std::string checkpoint_path;
  auto t0 = std::chrono::steady_clock::now();
  try {
    if (e.strategy == "dql") {
      DqlResult res = train_dql(cycle, e.train, e.params, map, e.weights);
      history = std::move(res.history);
      projected = res.projected_steps;
      checkpoint_path = join_path(run_dir, "qnet.ckpt");
      save_mlp(res.qnet, checkpoint_path);
      policy_net = std::move(res.qnet);
    } else {
      DdpgResult res = train_ddpg(cycle, guard, e.train, e.params, map, e.weights);
      history = std::move(res.history);
      guard_log = std::move(res.guard_violations_by_episode);
      projected = res.projected_steps;
      violations = res.guard_violations;
      checkpoint_path = join_path(run_dir, "actor.ckpt");
      save_mlp(res.actor, checkpoint_path);
      save_mlp(res.critic, join_path(run_dir, "critic.ckpt"));
      policy_net = std::move(res.actor);
    }
  } catch (const Error& err) {
    write_text_file(join_path(run_dir, "error.txt"), std::string(err.what()) + "\n");
    throw;
  }
  double wall = seconds_since(t0);

  write_reward_csv(history, join_path(run_dir, "reward.csv"));
  if (guard.enabled) {
    std::string log = "episode,radius_w,containment_violations\n";
    for (std::size_t i = 0; i < guard_log.size(); ++i)
      log += std::to_string(i) + "," + format_double(guard_radius_at(e.train, i)) + "," +
             std::to_string(guard_log[i]) + "\n";
    write_text_file(join_path(run_dir, "guard_log.csv"), log);
  }
  write_text_file(join_path(run_dir, "train_stats.txt"),
                  "projected_steps = " + std::to_string(projected) + "\n" +
                      "guard_violations = " + std::to_string(violations) + "\n" +
                      "wall_seconds = " + format_double(wall) + "\n");

  RolloutResult roll = rollout_policy(policy_net, cycle, e.train.soc0, e.params, map, e.weights);
  write_traces_csv(traces_from_rollout(cycle, roll), join_path(run_dir, "traces.csv"));

  RunReport rep;
  rep.strategy = e.strategy;
  rep.cycle_name = cycle.name;
  rep.raw_fuel_g = roll.total_fuel_g;
  rep.initial_soc = e.train.soc0;
  rep.final_soc = roll.final_soc;
  fill_economy(rep, cycle, e.params, map);
  rep.total_cost = roll.total_cost;
  if (history.size() >= convergence_window) {
    std::vector<double> rewards;
    rewards.reserve(history.size());
    for (const EpisodeStat& s : history) rewards.push_back(s.total_reward);
    rep.convergence_episode = static_cast<long>(convergence_episode(rewards));
  }
  rep.wall_seconds = wall;
  rep.flagged_steps = roll.flagged_steps;
  rep.traces_path = join_path(run_dir, "traces.csv");
  rep.checkpoint_path = checkpoint_path;
  save_report(rep, join_path(run_dir, "report.json"));
  return {run_dir, rep};
}

CommandOutcome cmd_eval(const Experiment& ex) {
  Experiment e = ex;
  e.resolve_params();
  if (e.checkpoint_file.empty())
    fail(Status::invalid_argument, "eval requires checkpoint_file");
  if (!std::filesystem::exists(e.checkpoint_file))
    fail(Status::io_error, "checkpoint not found: " + e.checkpoint_file);
  Mlp net = load_mlp(e.checkpoint_file);
  if (net.input_size() != 3)
    fail(Status::invalid_argument, "checkpoint mismatch: policy nets take 3 inputs, this one takes " +
                                       std::to_string(net.input_size()));
  e.params.validate();
  e.weights.validate(e.params);
  e.train.validate();
  DriveCycle cycle = e.resolve_cycle();
  EngineMap map = e.resolve_map();

  std::string training_cycle, trained_strategy;
  std::filesystem::path sibling =
      std::filesystem::path(e.checkpoint_file).parent_path() / "report.json";
  if (std::filesystem::exists(sibling)) {
    RunReport trained = load_report(sibling.string());
    training_cycle = trained.cycle_name;
    trained_strategy = trained.strategy;
  }
  if (trained_strategy.empty())
    trained_strategy = net.output_size() == 1 ? "ddpg" : "dql";

  std::string run_dir =
      begin_run(e, cycle, map, "eval_" + trained_strategy + "_" + cycle.name, e.train.seed,
                nullptr);

  auto t0 = std::chrono::steady_clock::now();
  RolloutResult roll = rollout_policy(net, cycle, e.train.soc0, e.params, map, e.weights);
  double wall = seconds_since(t0);
  write_traces_csv(traces_from_rollout(cycle, roll), join_path(run_dir, "traces.csv"));

  RunReport rep;
  rep.strategy = trained_strategy;
  rep.cycle_name = cycle.name;
  if (!training_cycle.empty() && training_cycle != cycle.name)
    rep.training_cycle = training_cycle;
  rep.raw_fuel_g = roll.total_fuel_g;
  rep.initial_soc = e.train.soc0;
  rep.final_soc = roll.final_soc;
  fill_economy(rep, cycle, e.params, map);
  rep.total_cost = roll.total_cost;
  rep.wall_seconds = wall;
  rep.flagged_steps = roll.flagged_steps;
  rep.traces_path = join_path(run_dir, "traces.csv");
  rep.checkpoint_path = e.checkpoint_file;
  save_report(rep, join_path(run_dir, "report.json"));
  return {run_dir, rep};
}

CompareOutcome cmd_compare(const std::vector<std::string>& report_paths,
                           const std::string& out_root) {
  if (report_paths.size() < 2)
    fail(Status::invalid_argument, "compare needs at least two report files");
  std::vector<RunReport> reports;
  reports.reserve(report_paths.size());
  for (const std::string& p : report_paths) reports.push_back(load_report(p));

  std::string root = out_root.empty() ? default_out_root() : out_root;
  std::string run_dir = make_run_dir(root, "compare");

  KeyValueMap kv;
  for (std::size_t i = 0; i < report_paths.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "report_%03zu", i);
    kv[key] = report_paths[i];
  }
  write_text_file(join_path(run_dir, "config.txt"), render_key_values(kv));

  Comparison c = compare(reports);
  save_comparison_csv(c, join_path(run_dir, "comparison.csv"));

  // Plot data: SoC and engine-power traces over time, reward curves over
  // episodes, one series per run that has the file.
  std::vector<std::pair<std::string, std::vector<double>>> soc_series, pe_series, reward_series;
  std::vector<double> t_axis;
  for (const RunReport& r : reports) {
    if (!r.traces_path.empty() && std::filesystem::exists(r.traces_path)) {
      if (t_axis.empty()) t_axis = csv_column(r.traces_path, "t");
      soc_series.emplace_back(r.strategy, csv_column(r.traces_path, "soc"));
      pe_series.emplace_back(r.strategy, csv_column(r.traces_path, "pe_w"));
    }
    std::filesystem::path reward_csv =
        std::filesystem::path(r.traces_path).parent_path() / "reward.csv";
    if (!r.traces_path.empty() && std::filesystem::exists(reward_csv))
      reward_series.emplace_back(r.strategy, csv_column(reward_csv.string(), "total_reward"));
  }
  write_series_csv(join_path(run_dir, "soc_traces.csv"), "t", t_axis, soc_series);
  write_series_csv(join_path(run_dir, "engine_power.csv"), "t", t_axis, pe_series);
  if (!reward_series.empty()) {
    std::size_t n = reward_series.front().second.size();
    for (const auto& s : reward_series) n = std::min(n, s.second.size());
    std::vector<double> episodes(n);
    for (std::size_t i = 0; i < n; ++i) episodes[i] = static_cast<double>(i);
    write_series_csv(join_path(run_dir, "reward_curves.csv"), "episode", episodes, reward_series);
  }
  return {run_dir, c};
}

}  // namespace hems
