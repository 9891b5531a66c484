#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hems/drl.hpp"
#include "hems/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace hems;

namespace {

Transition tagged(double tag) {
  Transition t{};
  t.r = tag;
  return t;
}

DriveCycle stationary_cycle(std::size_t samples) {
  DriveCycle c;
  c.name = "flat";
  c.speed.assign(samples, 0.0);
  finalize_cycle(c);
  return c;
}

ExpertPolicy constant_expert(const DriveCycle& cycle, double p_e_w) {
  ExpertPolicy e;
  e.cycle_name = cycle.name;
  e.dt = cycle.dt;
  e.engine_power.assign(cycle.length(), p_e_w);
  return e;
}

}  // namespace

TEST_CASE("uniform full-buffer sample returns every element exactly once") {
  ReplayBuffer buf(16, ReplayMode::uniform);
  for (int i = 0; i < 10; ++i) buf.push(tagged(i));
  REQUIRE(buf.size() == 10);
  Rng rng(1);
  ReplayBuffer::Batch batch = buf.sample(10, 0.4, rng);
  REQUIRE(batch.indices.size() == 10);
  std::set<std::size_t> uniq(batch.indices.begin(), batch.indices.end());
  CHECK(uniq.size() == 10);
  CHECK(*uniq.begin() == 0);
  CHECK(*uniq.rbegin() == 9);
  for (double w : batch.weights) CHECK(w == 1.0);
}

TEST_CASE("sampling more than the buffer holds is an error") {
  ReplayBuffer buf(8, ReplayMode::uniform);
  for (int i = 0; i < 3; ++i) buf.push(tagged(i));
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(4, 0.4, rng), Error);
}

TEST_CASE("high-priority transitions dominate prioritized sampling") {
  ReplayBuffer buf(4, ReplayMode::prioritized);
  buf.push(tagged(0));
  buf.push(tagged(1));
  buf.update_priorities({0, 1}, {1e6, 1e-6});
  Rng rng(3);
  int hits = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    ReplayBuffer::Batch b = buf.sample(1, 0.4, rng);
    if (b.indices[0] == 0) ++hits;
  }
  CHECK(hits >= 990);
}

TEST_CASE("equal priorities make prioritized sampling uniform") {
  ReplayBuffer buf(16, ReplayMode::prioritized);
  for (int i = 0; i < 10; ++i) buf.push(tagged(i));  // all enter at max priority
  Rng rng(17);
  std::vector<int> counts(10, 0);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    ReplayBuffer::Batch b = buf.sample(1, 0.4, rng);
    ++counts[b.indices[0]];
  }
  double expected = draws / 10.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 21.666);  // chi-square critical value, 9 dof, p = 0.01
}

TEST_CASE("the ring evicts the oldest entries first") {
  ReplayBuffer buf(8, ReplayMode::uniform);
  for (int i = 0; i < 11; ++i) buf.push(tagged(i));
  CHECK(buf.size() == 8);
  CHECK(buf.capacity() == 8);
  std::set<double> tags;
  for (std::size_t i = 0; i < buf.size(); ++i) tags.insert(buf.at(i).r);
  for (int evicted = 0; evicted < 3; ++evicted) CHECK(tags.count(evicted) == 0);
  for (int kept = 3; kept < 11; ++kept) CHECK(tags.count(kept) == 1);
}

TEST_CASE("prioritized importance weights are positive with unit max") {
  ReplayBuffer buf(8, ReplayMode::prioritized);
  for (int i = 0; i < 6; ++i) buf.push(tagged(i));
  buf.update_priorities({0, 1, 2, 3, 4, 5}, {0.1, 0.4, 1.0, 2.0, 4.0, 0.05});
  Rng rng(5);
  ReplayBuffer::Batch b = buf.sample(6, 0.7, rng);
  double wmax = 0.0;
  for (double w : b.weights) {
    CHECK(w > 0.0);
    CHECK(w <= 1.0 + 1e-12);
    wmax = std::max(wmax, w);
  }
  CHECK(wmax == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("replay mode names round-trip") {
  CHECK(replay_mode_from_string(to_string(ReplayMode::uniform)) == ReplayMode::uniform);
  CHECK(replay_mode_from_string(to_string(ReplayMode::prioritized)) == ReplayMode::prioritized);
  CHECK_THROWS_AS(replay_mode_from_string("fancy"), Error);
}

TEST_CASE("guarded_action clamps into the expert interval") {
  ExpertGuard off;
  off.enabled = false;
  CHECK(guarded_action(30000.0, off, 0, 0.0).p_e_w == 30000.0);
  CHECK(guarded_action(60000.0, off, 0, 5000.0).p_e_w == 57000.0);  // action box
  CHECK(guarded_action(1000.0, off, 0, -5000.0).p_e_w == 0.0);

  ExpertGuard guard;
  guard.enabled = true;
  guard.radius_w = 2000.0;
  guard.policy.engine_power = {20000.0, 10000.0};
  CHECK(guarded_action(45000.0, guard, 0, 5000.0).p_e_w == 22000.0);
  CHECK(guarded_action(0.0, guard, 0, 0.0).p_e_w == 18000.0);
  CHECK(guarded_action(20500.0, guard, 0, 0.0).p_e_w == 20500.0);

  guard.radius_w = 0.0;  // pure imitation limit
  CHECK(guarded_action(45000.0, guard, 1, -3000.0).p_e_w == 10000.0);

  CHECK_THROWS_AS(guarded_action(0.0, guard, 7, 0.0), Error);
}

TEST_CASE("epsilon schedule is non-increasing and stays in (0, 1]") {
  TrainConfig cfg;
  CHECK(epsilon_at(cfg, 0, 0) == 1.0);
  CHECK(epsilon_at(cfg, 150, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  double prev = 2.0;
  for (std::size_t ep = 0; ep < 2000; ep += 10) {
    double eps = epsilon_at(cfg, ep, 0);
    CHECK(eps > 0.0);
    CHECK(eps <= 1.0);
    CHECK(eps <= prev);
    prev = eps;
  }

  cfg.eps_literal = true;  // the printed formula, 0.001^t over global steps
  CHECK(epsilon_at(cfg, 0, 0) == 1.0);
  CHECK(epsilon_at(cfg, 0, 1) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(epsilon_at(cfg, 0, 2) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(epsilon_at(cfg, 0, 5) == 1e-12);  // floored past underflow
  prev = 2.0;
  for (std::size_t step = 0; step < 10; ++step) {
    double eps = epsilon_at(cfg, 0, step);
    CHECK(eps > 0.0);
    CHECK(eps <= 1.0);
    CHECK(eps <= prev);
    prev = eps;
  }
}

TEST_CASE("guard radius anneals to its floor early and holds") {
  TrainConfig cfg;  // 5 kW -> 1 kW over the first 15% of 1000 episodes
  CHECK(guard_radius_at(cfg, 0) == 5000.0);
  CHECK(guard_radius_at(cfg, 75) == doctest::Approx(2997.998).epsilon(1e-6));
  CHECK(guard_radius_at(cfg, 150) == 1000.0);
  CHECK(guard_radius_at(cfg, 500) == 1000.0);
  CHECK(guard_radius_at(cfg, cfg.episodes - 1) == 1000.0);
  double prev = guard_radius_at(cfg, 0);
  for (std::size_t ep = 1; ep < cfg.episodes; ep += 7) {
    double r = guard_radius_at(cfg, ep);
    CHECK(r <= prev);
    prev = r;
  }
  cfg.episodes = 1;
  CHECK(guard_radius_at(cfg, 0) == 5000.0);
  TrainConfig bad;
  bad.radius_anneal_frac = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("dql action levels span the power range evenly") {
  std::vector<double> levels = dql_action_levels(20, 57000.0);
  REQUIRE(levels.size() == 20);
  CHECK(levels.front() == 0.0);
  CHECK(levels.back() == 57000.0);
  for (std::size_t i = 1; i < levels.size(); ++i) {
    CHECK(levels[i] - levels[i - 1] == doctest::Approx(3000.0).epsilon(1e-12));
  }
  CHECK(dql_action_levels(1, 57000.0) == std::vector<double>{0.0});
}

TEST_CASE("train config validation rejects nonsense") {
  auto expect_invalid = [](TrainConfig cfg) {
    CHECK_THROWS_AS(cfg.validate(), Error);
  };
  TrainConfig ok;
  ok.validate();
  ok.gamma = 0.0;  // degenerate discount is legal
  ok.validate();
  TrainConfig bad;
  bad.lr = 0.0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.gamma = 1.0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.gamma = -0.1;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.episodes = 0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.batch = 0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.batch = 100;
  bad.capacity = 50;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.tau = 0.0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.dql_actions = 0;
  expect_invalid(bad);
  bad = TrainConfig{};
  bad.soc0 = 0.0;
  expect_invalid(bad);
}

TEST_CASE("paper-pinned training defaults") {
  TrainConfig cfg;
  CHECK(cfg.episodes == 1000);
  CHECK(cfg.capacity == 2000);
  CHECK(cfg.batch == 64);
  CHECK(cfg.gamma == 0.95);
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.tau == 0.001);
}

TEST_CASE("normalized state divides by the documented scales") {
  EmsState s;
  s.v = 17.5;
  s.a = -1.5;
  s.soc = 0.63;
  double out[3];
  normalize_state(s, out);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == -0.5);
  CHECK(out[2] == 0.63);
}

TEST_CASE("one-action dql with no discount regresses the immediate reward") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  w.reward_scale = 0.05;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  REQUIRE(c.length() == 31);
  TrainConfig cfg;
  cfg.gamma = 0.0;
  cfg.dql_actions = 1;
  cfg.episodes = 500;
  // Buffer sized to one episode: every batch is the exact 30-point dataset,
  // so the update is full-batch and the regression converges cleanly.  The
  // small learning rate keeps the optimizer's limit cycle under tolerance.
  cfg.capacity = 30;
  cfg.batch = 30;
  cfg.lr = 5e-5;
  cfg.seed = 3;
  DqlResult out = train_dql(c, cfg, p, map, w);
  REQUIRE(out.history.size() == 500);

  // Replay the deterministic trajectory; Q must match each step's reward.
  MlpWorkspace ws;
  out.qnet.prepare(ws);
  EmsState st = initial_state(c, cfg.soc0);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < c.length(); ++k) {
    double s_norm[3];
    normalize_state(st, s_norm);
    double q = out.qnet.forward(s_norm, ws)[0];
    double p_d = power_demand(c.speed[k], c.accel[k], p);
    double exec = project_action(0.0, feasible_actions(st, p_d, p, c.dt), p);
    TransitionResult tr = transition(st, EmsAction{exec}, c, p, map, w);
    worst = std::max(worst, std::abs(q - reward(tr.cost, w)));
    st = tr.next;
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("dql on a stationary cycle prefers engine off at the reference soc") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = stationary_cycle(31);
  TrainConfig cfg;
  cfg.episodes = 150;
  cfg.seed = 1;
  DqlResult out = train_dql(c, cfg, p, map, w);

  EmsState s0 = initial_state(c, cfg.soc0);
  // Oracle: engine off is the unique one-step cost minimizer here.
  std::vector<double> levels = dql_action_levels(cfg.dql_actions, p.P_e_max);
  double p_d = power_demand(s0.v, s0.a, p);
  FeasibleInterval iv = feasible_actions(s0, p_d, p, c.dt);
  std::size_t oracle_best = 0;
  double oracle_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double exec = project_action(levels[i], iv, p);
    TransitionResult tr = transition(s0, EmsAction{exec}, c, p, map, w);
    if (tr.cost < oracle_cost) {
      oracle_cost = tr.cost;
      oracle_best = i;
    }
  }
  CHECK(oracle_best == 0);
  CHECK(oracle_cost == 0.0);

  double s_norm[3];
  normalize_state(s0, s_norm);
  std::vector<double> qv = out.qnet.forward({s_norm[0], s_norm[1], s_norm[2]});
  REQUIRE(qv.size() == cfg.dql_actions);
  std::size_t greedy = 0;
  for (std::size_t i = 1; i < qv.size(); ++i) {
    if (qv[i] > qv[greedy]) greedy = i;
  }
  CHECK(greedy == oracle_best);
}

TEST_CASE("radius-zero guarded ddpg reproduces the expert cost from episode one") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 120, 0);
  DpConfig dp_cfg;
  ValueGrid grid = solve(c, dp_cfg, p, map, w);
  DpTrajectory dp_traj = extract_trajectory(grid, c, 0.7, dp_cfg, p, map, w);

  ExpertGuard guard;
  guard.enabled = true;
  guard.policy = dp_traj.policy;
  guard.p_e_max_w = p.P_e_max;
  TrainConfig cfg;
  cfg.episodes = 3;
  cfg.radius_start_w = 0.0;
  cfg.radius_end_w = 0.0;
  cfg.seed = 11;
  DdpgResult out = train_ddpg(c, guard, cfg, p, map, w);
  REQUIRE(out.history.size() == 3);
  for (const EpisodeStat& stat : out.history) {
    CHECK(std::abs(-stat.total_reward - dp_traj.total_cost) <= 1e-6);
  }
  CHECK(out.guard_violations == 0);
  REQUIRE(out.guard_violations_by_episode.size() == 3);
  for (std::size_t v : out.guard_violations_by_episode) CHECK(v == 0);
}

TEST_CASE("full-width guard around midrange equals the unguarded run") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  TrainConfig cfg;
  cfg.episodes = 15;
  cfg.seed = 5;

  ExpertGuard off;
  off.enabled = false;
  DdpgResult a = train_ddpg(c, off, cfg, p, map, w);

  ExpertGuard wide;
  wide.enabled = true;
  wide.policy = constant_expert(c, 28500.0);
  wide.p_e_max_w = p.P_e_max;
  TrainConfig cfg_wide = cfg;
  cfg_wide.radius_start_w = 57000.0;
  cfg_wide.radius_end_w = 57000.0;
  DdpgResult b = train_ddpg(c, wide, cfg_wide, p, map, w);

  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t ep = 0; ep < a.history.size(); ++ep) {
    CHECK(a.history[ep].total_reward == b.history[ep].total_reward);
    CHECK(a.history[ep].total_fuel_g == b.history[ep].total_fuel_g);
    CHECK(a.history[ep].final_soc == b.history[ep].final_soc);
  }
  CHECK(a.actor.weights() == b.actor.weights());
  CHECK(a.critic.weights() == b.critic.weights());
  CHECK(b.guard_violations == 0);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  TrainConfig cfg;
  cfg.episodes = 8;
  cfg.seed = 21;

  ExpertGuard off;
  off.enabled = false;
  DdpgResult a = train_ddpg(c, off, cfg, p, map, w);
  DdpgResult b = train_ddpg(c, off, cfg, p, map, w);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t ep = 0; ep < a.history.size(); ++ep) {
    CHECK(a.history[ep].total_reward == b.history[ep].total_reward);
  }
  CHECK(a.actor.weights() == b.actor.weights());
  CHECK(a.critic.weights() == b.critic.weights());

  TrainConfig other = cfg;
  other.seed = 22;
  DdpgResult d = train_ddpg(c, off, other, p, map, w);
  bool any_diff = false;
  for (std::size_t ep = 0; ep < a.history.size(); ++ep) {
    if (a.history[ep].total_reward != d.history[ep].total_reward) any_diff = true;
  }
  CHECK(any_diff);

  DqlResult qa = train_dql(c, cfg, p, map, w);
  DqlResult qb = train_dql(c, cfg, p, map, w);
  for (std::size_t ep = 0; ep < qa.history.size(); ++ep) {
    CHECK(qa.history[ep].total_reward == qb.history[ep].total_reward);
  }
  CHECK(qa.qnet.weights() == qb.qnet.weights());
}

TEST_CASE("guard containment holds across an annealed training run") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  DpConfig dp_cfg;
  dp_cfg.soc_points = 71;
  dp_cfg.action_points = 58;
  ValueGrid grid = solve(c, dp_cfg, p, map, w);
  DpTrajectory dp_traj = extract_trajectory(grid, c, 0.7, dp_cfg, p, map, w);

  ExpertGuard guard;
  guard.enabled = true;
  guard.policy = dp_traj.policy;
  TrainConfig cfg;
  cfg.episodes = 30;
  cfg.seed = 2;
  DdpgResult out = train_ddpg(c, guard, cfg, p, map, w);
  CHECK(out.guard_violations == 0);
  REQUIRE(out.guard_violations_by_episode.size() == 30);
  for (std::size_t v : out.guard_violations_by_episode) CHECK(v == 0);
  for (const EpisodeStat& stat : out.history) {
    CHECK(stat.final_soc >= p.soc_min);
    CHECK(stat.final_soc <= p.soc_max);
  }
}

TEST_CASE("guarded training converges earlier than unguarded on the pulse") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  DpConfig dp_cfg;
  ValueGrid grid = solve(c, dp_cfg, p, map, w);
  DpTrajectory dp_traj = extract_trajectory(grid, c, 0.7, dp_cfg, p, map, w);

  TrainConfig cfg;
  cfg.episodes = 250;
  cfg.seed = 0;

  ExpertGuard off;
  off.enabled = false;
  DdpgResult plain = train_ddpg(c, off, cfg, p, map, w);

  ExpertGuard guard;
  guard.enabled = true;
  guard.policy = dp_traj.policy;
  DdpgResult guided = train_ddpg(c, guard, cfg, p, map, w);

  auto rewards = [](const std::vector<EpisodeStat>& h) {
    std::vector<double> r;
    r.reserve(h.size());
    for (const EpisodeStat& s : h) r.push_back(s.total_reward);
    return r;
  };
  std::size_t ep_plain = convergence_episode(rewards(plain.history));
  std::size_t ep_guided = convergence_episode(rewards(guided.history));
  CHECK(ep_guided < ep_plain);
}

TEST_CASE("reward explosions abort training with a divergence error") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  w.reward_scale = 1e308;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  TrainConfig cfg;
  cfg.episodes = 5;
  cfg.soc0 = 0.21;  // deep below the reference: every step is penalized
  ExpertGuard off;
  off.enabled = false;
  try {
    train_ddpg(c, off, cfg, p, map, w);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.status() == Status::diverged);
  }
  try {
    train_dql(c, cfg, p, map, w);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.status() == Status::diverged);
  }
}

TEST_CASE("expert length must match the cycle when the guard is on") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  DriveCycle c = synth_cycle(CycleKind::pulse, 60, 0, 2.0);
  ExpertGuard guard;
  guard.enabled = true;
  guard.policy.engine_power.assign(c.length() - 3, 0.0);
  TrainConfig cfg;
  cfg.episodes = 1;
  CHECK_THROWS_AS(train_ddpg(c, guard, cfg, p, map, w), Error);
}

TEST_CASE("a zero-weight actor rolls out a constant midrange action") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  Rng rng(1);
  Mlp actor({3, 64, 64, 1}, Activation::relu_hidden_tanh_out, rng);
  for (auto& layer : actor.weights()) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : actor.biases()) std::fill(layer.begin(), layer.end(), 0.0);
  DriveCycle c = stationary_cycle(31);
  RolloutResult r = rollout_policy(actor, c, 0.7, p, map, w);
  REQUIRE(r.p_e_w.size() == 30);
  for (double pe : r.p_e_w) CHECK(pe == 28500.0);
  CHECK(r.flagged_steps == 0);
  CHECK(r.final_soc > 0.7);  // surplus engine power charges the battery
  CHECK(r.final_soc <= p.soc_max);
}

TEST_CASE("rollout totals are exact sums of their step series") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CostWeights w;
  Rng rng(4);
  Mlp actor({3, 64, 64, 1}, Activation::relu_hidden_tanh_out, rng);
  DriveCycle c = synth_cycle(CycleKind::urban_like, 90, 4);
  RolloutResult r = rollout_policy(actor, c, 0.65, p, map, w);
  REQUIRE(r.soc_trace.size() == c.length());
  REQUIRE(r.fuel_gps.size() == c.length() - 1);
  double cost = 0.0, fuel = 0.0;
  for (std::size_t k = 0; k < r.fuel_gps.size(); ++k) {
    cost += step_cost(r.fuel_gps[k], r.soc_trace[k + 1], w, c.dt);
    fuel += r.fuel_gps[k] * c.dt;
  }
  CHECK(cost == r.total_cost);
  CHECK(fuel == r.total_fuel_g);
  CHECK(r.total_reward == -r.total_cost);
  CHECK(r.final_soc == r.soc_trace.back());

  // A DQL-headed net rolls out through the discrete levels.
  Mlp qnet({3, 16, 20}, Activation::relu_hidden_linear_out, rng);
  RolloutResult q = rollout_policy(qnet, c, 0.65, p, map, w);
  std::vector<double> levels = dql_action_levels(20, p.P_e_max);
  std::size_t on_level = 0;
  for (double pe : q.p_e_w) {
    for (double lv : levels) {
      if (pe == lv) {
        ++on_level;
        break;
      }
    }
  }
  CHECK(on_level + q.flagged_steps >= q.p_e_w.size());
}
