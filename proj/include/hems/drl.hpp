#pragma once

#include "hems/dp.hpp"
#include "hems/mlp.hpp"

namespace hems {

// State normalization into the nets; actions normalize by P_e_max.
constexpr double state_v_norm = 35.0;  // m/s
constexpr double state_a_norm = 3.0;   // m/s^2

inline void normalize_state(const EmsState& s, double out[3]) {
  out[0] = s.v / state_v_norm;
  out[1] = s.a / state_a_norm;
  out[2] = s.soc;
}

struct Transition {
  double s[3];
  double a = 0.0;  // normalized engine power (DDPG) or action index (DQL)
  double r = 0.0;
  double s_next[3];
  bool done = false;
  // Admissible normalized action interval at s and s_next when the
  // transition was recorded (the guard band, or [0,1] unguarded). Critic
  // targets and actor queries stay inside it so the critic is only ever
  // read where the behavior policy produced data.
  double a_lo = 0.0, a_hi = 1.0;
  double a_lo_next = 0.0, a_hi_next = 1.0;
};

enum class ReplayMode { uniform, prioritized };

ReplayMode replay_mode_from_string(const std::string& s);
std::string to_string(ReplayMode m);

// FIFO ring of transitions. Uniform mode samples without replacement with
// unit weights; prioritized mode samples proportional to priority^alpha
// with importance weights (N*p)^(-beta) normalized by the batch max.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, ReplayMode mode);

  std::size_t size() const { return full_ ? data_.size() : head_; }
  std::size_t capacity() const { return data_.size(); }
  ReplayMode mode() const { return mode_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  // New transitions enter at the current max priority so they are seen
  // at least once before their TD error is known.
  void push(const Transition& t);

  struct Batch {
    std::vector<std::size_t> indices;
    std::vector<double> weights;
  };
  Batch sample(std::size_t n, double beta_imp, Rng& rng) const;

  // Prioritized mode: priority <- |td| + 1e-3 for the sampled indices.
  void update_priorities(const std::vector<std::size_t>& indices,
                         const std::vector<double>& td);

 private:
  std::vector<Transition> data_;
  std::vector<double> priority_;
  mutable std::vector<double> scratch_;  // prefix sums for prioritized draws
  std::size_t head_ = 0;
  bool full_ = false;
  ReplayMode mode_;
  double max_priority_ = 1.0;
};

constexpr double priority_alpha = 0.6;
constexpr double priority_floor = 1e-3;

// Time-indexed expert restriction: admissible actions stay within
// [expert(t) - radius, expert(t) + radius] intersected with [0, p_e_max].
struct ExpertGuard {
  ExpertPolicy policy;
  double radius_w = 5000.0;
  double p_e_max_w = 57000.0;
  bool enabled = false;
};

// Clamp actor output + exploration noise into the guard interval (or just
// the action box when the guard is disabled).
EmsAction guarded_action(double actor_out_w, const ExpertGuard& guard, std::size_t t,
                         double noise_w);

struct TrainConfig {
  double lr = 0.001;
  double gamma = 0.95;
  std::size_t episodes = 1000;
  std::size_t batch = 64;
  std::size_t capacity = 2000;
  double tau = 0.001;              // target-net soft-update rate
  double noise_sigma_w = 2000.0;   // exploration noise scale, decayed by eps
  double eps_tau = 150.0;          // eps = exp(-episode/eps_tau)
  bool eps_literal = false;        // eps = 0.001^global_step instead
  double radius_start_w = 5000.0;  // guard anneal, start -> end, then hold
  double radius_end_w = 1000.0;
  double radius_anneal_frac = 0.15;  // fraction of episodes the anneal spans
  std::size_t dql_actions = 20;
  ReplayMode replay = ReplayMode::uniform;
  double soc0 = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

// Exploration schedule; non-increasing in the schedule variable, in (0, 1].
double epsilon_at(const TrainConfig& cfg, std::size_t episode, std::size_t global_step);

// Guard half-width for an episode: linear anneal start -> end over the first
// radius_anneal_frac of the run, constant at the end value afterwards.
double guard_radius_at(const TrainConfig& cfg, std::size_t episode);

struct EpisodeStat {
  double total_reward = 0.0;
  double total_fuel_g = 0.0;
  double final_soc = 0.0;
};

struct DdpgResult {
  Mlp actor;
  Mlp critic;
  std::vector<EpisodeStat> history;
  std::size_t projected_steps = 0;  // feasibility projections during training
  std::size_t guard_violations = 0; // containment check failures (must stay 0)
  // Per-episode containment failures, populated only when the guard is on;
  // the training command logs one line per entry.
  std::vector<std::size_t> guard_violations_by_episode;
};

struct DqlResult {
  Mlp qnet;
  std::vector<EpisodeStat> history;
  std::size_t projected_steps = 0;
};

// DDPG with target networks; the guard narrows exploration when enabled
// and a disabled guard gives conventional DDPG.
DdpgResult train_ddpg(const DriveCycle& cycle, const ExpertGuard& guard, const TrainConfig& cfg,
                      const PowertrainParams& p, const EngineMap& map, const CostWeights& w);

// Value-based baseline over a discrete engine-power set, eps-greedy.
DqlResult train_dql(const DriveCycle& cycle, const TrainConfig& cfg, const PowertrainParams& p,
                    const EngineMap& map, const CostWeights& w);

// Discrete engine-power levels used by DQL.
std::vector<double> dql_action_levels(std::size_t n, double p_e_max_w);

struct RolloutResult {
  std::vector<double> soc_trace;  // length N+1
  std::vector<double> p_e_w;      // executed engine power per step
  std::vector<double> p_d_w;
  std::vector<double> p_b_w;
  std::vector<double> fuel_gps;
  double total_cost = 0.0;
  double total_fuel_g = 0.0;
  double total_reward = 0.0;
  double final_soc = 0.0;
  std::size_t flagged_steps = 0;
};

// Deterministic greedy rollout: no noise, no guard, actions projected into
// the feasible interval. Dispatches on the net's head: 1 output = actor
// (tanh scaled to [0, P_e_max]), otherwise DQL argmax over levels.
RolloutResult rollout_policy(const Mlp& net, const DriveCycle& cycle, double soc0,
                             const PowertrainParams& p, const EngineMap& map,
                             const CostWeights& w);

}  // namespace hems
