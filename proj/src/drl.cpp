#include "hems/drl.hpp"

#include <algorithm>
#include <cmath>

namespace hems {

namespace {

double scale_action(double tanh_out, double p_e_max) {
  return 0.5 * (tanh_out + 1.0) * p_e_max;
}

// Importance exponent annealed 0.4 -> 1.0 over training.
double beta_imp_at(const TrainConfig& cfg, std::size_t episode) {
  double den = static_cast<double>(std::max<std::size_t>(cfg.episodes - 1, 1));
  return 0.4 + 0.6 * static_cast<double>(episode) / den;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;  // strict: ties keep the lower index
  return best;
}

}  // namespace

ReplayMode replay_mode_from_string(const std::string& s) {
  if (s == "uniform") return ReplayMode::uniform;
  if (s == "prioritized") return ReplayMode::prioritized;
  fail(Status::parse_error, "unknown replay mode '" + s + "'");
}

std::string to_string(ReplayMode m) {
  return m == ReplayMode::uniform ? "uniform" : "prioritized";
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, ReplayMode mode)
    : data_(capacity), priority_(capacity, 0.0), mode_(mode) {
  if (capacity == 0) fail(Status::invalid_argument, "replay capacity must be > 0");
}

void ReplayBuffer::push(const Transition& t) {
  data_[head_] = t;
  priority_[head_] = max_priority_;
  ++head_;
  if (head_ == data_.size()) {
    head_ = 0;
    full_ = true;
  }
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t n, double beta_imp, Rng& rng) const {
  if (n == 0) fail(Status::invalid_argument, "empty batch");
  if (n > size())
    fail(Status::bad_state, "replay buffer holds " + std::to_string(size()) +
                                " transitions, batch needs " + std::to_string(n));
  Batch b;
  if (mode_ == ReplayMode::uniform) {
    b.indices = rng.sample_indices(size(), n);
    b.weights.assign(n, 1.0);
    return b;
  }
  // Proportional prioritization: prefix sums of priority^alpha, then
  // inverse-CDF draws (with replacement).
  std::size_t m = size();
  scratch_.resize(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    total += std::pow(priority_[i], priority_alpha);
    scratch_[i] = total;
  }
  b.indices.resize(n);
  b.weights.resize(n);
  double wmax = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double u = rng.uniform() * total;
    std::size_t idx = static_cast<std::size_t>(
        std::upper_bound(scratch_.begin(), scratch_.end(), u) - scratch_.begin());
    if (idx >= m) idx = m - 1;
    b.indices[k] = idx;
    double p = (scratch_[idx] - (idx ? scratch_[idx - 1] : 0.0)) / total;
    double w = std::pow(static_cast<double>(m) * p, -beta_imp);
    b.weights[k] = w;
    wmax = std::max(wmax, w);
  }
  for (double& w : b.weights) w /= wmax;
  return b;
}

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& indices,
                                     const std::vector<double>& td) {
  if (mode_ != ReplayMode::prioritized) return;
  if (indices.size() != td.size())
    fail(Status::invalid_argument, "priority update size mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    double p = std::abs(td[k]) + priority_floor;
    priority_[indices[k]] = p;
    max_priority_ = std::max(max_priority_, p);
  }
}

EmsAction guarded_action(double actor_out_w, const ExpertGuard& guard, std::size_t t,
                         double noise_w) {
  double cand = actor_out_w + noise_w;
  double lo = 0.0, hi = guard.p_e_max_w;
  if (guard.enabled) {
    if (t >= guard.policy.engine_power.size())
      fail(Status::out_of_range, "step " + std::to_string(t) + " past the expert policy");
    double e = guard.policy.engine_power[t];
    lo = std::max(lo, e - guard.radius_w);
    hi = std::min(hi, e + guard.radius_w);
  }
  return {std::clamp(cand, lo, hi)};
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) fail(Status::invalid_argument, "lr must be > 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(Status::invalid_argument, "gamma must be in [0,1)");
  if (episodes == 0) fail(Status::invalid_argument, "episodes must be >= 1");
  if (batch == 0) fail(Status::invalid_argument, "batch must be >= 1");
  if (batch > capacity) fail(Status::invalid_argument, "batch must be <= capacity");
  if (!(tau > 0.0 && tau <= 1.0)) fail(Status::invalid_argument, "tau must be in (0,1]");
  if (noise_sigma_w < 0.0) fail(Status::invalid_argument, "noise sigma must be >= 0");
  if (!(eps_tau > 0.0)) fail(Status::invalid_argument, "eps_tau must be > 0");
  if (radius_start_w < 0.0 || radius_end_w < 0.0)
    fail(Status::invalid_argument, "guard radii must be >= 0");
  if (!(radius_anneal_frac > 0.0 && radius_anneal_frac <= 1.0))
    fail(Status::invalid_argument, "radius_anneal_frac must be in (0,1]");
  if (dql_actions < 1) fail(Status::invalid_argument, "dql_actions must be >= 1");
  if (!(soc0 > 0.0 && soc0 < 1.0)) fail(Status::invalid_argument, "soc0 must be in (0,1)");
}

double epsilon_at(const TrainConfig& cfg, std::size_t episode, std::size_t global_step) {
  double eps = cfg.eps_literal
                   ? std::pow(0.001, static_cast<double>(global_step))
                   : std::exp(-static_cast<double>(episode) / cfg.eps_tau);
  return std::max(eps, 1e-12);  // keep strictly positive past underflow
}

double guard_radius_at(const TrainConfig& cfg, std::size_t episode) {
  double den = cfg.radius_anneal_frac *
               static_cast<double>(std::max<std::size_t>(cfg.episodes - 1, 1));
  double f = std::min(1.0, static_cast<double>(episode) / den);
  return cfg.radius_start_w + f * (cfg.radius_end_w - cfg.radius_start_w);
}

std::vector<double> dql_action_levels(std::size_t n, double p_e_max_w) {
  if (n == 1) return {0.0};  // degenerate single level: engine off
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i)
    levels[i] = p_e_max_w * static_cast<double>(i) / static_cast<double>(n - 1);
  levels.back() = p_e_max_w;
  return levels;
}

DdpgResult train_ddpg(const DriveCycle& cycle, const ExpertGuard& guard, const TrainConfig& cfg,
                      const PowertrainParams& p, const EngineMap& map, const CostWeights& w) {
  cfg.validate();
  p.validate();
  w.validate(p);
  if (cycle.length() < 2) fail(Status::invalid_argument, "cycle needs at least 2 samples");
  if (guard.enabled && guard.policy.engine_power.size() != cycle.length())
    fail(Status::invalid_argument, "expert policy length does not match the cycle");
  const std::size_t n_steps = cycle.length() - 1;

  Rng rng(cfg.seed);
  Mlp actor({3, 64, 64, 1}, Activation::relu_hidden_tanh_out, rng);
  Mlp critic({4, 64, 64, 1}, Activation::relu_hidden_linear_out, rng);
  Mlp t_actor = actor;
  Mlp t_critic = critic;
  ReplayBuffer buf(cfg.capacity, cfg.replay);

  MlpWorkspace actor_ws, critic_ws, ta_ws, tc_ws;
  actor.prepare(actor_ws);
  critic.prepare(critic_ws);
  t_actor.prepare(ta_ws);
  t_critic.prepare(tc_ws);
  GradSet actor_g, critic_g;
  actor_g.match(actor);
  critic_g.match(critic);
  std::vector<double> td(cfg.batch);

  DdpgResult out;
  out.history.reserve(cfg.episodes);
  ExpertGuard g = guard;
  std::size_t global_step = 0;

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    if (g.enabled) g.radius_w = guard_radius_at(cfg, ep);
    EmsState st = initial_state(cycle, cfg.soc0);
    EpisodeStat stat;
    std::size_t ep_violations = 0;

    for (std::size_t k = 0; k < n_steps; ++k) {
      double eps = epsilon_at(cfg, ep, global_step);
      double s_norm[3];
      normalize_state(st, s_norm);
      double a_out = actor.forward(s_norm, actor_ws)[0];
      double noise = rng.gaussian() * cfg.noise_sigma_w * eps;
      EmsAction act = guarded_action(scale_action(a_out, p.P_e_max), g, k, noise);
      if (g.enabled) {
        double e = g.policy.engine_power[k];
        if (act.p_e_w < std::max(0.0, e - g.radius_w) - 1e-9 ||
            act.p_e_w > std::min(p.P_e_max, e + g.radius_w) + 1e-9)
          ++ep_violations;
      }
      double p_d = power_demand(cycle.speed[k], cycle.accel[k], p);
      FeasibleInterval feas = feasible_actions(st, p_d, p, cycle.dt);
      bool projected = false;
      double exec = project_action(act.p_e_w, feas, p, &projected);
      if (projected) ++out.projected_steps;
      TransitionResult tr = transition(st, EmsAction{exec}, cycle, p, map, w);
      double r = reward(tr.cost, w);

      Transition t;
      t.s[0] = s_norm[0];
      t.s[1] = s_norm[1];
      t.s[2] = s_norm[2];
      t.a = exec / p.P_e_max;
      t.r = r;
      normalize_state(tr.next, t.s_next);
      t.done = k + 1 == n_steps;
      // Admissible interval at s: guard band (full range unguarded)
      // intersected with the feasible set; when they are disjoint the only
      // data-supported point is the executed action.
      double lo = 0.0, hi = p.P_e_max;
      if (g.enabled) {
        double e0 = g.policy.engine_power[k];
        lo = std::max(0.0, e0 - g.radius_w);
        hi = std::min(p.P_e_max, e0 + g.radius_w);
      }
      if (!feas.empty()) {
        lo = std::max(lo, feas.lo);
        hi = std::min(hi, feas.hi);
      }
      if (lo > hi) lo = hi = exec;
      t.a_lo = lo / p.P_e_max;
      t.a_hi = hi / p.P_e_max;
      if (!t.done) {
        double p_d_next = power_demand(cycle.speed[k + 1], cycle.accel[k + 1], p);
        FeasibleInterval fn = feasible_actions(tr.next, p_d_next, p, cycle.dt);
        double lo2 = 0.0, hi2 = p.P_e_max;
        if (g.enabled) {
          double e1 = g.policy.engine_power[k + 1];
          lo2 = std::max(0.0, e1 - g.radius_w);
          hi2 = std::min(p.P_e_max, e1 + g.radius_w);
        }
        if (!fn.empty()) {
          lo2 = std::max(lo2, fn.lo);
          hi2 = std::min(hi2, fn.hi);
        }
        if (lo2 > hi2) lo2 = hi2 = project_action(0.5 * (lo2 + hi2), fn, p);
        t.a_lo_next = lo2 / p.P_e_max;
        t.a_hi_next = hi2 / p.P_e_max;
      }
      buf.push(t);

      stat.total_reward += r;
      stat.total_fuel_g += tr.fuel_gps * cycle.dt;
      st = tr.next;
      ++global_step;

      if (buf.size() < cfg.batch) continue;
      ReplayBuffer::Batch batch = buf.sample(cfg.batch, beta_imp_at(cfg, ep), rng);
      double inv_b = 1.0 / static_cast<double>(batch.indices.size());

      // Critic pass: y = r + gamma*Q'(s', pi'(s')), squared-TD gradient.
      critic_g.zero();
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        const Transition& s = buf.at(batch.indices[i]);
        double y = s.r;
        if (!s.done) {
          double a_next = 0.5 * (t_actor.forward(s.s_next, ta_ws)[0] + 1.0);
          a_next = std::clamp(a_next, s.a_lo_next, s.a_hi_next);
          double in4[4] = {s.s_next[0], s.s_next[1], s.s_next[2], a_next};
          y += cfg.gamma * t_critic.forward(in4, tc_ws)[0];
        }
        double in4[4] = {s.s[0], s.s[1], s.s[2], s.a};
        double q = critic.forward(in4, critic_ws)[0];
        td[i] = q - y;
        double up = 2.0 * td[i] * batch.weights[i] * inv_b;
        critic.backward(in4, &up, critic_ws, critic_g);
      }
      critic.apply_update(critic_g, cfg.lr, Optimizer::adam);
      buf.update_priorities(batch.indices, td);

      // Actor pass against the updated critic: ascend E[grad_a Q * grad_theta pi].
      actor_g.zero();
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        const Transition& s = buf.at(batch.indices[i]);
        double o = actor.forward(s.s, actor_ws)[0];
        // Query the critic inside the transition's admissible interval
        // (straight-through clamp): outside it the critic has no data and
        // its extrapolated slopes would walk the actor off-distribution.
        double a_pi = std::clamp(0.5 * (o + 1.0), s.a_lo, s.a_hi);
        double in4[4] = {s.s[0], s.s[1], s.s[2], a_pi};
        critic.forward(in4, critic_ws);
        double one = 1.0;
        critic.backward_input(&one, critic_ws);
        double dqda = critic_ws.input_grad[3];
        // Inverting-gradients rule against the admissible interval: the
        // push toward an edge tapers as the output approaches it and
        // reverses once the output is past it, so the actor is herded into
        // the interval while it climbs Q, and tanh never saturates
        // irrecoverably. Unguarded transitions carry the full interval,
        // which makes this the plain bounded-head rule.
        double o_lo = 2.0 * s.a_lo - 1.0;
        double o_hi = 2.0 * s.a_hi - 1.0;
        double margin = dqda > 0.0 ? 0.5 * (o_hi - o) : 0.5 * (o - o_lo);
        double up = -dqda * margin * inv_b;  // minimize -Q
        actor.backward(s.s, &up, actor_ws, actor_g);
      }
      actor.apply_update(actor_g, cfg.lr, Optimizer::adam);

      soft_update(t_critic, critic, cfg.tau);
      soft_update(t_actor, actor, cfg.tau);
    }
    stat.final_soc = st.soc;
    out.history.push_back(stat);
    if (g.enabled) {
      out.guard_violations_by_episode.push_back(ep_violations);
      out.guard_violations += ep_violations;
    }
  }
  out.actor = std::move(actor);
  out.critic = std::move(critic);
  return out;
}

DqlResult train_dql(const DriveCycle& cycle, const TrainConfig& cfg, const PowertrainParams& p,
                    const EngineMap& map, const CostWeights& w) {
  cfg.validate();
  p.validate();
  w.validate(p);
  if (cycle.length() < 2) fail(Status::invalid_argument, "cycle needs at least 2 samples");
  const std::size_t n_steps = cycle.length() - 1;
  const std::vector<double> levels = dql_action_levels(cfg.dql_actions, p.P_e_max);

  Rng rng(cfg.seed);
  Mlp qnet({3, 64, 64, cfg.dql_actions}, Activation::relu_hidden_linear_out, rng);
  Mlp t_qnet = qnet;
  ReplayBuffer buf(cfg.capacity, cfg.replay);

  MlpWorkspace q_ws, tq_ws;
  qnet.prepare(q_ws);
  t_qnet.prepare(tq_ws);
  GradSet q_g;
  q_g.match(qnet);
  std::vector<double> td(cfg.batch);
  std::vector<double> upstream(cfg.dql_actions);

  DqlResult out;
  out.history.reserve(cfg.episodes);
  std::size_t global_step = 0;

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    EmsState st = initial_state(cycle, cfg.soc0);
    EpisodeStat stat;

    for (std::size_t k = 0; k < n_steps; ++k) {
      double eps = epsilon_at(cfg, ep, global_step);
      double s_norm[3];
      normalize_state(st, s_norm);
      std::size_t ai;
      if (rng.uniform() < eps) {
        ai = static_cast<std::size_t>(rng.uniform_index(levels.size()));
      } else {
        ai = argmax(qnet.forward(s_norm, q_ws));
      }
      double p_d = power_demand(cycle.speed[k], cycle.accel[k], p);
      bool projected = false;
      double exec =
          project_action(levels[ai], feasible_actions(st, p_d, p, cycle.dt), p, &projected);
      if (projected) ++out.projected_steps;
      TransitionResult tr = transition(st, EmsAction{exec}, cycle, p, map, w);
      double r = reward(tr.cost, w);

      Transition t;
      t.s[0] = s_norm[0];
      t.s[1] = s_norm[1];
      t.s[2] = s_norm[2];
      t.a = static_cast<double>(ai);
      t.r = r;
      normalize_state(tr.next, t.s_next);
      t.done = k + 1 == n_steps;
      buf.push(t);

      stat.total_reward += r;
      stat.total_fuel_g += tr.fuel_gps * cycle.dt;
      st = tr.next;
      ++global_step;

      if (buf.size() < cfg.batch) continue;
      ReplayBuffer::Batch batch = buf.sample(cfg.batch, beta_imp_at(cfg, ep), rng);
      double inv_b = 1.0 / static_cast<double>(batch.indices.size());

      q_g.zero();
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        const Transition& s = buf.at(batch.indices[i]);
        double y = s.r;
        if (!s.done) {
          const std::vector<double>& qn = t_qnet.forward(s.s_next, tq_ws);
          y += cfg.gamma * qn[argmax(qn)];
        }
        const std::vector<double>& q = qnet.forward(s.s, q_ws);
        std::size_t sel = static_cast<std::size_t>(s.a);
        td[i] = q[sel] - y;
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[sel] = 2.0 * td[i] * batch.weights[i] * inv_b;
        qnet.backward(s.s, upstream.data(), q_ws, q_g);
      }
      qnet.apply_update(q_g, cfg.lr, Optimizer::adam);
      buf.update_priorities(batch.indices, td);
      soft_update(t_qnet, qnet, cfg.tau);
    }
    stat.final_soc = st.soc;
    out.history.push_back(stat);
  }
  out.qnet = std::move(qnet);
  return out;
}

RolloutResult rollout_policy(const Mlp& net, const DriveCycle& cycle, double soc0,
                             const PowertrainParams& p, const EngineMap& map,
                             const CostWeights& w) {
  if (cycle.length() < 2) fail(Status::invalid_argument, "cycle needs at least 2 samples");
  const std::size_t n_steps = cycle.length() - 1;
  const bool is_actor = net.output_size() == 1;
  const std::vector<double> levels =
      is_actor ? std::vector<double>() : dql_action_levels(net.output_size(), p.P_e_max);

  MlpWorkspace ws;
  net.prepare(ws);

  RolloutResult out;
  out.soc_trace.reserve(cycle.length());
  out.soc_trace.push_back(soc0);
  EmsState st = initial_state(cycle, soc0);
  for (std::size_t k = 0; k < n_steps; ++k) {
    double s_norm[3];
    normalize_state(st, s_norm);
    const std::vector<double>& o = net.forward(s_norm, ws);
    double cand = is_actor ? scale_action(o[0], p.P_e_max) : levels[argmax(o)];
    double p_d = power_demand(cycle.speed[k], cycle.accel[k], p);
    bool projected = false;
    double exec = project_action(cand, feasible_actions(st, p_d, p, cycle.dt), p, &projected);
    TransitionResult tr = transition(st, EmsAction{exec}, cycle, p, map, w);
    out.p_e_w.push_back(exec);
    out.p_d_w.push_back(tr.p_d_w);
    out.p_b_w.push_back(tr.p_b_w);
    out.fuel_gps.push_back(tr.fuel_gps);
    out.soc_trace.push_back(tr.next.soc);
    out.total_cost += tr.cost;
    out.total_fuel_g += tr.fuel_gps * cycle.dt;
    out.total_reward += reward(tr.cost, w);
    if (projected || tr.saturated()) ++out.flagged_steps;
    st = tr.next;
  }
  out.final_soc = st.soc;
  return out;
}

}  // namespace hems
