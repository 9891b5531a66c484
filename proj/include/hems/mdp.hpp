#pragma once

#include "hems/cycle.hpp"
#include "hems/powertrain.hpp"

namespace hems {

// Energy-management MDP: exogenous (v, a) from the cycle, battery SoC as
// the only controlled state, engine power as the action.
struct EmsState {
  double v = 0.0;     // m/s
  double a = 0.0;     // m/s^2
  double soc = 0.0;   // fraction
  std::size_t t = 0;  // step index
};

struct EmsAction {
  double p_e_w = 0.0;  // engine power [W]
};

struct CostWeights {
  double delta = 500.0;       // SoC-deviation weight
  double soc_ref = 0.7;       // charge-sustaining reference
  double reward_scale = 1.0;  // reward = -reward_scale * cost

  void validate(const PowertrainParams& p) const;
};

// Per-step cost dt*(m_f + delta*d^2) with one-sided d = max(0, soc_ref - soc).
double step_cost(double fuel_gps, double soc, const CostWeights& w, double dt);

// RL reward for a step cost.
double reward(double cost, const CostWeights& w);

// Closed interval of engine powers; lo > hi means empty.
struct FeasibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return lo > hi; }
};

// Engine powers within [0, P_e_max] whose induced battery power respects
// [P_b_min, P_b_max] and whose successor SoC stays in [soc_min, soc_max].
// May be empty under extreme demand; callers must handle.
FeasibleInterval feasible_actions(const EmsState& s, double p_d_w, const PowertrainParams& p,
                                  double dt);

// Clamps an action into the interval; on an empty interval returns the
// least-violating admissible power. Sets *projected when the action moved.
double project_action(double p_e_w, const FeasibleInterval& iv, const PowertrainParams& p,
                      bool* projected = nullptr);

struct TransitionResult {
  EmsState next;
  double cost = 0.0;
  double fuel_gps = 0.0;
  double p_d_w = 0.0;
  double p_b_w = 0.0;
  bool battery_saturated = false;  // split_power clamped
  bool soc_clamped = false;        // soc_step clamped
  bool saturated() const { return battery_saturated || soc_clamped; }
};

// One MDP step: demand from the cycle at s.t, battery power from the
// split, SoC via the Euler step, (v, a) at t+1 read from the cycle. The
// SoC penalty evaluates the post-step SoC so the final action still feels
// the charge-sustaining pull.
TransitionResult transition(const EmsState& s, const EmsAction& u, const DriveCycle& cycle,
                            const PowertrainParams& p, const EngineMap& map,
                            const CostWeights& w);

EmsState initial_state(const DriveCycle& cycle, double soc0);

}  // namespace hems
