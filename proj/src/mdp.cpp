#include "hems/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hems {

namespace {

// Slack subtracted from interval endpoints so that re-deriving the battery
// power from a boundary action never trips a saturation flag through
// floating-point round-off. Micro-watts: physically invisible.
constexpr double edge_slack_w = 1e-6;

// Battery power that draws terminal current i on the physical branch.
double power_at_current(double i, const PowertrainParams& p) {
  return i * (p.V_oc - p.r_0 * i);
}

// Engine power whose split against demand p_d yields battery power p_b.
double engine_for_battery(double p_d_w, double p_b_w, const PowertrainParams& p) {
  return p_d_w - (p_b_w >= 0.0 ? p_b_w * p.eta_elec : p_b_w / p.eta_elec);
}

}  // namespace

void CostWeights::validate(const PowertrainParams& p) const {
  if (delta < 0.0) fail(Status::invalid_argument, "delta must be >= 0");
  if (!(reward_scale > 0.0)) fail(Status::invalid_argument, "reward_scale must be > 0");
  if (soc_ref < p.soc_min || soc_ref > p.soc_max)
    fail(Status::invalid_argument, "soc_ref must lie in [soc_min, soc_max]");
}

double step_cost(double fuel_gps, double soc, const CostWeights& w, double dt) {
  if (fuel_gps < 0.0) fail(Status::invalid_argument, "fuel rate must be >= 0");
  double d = soc < w.soc_ref ? w.soc_ref - soc : 0.0;
  return dt * (fuel_gps + w.delta * d * d);
}

double reward(double cost, const CostWeights& w) { return -w.reward_scale * cost; }

FeasibleInterval feasible_actions(const EmsState& s, double p_d_w, const PowertrainParams& p,
                                  double dt) {
  // SoC window -> admissible current -> admissible battery power. The
  // current/power map is monotone on the physical branch i <= V_oc/(2 r_0).
  double i_peak = p.V_oc / (2.0 * p.r_0);
  double i_hi = std::min((s.soc - p.soc_min) * p.Q_c / dt, i_peak);
  double i_lo = (s.soc - p.soc_max) * p.Q_c / dt;
  double pb_hi = std::min(p.P_b_max, power_at_current(i_hi, p));
  double pb_lo = std::max(p.P_b_min, power_at_current(i_lo, p));

  FeasibleInterval iv;
  if (pb_lo > pb_hi) {  // degenerate battery window; no action can comply
    iv.lo = std::numeric_limits<double>::infinity();
    iv.hi = -std::numeric_limits<double>::infinity();
    return iv;
  }
  // split_power is strictly decreasing in engine power, so the bounds swap.
  double lo_raw = std::max(engine_for_battery(p_d_w, pb_hi, p), 0.0);
  double hi_raw = std::min(engine_for_battery(p_d_w, pb_lo, p), p.P_e_max);
  if (lo_raw > hi_raw) {  // genuinely empty
    iv.lo = std::numeric_limits<double>::infinity();
    iv.hi = -std::numeric_limits<double>::infinity();
    return iv;
  }
  iv.lo = lo_raw + edge_slack_w;
  iv.hi = hi_raw - edge_slack_w;
  // An interval narrower than the slack (e.g. full battery at zero demand,
  // where only P_e = P_d complies) must not vanish: keep its midpoint.
  if (iv.lo > iv.hi) iv.lo = iv.hi = 0.5 * (lo_raw + hi_raw);
  if (iv.lo > 0.0 && iv.lo <= 2.0 * edge_slack_w) iv.lo = 0.0;  // slack noise near zero
  return iv;
}

double project_action(double p_e_w, const FeasibleInterval& iv, const PowertrainParams& p,
                      bool* projected) {
  double out;
  if (!iv.empty()) {
    out = std::clamp(p_e_w, iv.lo, iv.hi);
  } else {
    // Least-violating compromise: midpoint of the contradictory bounds,
    // kept inside the action box.
    double mid = 0.5 * (iv.lo + iv.hi);
    if (!std::isfinite(mid)) mid = 0.0;
    out = std::clamp(mid, 0.0, p.P_e_max);
  }
  if (projected) *projected = out != p_e_w;
  return out;
}

TransitionResult transition(const EmsState& s, const EmsAction& u, const DriveCycle& cycle,
                            const PowertrainParams& p, const EngineMap& map,
                            const CostWeights& w) {
  if (s.t + 1 >= cycle.length())
    fail(Status::out_of_range, "transition at step " + std::to_string(s.t) +
                                   " past cycle horizon " + std::to_string(cycle.length() - 1));
  if (u.p_e_w < 0.0 || u.p_e_w > p.P_e_max)
    fail(Status::invalid_argument, "engine power outside [0, P_e_max]");

  TransitionResult r;
  r.p_d_w = power_demand(cycle.speed[s.t], cycle.accel[s.t], p);
  SplitResult split = split_power(r.p_d_w, u.p_e_w, p);
  r.p_b_w = split.p_b_w;
  r.battery_saturated = split.saturated;
  r.fuel_gps = map.at_power(u.p_e_w).fuel_gps;
  SocStepResult step = soc_step(s.soc, r.p_b_w, cycle.dt, p);
  r.soc_clamped = step.clamped;
  r.next.v = cycle.speed[s.t + 1];
  r.next.a = cycle.accel[s.t + 1];
  r.next.soc = step.soc;
  r.next.t = s.t + 1;
  r.cost = step_cost(r.fuel_gps, step.soc, w, cycle.dt);
  return r;
}

EmsState initial_state(const DriveCycle& cycle, double soc0) {
  if (cycle.length() == 0) fail(Status::invalid_argument, "empty cycle");
  return {cycle.speed[0], cycle.accel[0], soc0, 0};
}

}  // namespace hems
