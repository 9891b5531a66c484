#include "hems/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace hems {

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + static_cast<double>(i) * h;
  v.back() = hi;  // exact endpoint regardless of rounding
  return v;
}

// Linear interpolation over the uniform soc grid; returns the stored value
// bit-exactly when soc hits a node.
double interp_column(const double* col, const std::vector<double>& grid, double soc) {
  std::size_t n = grid.size();
  double h = (grid.back() - grid.front()) / static_cast<double>(n - 1);
  double x = (soc - grid.front()) / h;
  std::size_t near = snap_soc_index(soc, grid.front(), grid.back(), n);
  if (grid[near] == soc) return col[near];
  std::size_t i0 = std::min(static_cast<std::size_t>(std::max(x, 0.0)), n - 2);
  double w = std::clamp(x - static_cast<double>(i0), 0.0, 1.0);
  return col[i0] + w * (col[i0 + 1] - col[i0]);
}

double soc_penalty(double soc, const CostWeights& w) {
  double d = soc < w.soc_ref ? w.soc_ref - soc : 0.0;
  return w.delta * d * d;
}

std::uint64_t hash_inputs(const DriveCycle& cycle, const DpConfig& cfg,
                          const PowertrainParams& p, const CostWeights& w) {
  std::string s;
  s.reserve(1024 + cycle.length() * 12);
  auto add = [&s](const std::string& k, double v) { s += k + "=" + format_double(v) + "\n"; };
  s += "cycle=" + cycle.name + "\n";
  add("dt", cycle.dt);
  for (double v : cycle.speed) s += format_double(v) + ",";
  s += "\n";
  add("soc_points", static_cast<double>(cfg.soc_points));
  add("action_points", static_cast<double>(cfg.action_points));
  add("terminal_weight", cfg.terminal_weight);
  add("snap_soc", cfg.snap_soc ? 1.0 : 0.0);
  add("M_v", p.M_v);
  add("rho", p.rho);
  add("f_roll", p.f_roll);
  add("A_a", p.A_a);
  add("C_D", p.C_D);
  add("g", p.g);
  add("V_oc", p.V_oc);
  add("r_0", p.r_0);
  add("Q_c", p.Q_c);
  add("soc_min", p.soc_min);
  add("soc_max", p.soc_max);
  add("P_e_max", p.P_e_max);
  add("P_b_min", p.P_b_min);
  add("P_b_max", p.P_b_max);
  add("eta_elec", p.eta_elec);
  add("delta", w.delta);
  add("soc_ref", w.soc_ref);
  return fnv1a(s);
}

}  // namespace

std::size_t snap_soc_index(double soc, double lo, double hi, std::size_t points) {
  double h = (hi - lo) / static_cast<double>(points - 1);
  long long i = std::llround((soc - lo) / h);
  return static_cast<std::size_t>(
      std::clamp<long long>(i, 0, static_cast<long long>(points) - 1));
}

void DpConfig::validate() const {
  if (soc_points < 2) fail(Status::invalid_argument, "soc_points must be >= 2");
  if (action_points < 2) fail(Status::invalid_argument, "action_points must be >= 2");
  if (terminal_weight < 0.0) fail(Status::invalid_argument, "terminal_weight must be >= 0");
}

ValueGrid solve(const DriveCycle& cycle, const DpConfig& cfg, const PowertrainParams& p,
                const EngineMap& map, const CostWeights& w) {
  cfg.validate();
  p.validate();
  w.validate(p);
  if (cycle.length() < 2) fail(Status::invalid_argument, "cycle needs at least 2 samples");

  const std::size_t n = cycle.length() - 1;
  const std::size_t s_pts = cfg.soc_points;
  const std::size_t a_pts = cfg.action_points;
  const double dt = cycle.dt;

  ValueGrid grid;
  grid.cycle_name = cycle.name;
  grid.dt = dt;
  grid.n_steps = n;
  grid.soc_grid = linspace(p.soc_min, p.soc_max, s_pts);
  grid.action_grid = linspace(0.0, p.P_e_max, a_pts);
  grid.config_hash = hash_inputs(cycle, cfg, p, w);
  grid.values.assign((n + 1) * s_pts, 0.0);
  grid.best_action.assign(n * s_pts, 0.0);

  // Per-action fuel rate is time-independent: hoist out of the sweep.
  std::vector<double> fuel(a_pts);
  for (std::size_t j = 0; j < a_pts; ++j) fuel[j] = map.at_power(grid.action_grid[j]).fuel_gps;

  for (std::size_t i = 0; i < s_pts; ++i) {
    double d = grid.soc_grid[i] < w.soc_ref ? w.soc_ref - grid.soc_grid[i] : 0.0;
    grid.values[n * s_pts + i] = cfg.terminal_weight * d * d;
  }

  std::vector<double> pb(a_pts), dsoc(a_pts);
  for (std::size_t k = n; k-- > 0;) {
    const double p_d = power_demand(cycle.speed[k], cycle.accel[k], p);
    // Battery power and SoC decrement depend on (k, action) only.
    for (std::size_t j = 0; j < a_pts; ++j) {
      pb[j] = split_power(p_d, grid.action_grid[j], p).p_b_w;
      dsoc[j] = soc_delta(pb[j], dt, p);
    }
    const double* vnext = &grid.values[(k + 1) * s_pts];
    double* vrow = &grid.values[k * s_pts];
    double* arow = &grid.best_action[k * s_pts];

    for (std::size_t i = 0; i < s_pts; ++i) {
      const double soc = grid.soc_grid[i];
      EmsState st{cycle.speed[k], cycle.accel[k], soc, k};
      FeasibleInterval iv = feasible_actions(st, p_d, p, dt);

      double best = std::numeric_limits<double>::infinity();
      double best_a = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t j = 0; j < a_pts; ++j) {
        const double a = grid.action_grid[j];
        if (a < iv.lo || a > iv.hi) continue;
        double c;
        if (cfg.snap_soc) {
          std::size_t nx = snap_soc_index(soc - dsoc[j], p.soc_min, p.soc_max, s_pts);
          c = dt * (fuel[j] + soc_penalty(grid.soc_grid[nx], w)) + vnext[nx];
        } else {
          double nx = std::clamp(soc - dsoc[j], p.soc_min, p.soc_max);
          c = dt * (fuel[j] + soc_penalty(nx, w)) + interp_column(vnext, grid.soc_grid, nx);
        }
        if (c < best) {  // strict: ties keep the lower engine power
          best = c;
          best_a = a;
        }
      }
      if (!std::isfinite(best)) {
        // No grid action fits the feasible interval; take the least-violating
        // action and mark the node with a large penalty so feasible paths win.
        bool proj = false;
        double a = project_action(std::clamp(p_d, 0.0, p.P_e_max), iv, p, &proj);
        double pbf = split_power(p_d, a, p).p_b_w;
        double nx = std::clamp(soc - soc_delta(pbf, dt, p), p.soc_min, p.soc_max);
        double tail = cfg.snap_soc
                          ? vnext[snap_soc_index(nx, p.soc_min, p.soc_max, s_pts)]
                          : interp_column(vnext, grid.soc_grid, nx);
        best = dt * (map.at_power(a).fuel_gps + soc_penalty(nx, w)) + tail +
               infeasible_node_penalty;
        best_a = a;
      }
      vrow[i] = best;
      arow[i] = best_a;
    }
  }
  return grid;
}

double value_at(const ValueGrid& grid, std::size_t k, double soc) {
  if (k > grid.n_steps) fail(Status::out_of_range, "step index past horizon");
  if (soc < grid.soc_grid.front() || soc > grid.soc_grid.back())
    fail(Status::out_of_range, "soc outside the value grid");
  return interp_column(&grid.values[k * grid.soc_points()], grid.soc_grid, soc);
}

DpTrajectory extract_trajectory(const ValueGrid& grid, const DriveCycle& cycle, double soc0,
                                const DpConfig& cfg, const PowertrainParams& p,
                                const EngineMap& map, const CostWeights& w) {
  if (cycle.length() != grid.n_steps + 1)
    fail(Status::invalid_argument, "cycle length does not match the value grid");
  if (soc0 < grid.soc_grid.front() || soc0 > grid.soc_grid.back())
    fail(Status::out_of_range, "soc0 outside the value grid");

  DpTrajectory out;
  out.policy.cycle_name = cycle.name;
  out.policy.dt = cycle.dt;
  out.soc_trace.push_back(soc0);

  EmsState st = initial_state(cycle, soc0);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double* arow = &grid.best_action[k * grid.soc_points()];
    double a = cfg.snap_soc
                   ? arow[snap_soc_index(st.soc, p.soc_min, p.soc_max, grid.soc_points())]
                   : interp_column(arow, grid.soc_grid, st.soc);
    double p_d = power_demand(cycle.speed[k], cycle.accel[k], p);
    bool proj = false;
    a = project_action(a, feasible_actions(st, p_d, p, cycle.dt), p, &proj);
    TransitionResult tr = transition(st, EmsAction{a}, cycle, p, map, w);
    out.policy.engine_power.push_back(a);
    out.soc_trace.push_back(tr.next.soc);
    out.fuel_gps.push_back(tr.fuel_gps);
    out.p_d_w.push_back(tr.p_d_w);
    out.p_b_w.push_back(tr.p_b_w);
    out.total_cost += tr.cost;
    out.total_fuel_g += tr.fuel_gps * cycle.dt;
    if (proj || tr.saturated()) ++out.flagged_steps;
    st = tr.next;
  }
  out.policy.engine_power.push_back(0.0);  // final sample carries no action
  return out;
}

void save_value_grid(const ValueGrid& grid, const std::string& path) {
  std::string s;
  s.reserve(grid.values.size() * 12 + grid.best_action.size() * 12 + 256);
  s += "# hems value-grid v1\n";
  s += "# cycle " + grid.cycle_name + "\n";
  s += "# dt " + format_double(grid.dt) + "\n";
  s += "# steps " + std::to_string(grid.n_steps) + "\n";
  s += "# soc_grid " + std::to_string(grid.soc_points()) + " " +
       format_double(grid.soc_grid.front()) + " " + format_double(grid.soc_grid.back()) + "\n";
  s += "# action_grid " + std::to_string(grid.action_grid.size()) + " " +
       format_double(grid.action_grid.front()) + " " + format_double(grid.action_grid.back()) +
       "\n";
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(grid.config_hash));
  s += "# config_hash ";
  s += hex;
  s += "\n";
  auto dump = [&s, &grid](const char* title, const std::vector<double>& table) {
    s += title;
    s += "\n";
    std::size_t cols = grid.soc_points();
    for (std::size_t r = 0; r < table.size() / cols; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (c) s += ",";
        s += format_double(table[r * cols + c]);
      }
      s += "\n";
    }
  };
  dump("values", grid.values);
  dump("best_action", grid.best_action);
  write_text_file(path, s);
}

}  // namespace hems
