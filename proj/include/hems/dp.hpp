#pragma once

#include <cstdint>

#include "hems/mdp.hpp"

namespace hems {

struct DpConfig {
  std::size_t soc_points = 141;    // SoC grid over [soc_min, soc_max] (0.005 default res)
  std::size_t action_points = 115; // engine-power grid over [0, P_e_max] (0.5 kW default res)
  // Terminal cost terminal_weight * max(0, soc_ref - soc_N)^2; default is
  // 50x the running SoC weight so the endpoint pulls as hard as ~50 steps.
  double terminal_weight = 25000.0;
  // Snap successor SoC to the nearest grid node instead of interpolating
  // the value function; used so brute-force enumeration and DP share
  // identical dynamics in the oracle tests.
  bool snap_soc = false;

  void validate() const;
};

// Added to a node's value when no grid action fits the feasible interval;
// large enough that any feasible path is preferred.
constexpr double infeasible_node_penalty = 1e6;

struct ValueGrid {
  std::string cycle_name;
  double dt = 1.0;
  std::size_t n_steps = 0;  // N; values has N+1 rows, best_action N rows
  std::vector<double> soc_grid;
  std::vector<double> action_grid;
  std::vector<double> values;       // (N+1) x soc_points, row-major
  std::vector<double> best_action;  // N x soc_points, row-major
  std::uint64_t config_hash = 0;

  std::size_t soc_points() const { return soc_grid.size(); }
  double value(std::size_t k, std::size_t i) const { return values[k * soc_points() + i]; }
  double action(std::size_t k, std::size_t i) const { return best_action[k * soc_points() + i]; }
};

// Nearest node of the uniform grid linspace(lo, hi, points); the snap rule
// shared by snap-mode DP and the brute-force enumeration oracle.
std::size_t snap_soc_index(double soc, double lo, double hi, std::size_t points);

// Backward value recursion over the (time x SoC) lattice, minimizing over
// the discretized action set intersected with the feasible interval.
ValueGrid solve(const DriveCycle& cycle, const DpConfig& cfg, const PowertrainParams& p,
                const EngineMap& map, const CostWeights& w);

// Cost-to-go at step k, linear in SoC between grid nodes.
double value_at(const ValueGrid& grid, std::size_t k, double soc);

struct DpTrajectory {
  ExpertPolicy policy;             // engine power per cycle sample (last entry unused, 0)
  std::vector<double> soc_trace;   // length N+1
  std::vector<double> fuel_gps;    // length N
  std::vector<double> p_d_w;       // length N
  std::vector<double> p_b_w;       // length N
  double total_cost = 0.0;
  double total_fuel_g = 0.0;
  std::size_t flagged_steps = 0;   // saturation or projection events
};

// Forward rollout of the solved grid: at each step the stored best action
// (interpolated at the continuous SoC, or the nearest node's action in
// snap mode) projected into the feasible interval, then stepped through
// the shared transition dynamics.
DpTrajectory extract_trajectory(const ValueGrid& grid, const DriveCycle& cycle, double soc0,
                                const DpConfig& cfg, const PowertrainParams& p,
                                const EngineMap& map, const CostWeights& w);

// Deterministic text dump of both tables with a self-describing header.
void save_value_grid(const ValueGrid& grid, const std::string& path);

}  // namespace hems
