#pragma once

#include "hems/cycle.hpp"
#include "hems/powertrain.hpp"

namespace hems {

constexpr double meters_per_mile = 1609.344;
constexpr double liters_per_us_gallon = 3.785411784;
constexpr double default_fuel_density_kg_per_l = 0.7505;

// Completed-run summary; serialized verbatim to the report JSON.
struct RunReport {
  std::string strategy;       // dp | ddpg_guarded | ddpg | dql
  std::string cycle_name;
  std::string training_cycle; // empty when trained and evaluated on the same cycle
  double raw_fuel_g = 0.0;
  double initial_soc = 0.0;
  double final_soc = 0.0;
  double equivalent_fuel_g = 0.0;
  double mpg = 0.0;
  bool infinite_economy = false;
  double total_cost = 0.0;
  long convergence_episode = -1;  // -1 when not applicable
  double wall_seconds = -1.0;     // -1 when not applicable (DP comparison rows)
  std::size_t flagged_steps = 0;
  std::string traces_path;
  std::string checkpoint_path;
};

void save_report(const RunReport& r, const std::string& path);
RunReport load_report(const std::string& path);

// SoC-corrected fuel: surplus stored charge credits fuel mass, deficit
// debits it, through the mean operating-line efficiency.
double equivalent_fuel(double raw_fuel_g, double soc0, double soc_n, const PowertrainParams& p,
                       const EngineMap& map, double lhv_j_per_kg = default_fuel_lhv_j_per_kg);

struct Economy {
  double mpg = 0.0;
  bool infinite_economy = false;  // zero/negative fuel mass; mpg undefined
};

// Miles per US gallon from fuel mass and cycle distance.
Economy mpg(double equivalent_fuel_g, const DriveCycle& cycle,
            double fuel_density_kg_per_l = default_fuel_density_kg_per_l);

// First index i whose window mean over history[i, i+19] reaches
// worst + fraction*(final - worst), where final is the last full window
// and worst the minimum over all windows.
std::size_t convergence_episode(const std::vector<double>& reward_history,
                                double fraction = 0.95);
constexpr std::size_t convergence_window = 20;

// Fraction of positive-power steps whose operating-line efficiency is at
// least band_fraction of the map's peak; 0 when the engine never runs.
double efficiency_band_mass(const std::vector<double>& p_e_w, const EngineMap& map,
                            double band_fraction = 0.9,
                            double lhv_j_per_kg = default_fuel_lhv_j_per_kg);

struct ComparisonRow {
  std::string strategy;
  double total_cost = 0.0;
  double equivalent_fuel_g = 0.0;
  double mpg = 0.0;
  bool infinite_economy = false;
  double gap_vs_dp = 0.0;  // (cost - cost_dp)/cost_dp; NaN without a DP row
};

struct OrderingFlag {
  std::string name;  // e.g. "dp<=ddpg_guarded"
  bool pass = false;
};

struct Comparison {
  std::vector<ComparisonRow> rows;        // input order
  std::vector<OrderingFlag> ordering;     // adjacent pairs present, canonical order
  bool all_pass() const;
};

// Cross-strategy table; all reports must share a cycle. Ordering checks
// follow cost(dp) <= cost(ddpg_guarded) <= cost(ddpg) <= cost(dql) over
// the strategies present, reported as flags rather than errors.
Comparison compare(const std::vector<RunReport>& reports);

void save_comparison_csv(const Comparison& c, const std::string& path);

}  // namespace hems
