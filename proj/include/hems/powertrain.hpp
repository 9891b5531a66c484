#pragma once

#include <string>
#include <vector>

#include "hems/util.hpp"

namespace hems {

// Physical constants of the series-parallel powertrain. Field names double
// as the keys of the flat key-value params file.
struct PowertrainParams {
  double M_v = 1325.0;       // curb weight [kg]
  double rho = 1.225;        // air density [kg/m^3]
  double f_roll = 0.012;     // rolling resistance coefficient [-]
  double A_a = 2.16;         // frontal area [m^2]
  double C_D = 0.26;         // aerodynamic drag coefficient [-]
  double g = 9.8;            // gravity [m/s^2]
  double V_oc = 200.0;       // battery open-circuit voltage [V]
  double r_0 = 0.25;         // battery internal resistance [ohm]
  double Q_c = 29160.0;      // battery capacity [C] (8.1 Ah)
  double soc_min = 0.2;      // SoC window [-]
  double soc_max = 0.9;
  double P_e_max = 57000.0;  // engine power ceiling [W]
  double P_b_min = -30000.0; // battery power window [W], discharge positive
  double P_b_max = 30000.0;
  double eta_elec = 0.9;     // lumped electric-path efficiency [-]

  // Battery power above this is physically unreachable (negative discriminant).
  double battery_power_physical_max() const { return V_oc * V_oc / (4.0 * r_0); }

  void validate() const;
};

PowertrainParams load_params(const std::string& path);
void save_params(const PowertrainParams& p, const std::string& path);

// One point of the minimum-fuel operating line.
struct OperatingPoint {
  double power_w = 0.0;
  double speed_rad_s = 0.0;
  double torque_nm = 0.0;
  double fuel_gps = 0.0;
};

// Gridded fuel-rate surface over (engine speed, torque) plus the derived
// minimum-fuel operating line indexed by engine power. Cells above the
// torque limit are NaN.
class EngineMap {
 public:
  // Builds the map from grid data; derives torque_max and the operating
  // line covering [0, power_max_w] and checks the map invariants.
  EngineMap(std::vector<double> speed_grid_rad_s, std::vector<double> torque_grid_nm,
            std::vector<std::vector<double>> fuel_rate_gps, double power_max_w);

  const std::vector<double>& speed_grid() const { return speed_grid_; }
  const std::vector<double>& torque_grid() const { return torque_grid_; }
  const std::vector<std::vector<double>>& fuel_rate() const { return fuel_rate_; }
  const std::vector<double>& torque_max() const { return torque_max_; }
  const std::vector<OperatingPoint>& operating_line() const { return ool_; }
  double power_max_w() const { return power_max_; }

  // Minimum-fuel operating point for a given engine power, linear in power
  // along the operating line. Throws if power is outside [0, power_max].
  OperatingPoint at_power(double power_w) const;

  // Engine efficiency along the operating line at `power_w` given a fuel
  // lower heating value [J/kg]. Zero at zero power.
  double efficiency_at(double power_w, double lhv_j_per_kg) const;

  // Mean operating-line efficiency over points with positive power.
  double mean_efficiency(double lhv_j_per_kg) const;

 private:
  std::vector<double> speed_grid_;
  std::vector<double> torque_grid_;
  std::vector<std::vector<double>> fuel_rate_;  // [speed][torque], g/s
  std::vector<double> torque_max_;
  std::vector<OperatingPoint> ool_;             // sorted by power
  double power_max_ = 0.0;
};

// Documented synthetic map: Willans-style efficiency bowl peaking at 35%
// near 65% of rated power, 1000-5000 rpm, 57 kW peak power, 115 Nm peak
// torque, lower heating value 42.5 MJ/kg.
EngineMap default_engine_map();

// CSV grid: first row is the speed grid in rpm (after a corner label),
// first column the torque grid in Nm, cells fuel rate in g/s.
EngineMap load_engine_map(const std::string& path, double power_max_w);
void save_engine_map(const EngineMap& map, const std::string& path);

constexpr double default_fuel_lhv_j_per_kg = 42.5e6;
constexpr double rpm_to_rad_s = 0.10471975511965977;  // pi/30

// Road-load power demand P_r + P_a + P_i at speed v and acceleration a.
// Negative while decelerating. Throws on negative speed.
double power_demand(double v, double a, const PowertrainParams& p);

// Battery terminal current for a given battery power (positive = discharge),
// internal-resistance model. Throws if power exceeds the physical limit.
double battery_current(double p_b_w, const PowertrainParams& p);

// SoC decrement over dt at battery power p_b_w: dt * I_b / Q_c.
double soc_delta(double p_b_w, double dt, const PowertrainParams& p);

struct SocStepResult {
  double soc = 0.0;
  bool clamped = false;  // raw result left [soc_min, soc_max]
};

// Explicit Euler SoC step, clamped into [soc_min, soc_max] with a flag.
SocStepResult soc_step(double soc, double p_b_w, double dt, const PowertrainParams& p);

struct SplitResult {
  double p_b_w = 0.0;
  bool saturated = false;  // raw battery power left [P_b_min, P_b_max]
};

// Battery power implied by demand and engine power through the lumped
// electric path: (P_d - P_e)/eta when discharging, (P_d - P_e)*eta when
// charging. Clamped into the battery power window with a flag.
SplitResult split_power(double p_d_w, double p_e_w, const PowertrainParams& p);

// Raw (unclamped) battery power for the same split; used for feasibility.
double split_power_raw(double p_d_w, double p_e_w, const PowertrainParams& p);

}  // namespace hems
