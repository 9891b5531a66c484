#include "hems/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hems {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) fail(Status::invalid_argument, std::string(name) + " must be > 0");
}

// Linear interpolation of y over sorted grid x at query q (q inside range).
double interp(const std::vector<double>& x, const std::vector<double>& y, double q) {
  auto it = std::upper_bound(x.begin(), x.end(), q);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  std::size_t hi = static_cast<std::size_t>(it - x.begin());
  std::size_t lo = hi - 1;
  double w = (q - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + w * (y[hi] - y[lo]);
}

}  // namespace

void PowertrainParams::validate() const {
  check_positive(M_v, "M_v");
  check_positive(rho, "rho");
  check_positive(f_roll, "f_roll");
  check_positive(A_a, "A_a");
  check_positive(C_D, "C_D");
  check_positive(g, "g");
  check_positive(V_oc, "V_oc");
  check_positive(r_0, "r_0");
  check_positive(Q_c, "Q_c");
  check_positive(P_e_max, "P_e_max");
  check_positive(eta_elec, "eta_elec");
  if (eta_elec > 1.0) fail(Status::invalid_argument, "eta_elec must be <= 1");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0))
    fail(Status::invalid_argument, "require 0 <= soc_min < soc_max <= 1");
  if (!(P_b_min < P_b_max)) fail(Status::invalid_argument, "require P_b_min < P_b_max");
  if (P_b_max > battery_power_physical_max())
    fail(Status::invalid_argument, "P_b_max exceeds V_oc^2/(4*r_0)");
}

PowertrainParams load_params(const std::string& path) {
  KeyValueMap kv = load_key_value_file(path);
  PowertrainParams p;
  for (const auto& [key, value] : kv) {
    double* field = nullptr;
    if (key == "M_v") field = &p.M_v;
    else if (key == "rho") field = &p.rho;
    else if (key == "f_roll") field = &p.f_roll;
    else if (key == "A_a") field = &p.A_a;
    else if (key == "C_D") field = &p.C_D;
    else if (key == "g") field = &p.g;
    else if (key == "V_oc") field = &p.V_oc;
    else if (key == "r_0") field = &p.r_0;
    else if (key == "Q_c") field = &p.Q_c;
    else if (key == "soc_min") field = &p.soc_min;
    else if (key == "soc_max") field = &p.soc_max;
    else if (key == "P_e_max") field = &p.P_e_max;
    else if (key == "P_b_min") field = &p.P_b_min;
    else if (key == "P_b_max") field = &p.P_b_max;
    else if (key == "eta_elec") field = &p.eta_elec;
    else fail(Status::parse_error, path + ": unknown params key '" + key + "'");
    *field = parse_double(value, "params." + key);
  }
  p.validate();
  return p;
}

void save_params(const PowertrainParams& p, const std::string& path) {
  KeyValueMap kv;
  kv["M_v"] = format_double(p.M_v);
  kv["rho"] = format_double(p.rho);
  kv["f_roll"] = format_double(p.f_roll);
  kv["A_a"] = format_double(p.A_a);
  kv["C_D"] = format_double(p.C_D);
  kv["g"] = format_double(p.g);
  kv["V_oc"] = format_double(p.V_oc);
  kv["r_0"] = format_double(p.r_0);
  kv["Q_c"] = format_double(p.Q_c);
  kv["soc_min"] = format_double(p.soc_min);
  kv["soc_max"] = format_double(p.soc_max);
  kv["P_e_max"] = format_double(p.P_e_max);
  kv["P_b_min"] = format_double(p.P_b_min);
  kv["P_b_max"] = format_double(p.P_b_max);
  kv["eta_elec"] = format_double(p.eta_elec);
  write_text_file(path, render_key_values(kv));
}

EngineMap::EngineMap(std::vector<double> speed_grid_rad_s, std::vector<double> torque_grid_nm,
                     std::vector<std::vector<double>> fuel_rate_gps, double power_max_w)
    : speed_grid_(std::move(speed_grid_rad_s)),
      torque_grid_(std::move(torque_grid_nm)),
      fuel_rate_(std::move(fuel_rate_gps)),
      power_max_(power_max_w) {
  if (speed_grid_.size() < 2 || torque_grid_.size() < 2)
    fail(Status::invalid_argument, "engine map needs at least a 2x2 grid");
  for (std::size_t i = 1; i < speed_grid_.size(); ++i)
    if (!(speed_grid_[i] > speed_grid_[i - 1]))
      fail(Status::invalid_argument, "engine map speed grid must be strictly increasing");
  for (std::size_t j = 1; j < torque_grid_.size(); ++j)
    if (!(torque_grid_[j] > torque_grid_[j - 1]))
      fail(Status::invalid_argument, "engine map torque grid must be strictly increasing");
  if (!(speed_grid_.front() > 0.0) || torque_grid_.front() < 0.0)
    fail(Status::invalid_argument, "engine map grids must be positive speed, non-negative torque");
  if (fuel_rate_.size() != speed_grid_.size())
    fail(Status::invalid_argument, "engine map fuel grid row count mismatch");
  if (!(power_max_ > 0.0)) fail(Status::invalid_argument, "engine map power_max must be > 0");

  torque_max_.assign(speed_grid_.size(), -1.0);
  for (std::size_t i = 0; i < speed_grid_.size(); ++i) {
    if (fuel_rate_[i].size() != torque_grid_.size())
      fail(Status::invalid_argument, "engine map fuel grid column count mismatch");
    for (std::size_t j = 0; j < torque_grid_.size(); ++j) {
      double f = fuel_rate_[i][j];
      if (std::isnan(f)) continue;  // above the torque limit
      if (f < 0.0) fail(Status::invalid_argument, "engine map fuel rate must be >= 0");
      if (torque_grid_[j] == 0.0 && f != 0.0)
        fail(Status::invalid_argument, "engine map fuel rate must be 0 at zero torque");
      torque_max_[i] = torque_grid_[j];
    }
    if (torque_max_[i] < 0.0)
      fail(Status::invalid_argument, "engine map has a speed column with no valid cell");
  }

  // Minimum-fuel operating line on a uniform power grid: at each power,
  // scan speeds, interpolate fuel along the torque axis at T = P/w, keep
  // the cheapest point (ties resolve to the lower speed).
  constexpr double power_step = 250.0;
  std::size_t n = static_cast<std::size_t>(std::ceil(power_max_ / power_step)) + 1;
  ool_.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    double p = std::min(static_cast<double>(k) * power_step, power_max_);
    if (p == 0.0) {
      ool_.push_back({0.0, speed_grid_.front(), 0.0, 0.0});
      continue;
    }
    OperatingPoint best;
    best.fuel_gps = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < speed_grid_.size(); ++i) {
      double w = speed_grid_[i];
      double torque = p / w;
      if (torque > torque_max_[i]) continue;
      double fuel = interp(torque_grid_, fuel_rate_[i], torque);
      if (fuel < best.fuel_gps) best = {p, w, torque, fuel};
    }
    if (!std::isfinite(best.fuel_gps))
      fail(Status::invalid_argument,
           "engine map cannot deliver " + format_double(p) + " W at any grid speed");
    ool_.push_back(best);
  }
  for (std::size_t k = 1; k < ool_.size(); ++k)
    if (ool_[k].fuel_gps < ool_[k - 1].fuel_gps)
      fail(Status::invalid_argument, "operating-line fuel rate not monotone in power");
}

OperatingPoint EngineMap::at_power(double power_w) const {
  if (!(power_w >= 0.0) || power_w > power_max_)
    fail(Status::out_of_range,
         "engine power " + format_double(power_w) + " W outside [0, " +
             format_double(power_max_) + "]");
  // Uniform grid except (possibly) the last point; binary search is cheap
  // and stays correct for either layout.
  auto cmp = [](const OperatingPoint& pt, double q) { return pt.power_w < q; };
  auto it = std::lower_bound(ool_.begin(), ool_.end(), power_w, cmp);
  if (it == ool_.end()) return ool_.back();
  std::size_t hi = static_cast<std::size_t>(it - ool_.begin());
  if (ool_[hi].power_w == power_w || hi == 0) return ool_[hi];
  const OperatingPoint& a = ool_[hi - 1];
  const OperatingPoint& b = ool_[hi];
  double w = (power_w - a.power_w) / (b.power_w - a.power_w);
  OperatingPoint out;
  out.power_w = power_w;
  out.speed_rad_s = a.speed_rad_s + w * (b.speed_rad_s - a.speed_rad_s);
  out.torque_nm = a.torque_nm + w * (b.torque_nm - a.torque_nm);
  out.fuel_gps = a.fuel_gps + w * (b.fuel_gps - a.fuel_gps);
  return out;
}

double EngineMap::efficiency_at(double power_w, double lhv_j_per_kg) const {
  if (power_w == 0.0) return 0.0;
  OperatingPoint pt = at_power(power_w);
  if (pt.fuel_gps <= 0.0) return 0.0;
  return power_w / (pt.fuel_gps * 1e-3 * lhv_j_per_kg);
}

double EngineMap::mean_efficiency(double lhv_j_per_kg) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& pt : ool_) {
    if (pt.power_w <= 0.0) continue;
    sum += pt.power_w / (pt.fuel_gps * 1e-3 * lhv_j_per_kg);
    ++n;
  }
  if (n == 0) fail(Status::bad_state, "operating line has no positive-power points");
  return sum / static_cast<double>(n);
}

EngineMap default_engine_map() {
  // Synthetic map: Willans-style Gaussian efficiency bowl peaking at 35%
  // near 65% of rated power. Torque envelope 95 Nm at 1000 rpm rising to
  // the 115 Nm peak at 4200 rpm, tapering to 110 Nm at 5000 rpm so the
  // 57 kW rating is reachable at top speed.
  constexpr double rated_w = 57000.0;
  constexpr double eff_max = 0.35;
  const double w_center = 3300.0 * rpm_to_rad_s;
  const double t_center = 0.65 * rated_w / w_center;  // ~107 Nm
  const double w_span = 2000.0 * rpm_to_rad_s;
  const double t_span = 70.0;

  std::vector<double> speeds, torques;
  for (int rpm = 1000; rpm <= 5000; rpm += 100) speeds.push_back(rpm * rpm_to_rad_s);
  for (int j = 0; j <= 115; ++j) torques.push_back(1.0 * j);  // 0..115 Nm

  auto envelope = [](double rpm) {
    if (rpm <= 4200.0) return 95.0 + (115.0 - 95.0) * (rpm - 1000.0) / 3200.0;
    return 115.0 + (110.0 - 115.0) * (rpm - 4200.0) / 800.0;
  };

  std::vector<std::vector<double>> fuel(speeds.size(),
                                        std::vector<double>(torques.size(), nan_v));
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    double rpm = 1000.0 + 100.0 * static_cast<double>(i);
    double t_lim = envelope(rpm);
    for (std::size_t j = 0; j < torques.size(); ++j) {
      double t = torques[j];
      if (t > t_lim) break;
      if (t == 0.0) {
        fuel[i][j] = 0.0;
        continue;
      }
      double x = (speeds[i] - w_center) / w_span;
      double y = (t - t_center) / t_span;
      // The torque exponent must stay below 0.86: any steeper and fuel
      // rate would fall with rising torque below the bowl center, which
      // breaks the operating line's fuel-vs-power monotonicity.
      double eff = eff_max * std::exp(-1.2 * x * x - 0.5 * y * y);
      double power = speeds[i] * t;
      fuel[i][j] = 1e3 * power / (eff * default_fuel_lhv_j_per_kg);
    }
  }
  return EngineMap(std::move(speeds), std::move(torques), std::move(fuel), rated_w);
}

EngineMap load_engine_map(const std::string& path, double power_max_w) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": empty engine map");
  std::vector<std::string> head = split(trim(line), ',');
  if (head.size() < 3) fail(Status::parse_error, path + ": engine map header too short");
  std::vector<double> speeds;
  for (std::size_t c = 1; c < head.size(); ++c)
    speeds.push_back(parse_double(head[c], path + " speed") * rpm_to_rad_s);

  std::vector<double> torques;
  std::vector<std::vector<double>> fuel;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cells = split(t, ',');
    if (cells.size() != head.size())
      fail(Status::parse_error, path + ": row " + std::to_string(row) + " has " +
                                    std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(head.size()));
    torques.push_back(parse_double(cells[0], path + " torque"));
    std::vector<double> r;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      std::string cell = trim(cells[c]);
      if (cell.empty() || cell == "nan")
        r.push_back(nan_v);
      else
        r.push_back(parse_double(cell, path + " fuel"));
    }
    fuel.push_back(std::move(r));
  }
  if (torques.empty()) fail(Status::parse_error, path + ": engine map has no torque rows");

  // File layout is [torque][speed]; the map stores [speed][torque].
  std::vector<std::vector<double>> by_speed(speeds.size(), std::vector<double>(torques.size()));
  for (std::size_t i = 0; i < speeds.size(); ++i)
    for (std::size_t j = 0; j < torques.size(); ++j) by_speed[i][j] = fuel[j][i];
  return EngineMap(std::move(speeds), std::move(torques), std::move(by_speed), power_max_w);
}

void save_engine_map(const EngineMap& map, const std::string& path) {
  std::string out = "torque_nm\\speed_rpm";
  for (double w : map.speed_grid()) out += "," + format_double(w / rpm_to_rad_s);
  out += "\n";
  const auto& torques = map.torque_grid();
  for (std::size_t j = 0; j < torques.size(); ++j) {
    out += format_double(torques[j]);
    for (std::size_t i = 0; i < map.speed_grid().size(); ++i) {
      double f = map.fuel_rate()[i][j];
      out += ",";
      out += std::isnan(f) ? "nan" : format_double(f);
    }
    out += "\n";
  }
  write_text_file(path, out);
}

double power_demand(double v, double a, const PowertrainParams& p) {
  if (v < 0.0) fail(Status::invalid_argument, "speed must be >= 0");
  double p_roll = p.f_roll * p.M_v * p.g * v;
  double p_aero = 0.5 * p.rho * p.A_a * p.C_D * v * v * v;
  double p_inertia = p.M_v * a * v;
  return p_roll + p_aero + p_inertia;
}

double battery_current(double p_b_w, const PowertrainParams& p) {
  double disc = p.V_oc * p.V_oc - 4.0 * p.r_0 * p_b_w;
  if (disc < 0.0)
    fail(Status::out_of_range, "battery power " + format_double(p_b_w) +
                                   " W exceeds the physical limit " +
                                   format_double(p.battery_power_physical_max()) + " W");
  return (p.V_oc - std::sqrt(disc)) / (2.0 * p.r_0);
}

double soc_delta(double p_b_w, double dt, const PowertrainParams& p) {
  return dt * battery_current(p_b_w, p) / p.Q_c;
}

SocStepResult soc_step(double soc, double p_b_w, double dt, const PowertrainParams& p) {
  double next = soc - soc_delta(p_b_w, dt, p);
  SocStepResult r;
  r.soc = std::clamp(next, p.soc_min, p.soc_max);
  r.clamped = next < p.soc_min || next > p.soc_max;
  return r;
}

double split_power_raw(double p_d_w, double p_e_w, const PowertrainParams& p) {
  double diff = p_d_w - p_e_w;
  return diff >= 0.0 ? diff / p.eta_elec : diff * p.eta_elec;
}

SplitResult split_power(double p_d_w, double p_e_w, const PowertrainParams& p) {
  double raw = split_power_raw(p_d_w, p_e_w, p);
  SplitResult r;
  r.p_b_w = std::clamp(raw, p.P_b_min, p.P_b_max);
  r.saturated = raw < p.P_b_min || raw > p.P_b_max;
  return r;
}

}  // namespace hems
