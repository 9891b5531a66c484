#include "hems/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace hems {

using nlohmann::json;

void save_report(const RunReport& r, const std::string& path) {
  json j;
  j["strategy"] = r.strategy;
  j["cycle_name"] = r.cycle_name;
  j["training_cycle"] = r.training_cycle;
  j["raw_fuel_g"] = r.raw_fuel_g;
  j["initial_soc"] = r.initial_soc;
  j["final_soc"] = r.final_soc;
  j["equivalent_fuel_g"] = r.equivalent_fuel_g;
  if (r.infinite_economy)
    j["mpg"] = nullptr;
  else
    j["mpg"] = r.mpg;
  j["infinite_economy"] = r.infinite_economy;
  j["total_cost"] = r.total_cost;
  if (r.convergence_episode >= 0)
    j["convergence_episode"] = r.convergence_episode;
  else
    j["convergence_episode"] = nullptr;
  if (r.wall_seconds >= 0.0)
    j["wall_seconds"] = r.wall_seconds;
  else
    j["wall_seconds"] = nullptr;
  j["flagged_steps"] = r.flagged_steps;
  j["traces_path"] = r.traces_path;
  j["checkpoint_path"] = r.checkpoint_path;
  write_text_file(path, j.dump(2) + "\n");
}

RunReport load_report(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(Status::parse_error, path + ": " + e.what());
  }
  RunReport r;
  try {
    r.strategy = j.at("strategy").get<std::string>();
    r.cycle_name = j.at("cycle_name").get<std::string>();
    r.training_cycle = j.value("training_cycle", std::string());
    r.raw_fuel_g = j.at("raw_fuel_g").get<double>();
    r.initial_soc = j.at("initial_soc").get<double>();
    r.final_soc = j.at("final_soc").get<double>();
    r.equivalent_fuel_g = j.at("equivalent_fuel_g").get<double>();
    r.infinite_economy = j.value("infinite_economy", false);
    if (!r.infinite_economy && j.contains("mpg") && !j["mpg"].is_null())
      r.mpg = j["mpg"].get<double>();
    r.total_cost = j.at("total_cost").get<double>();
    if (j.contains("convergence_episode") && !j["convergence_episode"].is_null())
      r.convergence_episode = j["convergence_episode"].get<long>();
    if (j.contains("wall_seconds") && !j["wall_seconds"].is_null())
      r.wall_seconds = j["wall_seconds"].get<double>();
    r.flagged_steps = j.value("flagged_steps", std::size_t{0});
    r.traces_path = j.value("traces_path", std::string());
    r.checkpoint_path = j.value("checkpoint_path", std::string());
  } catch (const json::exception& e) {
    fail(Status::parse_error, path + ": " + e.what());
  }
  return r;
}

double equivalent_fuel(double raw_fuel_g, double soc0, double soc_n, const PowertrainParams& p,
                       const EngineMap& map, double lhv_j_per_kg) {
  if (!std::isfinite(raw_fuel_g) || !std::isfinite(soc0) || !std::isfinite(soc_n))
    fail(Status::invalid_argument, "equivalent_fuel needs finite inputs");
  double eta = map.mean_efficiency(lhv_j_per_kg);
  double battery_j = (soc_n - soc0) * p.Q_c * p.V_oc;
  return raw_fuel_g - 1e3 * battery_j / (eta * lhv_j_per_kg);
}

Economy mpg(double equivalent_fuel_g, const DriveCycle& cycle, double fuel_density_kg_per_l) {
  if (!(fuel_density_kg_per_l > 0.0)) fail(Status::invalid_argument, "fuel density must be > 0");
  double dist_m = cycle.distance_m();
  if (!(dist_m > 0.0)) fail(Status::invalid_argument, "cycle distance must be > 0");
  Economy e;
  if (!(equivalent_fuel_g > 0.0)) {
    e.infinite_economy = true;
    return e;
  }
  double miles = dist_m / meters_per_mile;
  double gallons = equivalent_fuel_g * 1e-3 / fuel_density_kg_per_l / liters_per_us_gallon;
  e.mpg = miles / gallons;
  return e;
}

std::size_t convergence_episode(const std::vector<double>& reward_history, double fraction) {
  const std::size_t w = convergence_window;
  if (reward_history.size() < w)
    fail(Status::invalid_argument, "reward history shorter than the smoothing window");
  std::size_t windows = reward_history.size() - w + 1;
  // Rolling window means, indexed by window start.
  std::vector<double> mean(windows);
  double acc = 0.0;
  for (std::size_t i = 0; i < w; ++i) acc += reward_history[i];
  mean[0] = acc / static_cast<double>(w);
  for (std::size_t i = 1; i < windows; ++i) {
    acc += reward_history[i + w - 1] - reward_history[i - 1];
    mean[i] = acc / static_cast<double>(w);
  }
  double final_mean = mean.back();
  double worst = *std::min_element(mean.begin(), mean.end());
  double target = worst + fraction * (final_mean - worst);
  for (std::size_t i = 0; i < windows; ++i)
    if (mean[i] >= target) return i;
  return windows - 1;  // unreachable unless rounding; the final window qualifies
}

double efficiency_band_mass(const std::vector<double>& p_e_w, const EngineMap& map,
                            double band_fraction, double lhv_j_per_kg) {
  double eff_max = 0.0;
  for (const OperatingPoint& pt : map.operating_line())
    if (pt.power_w > 0.0)
      eff_max = std::max(eff_max, pt.power_w / (pt.fuel_gps * 1e-3 * lhv_j_per_kg));
  double threshold = band_fraction * eff_max;
  std::size_t on = 0, in_band = 0;
  for (double pe : p_e_w) {
    if (!(pe > 0.0)) continue;
    ++on;
    if (map.efficiency_at(pe, lhv_j_per_kg) >= threshold) ++in_band;
  }
  if (on == 0) return 0.0;
  return static_cast<double>(in_band) / static_cast<double>(on);
}

bool Comparison::all_pass() const {
  for (const OrderingFlag& f : ordering)
    if (!f.pass) return false;
  return true;
}

Comparison compare(const std::vector<RunReport>& reports) {
  if (reports.size() < 2) fail(Status::invalid_argument, "compare needs at least 2 reports");
  for (const RunReport& r : reports)
    if (r.cycle_name != reports.front().cycle_name)
      fail(Status::invalid_argument, "compare: cycle mismatch ('" + r.cycle_name + "' vs '" +
                                         reports.front().cycle_name + "')");

  Comparison c;
  double dp_cost = std::numeric_limits<double>::quiet_NaN();
  for (const RunReport& r : reports)
    if (r.strategy == "dp") dp_cost = r.total_cost;

  for (const RunReport& r : reports) {
    ComparisonRow row;
    row.strategy = r.strategy;
    row.total_cost = r.total_cost;
    row.equivalent_fuel_g = r.equivalent_fuel_g;
    row.mpg = r.mpg;
    row.infinite_economy = r.infinite_economy;
    row.gap_vs_dp = std::isnan(dp_cost) ? dp_cost : (r.total_cost - dp_cost) / dp_cost;
    c.rows.push_back(row);
  }

  // Expected cost ordering over whichever strategies are present.
  const char* order[] = {"dp", "ddpg_guarded", "ddpg", "dql"};
  const RunReport* prev = nullptr;
  const char* prev_name = nullptr;
  for (const char* name : order) {
    const RunReport* cur = nullptr;
    for (const RunReport& r : reports)
      if (r.strategy == name) cur = &r;
    if (!cur) continue;
    if (prev) {
      OrderingFlag f;
      f.name = std::string(prev_name) + "<=" + name;
      f.pass = prev->total_cost <= cur->total_cost;
      c.ordering.push_back(f);
    }
    prev = cur;
    prev_name = name;
  }
  return c;
}

void save_comparison_csv(const Comparison& c, const std::string& path) {
  std::string s = "strategy,total_cost,equivalent_fuel_g,mpg,gap_vs_dp\n";
  for (const ComparisonRow& r : c.rows) {
    s += r.strategy + "," + format_double(r.total_cost) + "," +
         format_double(r.equivalent_fuel_g) + ",";
    s += r.infinite_economy ? "inf" : format_double(r.mpg);
    s += ",";
    s += std::isnan(r.gap_vs_dp) ? "" : format_double(r.gap_vs_dp);
    s += "\n";
  }
  for (const OrderingFlag& f : c.ordering)
    s += "# ordering " + f.name + " " + (f.pass ? "pass" : "fail") + "\n";
  write_text_file(path, s);
}

}  // namespace hems
