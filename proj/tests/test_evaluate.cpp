#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hems/evaluate.hpp"
#include "hems/util.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

using namespace hems;

namespace {

DriveCycle constant_speed_cycle(double v, std::size_t samples) {
  DriveCycle c;
  c.name = "const";
  c.dt = 1.0;
  c.speed.assign(samples, v);
  c.accel.assign(samples, 0.0);
  return c;
}

RunReport make_report(const std::string& strategy, double cost, const std::string& cycle) {
  RunReport r;
  r.strategy = strategy;
  r.cycle_name = cycle;
  r.total_cost = cost;
  r.raw_fuel_g = cost;
  r.equivalent_fuel_g = cost;
  r.initial_soc = 0.7;
  r.final_soc = 0.7;
  r.mpg = 30.0;
  return r;
}

}  // namespace

TEST_CASE("equivalent fuel equals raw fuel when soc is unchanged") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  CHECK(equivalent_fuel(123.456, 0.7, 0.7, p, map) == 123.456);
  CHECK(equivalent_fuel(0.0, 0.62, 0.62, p, map) == 0.0);
}

TEST_CASE("stored charge credits fuel and spent charge debits it") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  double base = equivalent_fuel(100.0, 0.7, 0.7, p, map);
  CHECK(equivalent_fuel(100.0, 0.7, 0.75, p, map) < base);
  CHECK(equivalent_fuel(100.0, 0.7, 0.6, p, map) > base);

  // Hand bookkeeping for a 0.1 deficit: missing battery energy, refilled
  // at the mean operating-line efficiency, costs that much fuel mass.
  double eta = map.mean_efficiency(default_fuel_lhv_j_per_kg);
  CHECK(eta > 0.2);
  CHECK(eta < 0.36);
  double joules = 0.1 * p.Q_c * p.V_oc;
  double debit_g = 1e3 * joules / (eta * default_fuel_lhv_j_per_kg);
  CHECK(equivalent_fuel(100.0, 0.7, 0.6, p, map) ==
        doctest::Approx(100.0 + debit_g).epsilon(1e-12));
}

TEST_CASE("equivalent fuel is affine in the soc delta") {
  PowertrainParams p;
  EngineMap map = default_engine_map();
  double eta = map.mean_efficiency(default_fuel_lhv_j_per_kg);
  double slope_ref = -1e3 * p.Q_c * p.V_oc / (eta * default_fuel_lhv_j_per_kg);
  for (double d : {-0.1, 0.05, 0.2}) {
    double lo = equivalent_fuel(50.0, 0.7, 0.7 + d, p, map);
    double hi = equivalent_fuel(50.0, 0.7, 0.7 + d + 0.01, p, map);
    double slope = (hi - lo) / 0.01;
    CHECK(slope == doctest::Approx(slope_ref).epsilon(1e-9));
  }
  CHECK_THROWS_AS(
      equivalent_fuel(std::numeric_limits<double>::quiet_NaN(), 0.7, 0.7, p, map), Error);
  CHECK_THROWS_AS(
      equivalent_fuel(1.0, std::numeric_limits<double>::infinity(), 0.7, p, map), Error);
}

TEST_CASE("one us gallon over one mile is one mpg") {
  DriveCycle mile = constant_speed_cycle(meters_per_mile, 2);
  CHECK(mile.distance_m() == meters_per_mile);
  double one_gallon_g = 1000.0 * default_fuel_density_kg_per_l * liters_per_us_gallon;
  Economy e = mpg(one_gallon_g, mile);
  CHECK_FALSE(e.infinite_economy);
  CHECK(e.mpg == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("doubling fuel at fixed distance halves mpg") {
  DriveCycle c = constant_speed_cycle(20.0, 101);
  Economy a = mpg(500.0, c);
  Economy b = mpg(1000.0, c);
  CHECK(a.mpg == doctest::Approx(2.0 * b.mpg).epsilon(1e-12));
}

TEST_CASE("mpg times fuel mass is constant for a fixed cycle") {
  DriveCycle c = constant_speed_cycle(15.0, 301);
  double ref = mpg(100.0, c).mpg * 100.0;
  for (double g : {37.0, 250.0, 1234.5}) {
    CHECK(mpg(g, c).mpg * g == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("zero fuel reports infinite economy instead of a number") {
  DriveCycle c = constant_speed_cycle(20.0, 61);
  CHECK(mpg(0.0, c).infinite_economy);
  CHECK(mpg(-3.0, c).infinite_economy);
  CHECK(mpg(0.0, c).mpg == 0.0);
}

TEST_CASE("zero-distance cycles cannot have an economy") {
  DriveCycle stopped = constant_speed_cycle(0.0, 61);
  CHECK_THROWS_AS(mpg(100.0, stopped), Error);
  DriveCycle c = constant_speed_cycle(20.0, 61);
  CHECK_THROWS_AS(mpg(100.0, c, 0.0), Error);
}

TEST_CASE("constant reward history converges at window zero") {
  std::vector<double> flat(250, -42.0);
  CHECK(convergence_episode(flat) == 0);
}

TEST_CASE("linear reward growth converges around the 95% point") {
  std::vector<double> ramp(1000);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  std::size_t ep = convergence_episode(ramp);
  // Direct formula: window means are i + 9.5, worst 9.5, final 989.5,
  // target 940.5, first crossing at i = 931.
  CHECK(ep == 931);
  CHECK(ep >= 930);
  CHECK(ep <= 970);
}

TEST_CASE("histories shorter than the smoothing window are rejected") {
  std::vector<double> tiny(convergence_window - 1, 1.0);
  CHECK_THROWS_AS(convergence_episode(tiny), Error);
  std::vector<double> exact(convergence_window, 1.0);
  CHECK(convergence_episode(exact) == 0);
}

TEST_CASE("a step jump converges right at the jump") {
  std::vector<double> hist(200, -100.0);
  for (std::size_t i = 60; i < hist.size(); ++i) hist[i] = -10.0;
  std::size_t ep = convergence_episode(hist);
  // The first window fully inside the high plateau starts at 60; earlier
  // windows mix in low episodes and miss the 95% target.
  CHECK(ep >= 55);
  CHECK(ep <= 60);
}

TEST_CASE("efficiency band mass counts only engine-on steps") {
  EngineMap map = default_engine_map();
  double peak_power = 0.0, peak_eff = 0.0;
  for (const OperatingPoint& pt : map.operating_line()) {
    if (pt.power_w <= 0.0) continue;
    double eff = pt.power_w / (pt.fuel_gps * 1e-3 * default_fuel_lhv_j_per_kg);
    if (eff > peak_eff) {
      peak_eff = eff;
      peak_power = pt.power_w;
    }
  }
  REQUIRE(peak_power > 0.0);

  std::vector<double> idle(50, 0.0);
  CHECK(efficiency_band_mass(idle, map) == 0.0);

  std::vector<double> at_peak(10, peak_power);
  CHECK(efficiency_band_mass(at_peak, map) == 1.0);

  // Low-power steps fall out of the band; off steps are excluded entirely.
  std::vector<double> mixed = {peak_power, 250.0, 0.0, 0.0};
  CHECK(efficiency_band_mass(mixed, map) == 0.5);
  CHECK(efficiency_band_mass(mixed, map, 0.0) == 1.0);

  std::vector<double> sweep;
  for (double f = 0.05; f <= 1.0; f += 0.05) sweep.push_back(f * 57000.0);
  double m = efficiency_band_mass(sweep, map);
  CHECK(m >= 0.0);
  CHECK(m <= 1.0);
}

TEST_CASE("comparison table keeps input order and checks the cost ladder") {
  std::vector<RunReport> reports = {
      make_report("dql", 13.0, "city"),
      make_report("dp", 10.0, "city"),
      make_report("ddpg", 12.0, "city"),
      make_report("ddpg_guarded", 11.0, "city"),
  };
  Comparison c = compare(reports);
  REQUIRE(c.rows.size() == 4);
  CHECK(c.rows[0].strategy == "dql");
  CHECK(c.rows[1].strategy == "dp");
  REQUIRE(c.ordering.size() == 3);
  CHECK(c.ordering[0].name == "dp<=ddpg_guarded");
  CHECK(c.ordering[1].name == "ddpg_guarded<=ddpg");
  CHECK(c.ordering[2].name == "ddpg<=dql");
  CHECK(c.all_pass());
  CHECK(c.rows[0].gap_vs_dp == (13.0 - 10.0) / 10.0);
  CHECK(c.rows[1].gap_vs_dp == 0.0);

  // Breaking the ladder flips exactly the affected flag.
  reports[3].total_cost = 12.5;  // guarded now worse than conventional
  Comparison broken = compare(reports);
  CHECK(broken.ordering[0].pass);
  CHECK_FALSE(broken.ordering[1].pass);
  CHECK(broken.ordering[2].pass);
  CHECK_FALSE(broken.all_pass());
}

TEST_CASE("single-pair comparison carries the relative gap") {
  RunReport dp = make_report("dp", 20.0, "loop");
  RunReport g = make_report("ddpg_guarded", 21.0, "loop");
  Comparison c = compare({dp, g});
  REQUIRE(c.rows.size() == 2);
  REQUIRE(c.ordering.size() == 1);
  CHECK(c.ordering[0].pass);
  CHECK(c.rows[1].gap_vs_dp == (21.0 - 20.0) / 20.0);

  // Without a DP row the gap column is not a number.
  Comparison nodp = compare({make_report("ddpg", 5.0, "loop"), g});
  CHECK(std::isnan(nodp.rows[0].gap_vs_dp));
  CHECK(std::isnan(nodp.rows[1].gap_vs_dp));
}

TEST_CASE("duplicated identical reports show zero gaps and pass") {
  RunReport r = make_report("dp", 10.0, "city");
  Comparison c = compare({r, r});
  REQUIRE(c.rows.size() == 2);
  CHECK(c.rows[0].gap_vs_dp == 0.0);
  CHECK(c.rows[1].gap_vs_dp == 0.0);
  CHECK(c.all_pass());

  RunReport g = make_report("ddpg_guarded", 10.0, "city");
  Comparison tie = compare({r, g, r, g});
  CHECK(tie.rows.size() == 4);
  for (const ComparisonRow& row : tie.rows) CHECK(row.gap_vs_dp == 0.0);
  CHECK(tie.all_pass());
}

TEST_CASE("comparison rejects mixed cycles and tiny sets") {
  RunReport a = make_report("dp", 10.0, "city");
  RunReport b = make_report("ddpg", 11.0, "highway");
  CHECK_THROWS_AS(compare({a, b}), Error);
  CHECK_THROWS_AS(compare({a}), Error);
}

TEST_CASE("compare does not mutate its inputs") {
  std::vector<RunReport> reports = {make_report("dp", 10.0, "city"),
                                    make_report("dql", 14.0, "city")};
  std::vector<RunReport> before = reports;
  compare(reports);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].strategy == before[i].strategy);
    CHECK(reports[i].total_cost == before[i].total_cost);
    CHECK(reports[i].equivalent_fuel_g == before[i].equivalent_fuel_g);
  }
}

TEST_CASE("run reports round-trip through json") {
  RunReport r;
  r.strategy = "ddpg_guarded";
  r.cycle_name = "urban_a";
  r.training_cycle = "urban_b";
  r.raw_fuel_g = 123.4567890123;
  r.initial_soc = 0.7;
  r.final_soc = 0.6823456789;
  r.equivalent_fuel_g = 140.00000000001;
  r.mpg = 87.654321;
  r.infinite_economy = false;
  r.total_cost = 12.3456789;
  r.convergence_episode = 137;
  r.wall_seconds = 98.76;
  r.flagged_steps = 3;
  r.traces_path = "runs/x/traces.csv";
  r.checkpoint_path = "runs/x/actor.ckpt";

  std::string path = "/tmp/hems_test_report.json";
  save_report(r, path);
  RunReport back = load_report(path);
  CHECK(back.strategy == r.strategy);
  CHECK(back.cycle_name == r.cycle_name);
  CHECK(back.training_cycle == r.training_cycle);
  CHECK(back.raw_fuel_g == r.raw_fuel_g);
  CHECK(back.initial_soc == r.initial_soc);
  CHECK(back.final_soc == r.final_soc);
  CHECK(back.equivalent_fuel_g == r.equivalent_fuel_g);
  CHECK(back.mpg == r.mpg);
  CHECK(back.infinite_economy == r.infinite_economy);
  CHECK(back.total_cost == r.total_cost);
  CHECK(back.convergence_episode == r.convergence_episode);
  CHECK(back.wall_seconds == r.wall_seconds);
  CHECK(back.flagged_steps == r.flagged_steps);
  CHECK(back.traces_path == r.traces_path);
  CHECK(back.checkpoint_path == r.checkpoint_path);

  // Sentinels (not-applicable markers) survive the round trip.
  RunReport dp = make_report("dp", 10.0, "city");
  dp.convergence_episode = -1;
  dp.wall_seconds = -1.0;
  dp.infinite_economy = true;
  save_report(dp, path);
  RunReport dp_back = load_report(path);
  CHECK(dp_back.convergence_episode == -1);
  CHECK(dp_back.wall_seconds == -1.0);
  CHECK(dp_back.infinite_economy);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_report("/tmp/does_not_exist_hems_report.json"), Error);
}

TEST_CASE("comparison csv lists rows then ordering flags") {
  std::vector<RunReport> reports = {make_report("dp", 10.0, "city"),
                                    make_report("dql", 14.0, "city")};
  Comparison c = compare(reports);
  std::string path = "/tmp/hems_test_comparison.csv";
  save_comparison_csv(c, path);
  std::string text = read_text_file(path);
  CHECK(text.find("strategy,total_cost,equivalent_fuel_g,mpg,gap_vs_dp\n") == 0);
  CHECK(text.find("dp,") != std::string::npos);
  CHECK(text.find("dql,14,") != std::string::npos);
  CHECK(text.find("# ordering dp<=dql pass") != std::string::npos);
  // Numeric cells round-trip through the shortest-form encoder.
  CHECK(parse_double(split(split(text, '\n')[1], ',')[1], "cell") == 10.0);
  CHECK(parse_double(split(split(text, '\n')[2], ',')[4], "cell") == 0.4);
  std::remove(path.c_str());
}
