#pragma once

#include "hems/drl.hpp"
#include "hems/evaluate.hpp"

namespace hems {

// Output root: $HEMS_OUT_ROOT when set, else ./runs.
std::string default_out_root();

// Creates <out_root>/<label>_<timestamp>/ and returns its path. The
// timestamp suffix is excluded from all determinism checks.
std::string make_run_dir(const std::string& out_root, const std::string& label);

// `episode,total_reward,total_fuel_g,final_soc`, one row per episode.
void write_reward_csv(const std::vector<EpisodeStat>& history, const std::string& path);
std::vector<EpisodeStat> load_reward_csv(const std::string& path);

// `t,v,pd_w,pe_w,pb_w,soc,fuel_gps`, one row per step; soc is post-step.
struct TraceTable {
  double dt = 1.0;
  std::vector<double> v;          // speed at step k
  std::vector<double> p_d_w;
  std::vector<double> p_e_w;
  std::vector<double> p_b_w;
  std::vector<double> soc;        // after step k
  std::vector<double> fuel_gps;
};
TraceTable traces_from_rollout(const DriveCycle& cycle, const RolloutResult& r);
TraceTable traces_from_dp(const DriveCycle& cycle, const DpTrajectory& t);
void write_traces_csv(const TraceTable& t, const std::string& path);

}  // namespace hems
