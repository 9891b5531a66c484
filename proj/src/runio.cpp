#include "hems/runio.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace hems {

std::string default_out_root() {
  const char* env = std::getenv("HEMS_OUT_ROOT");
  return env && *env ? env : "runs";
}

std::string make_run_dir(const std::string& out_root, const std::string& label) {
  namespace fs = std::filesystem;
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
  fs::path dir = fs::path(out_root) / (label + "_" + std::to_string(ns));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Status::io_error, "cannot create run dir " + dir.string() + ": " + ec.message());
  return dir.string();
}

void write_reward_csv(const std::vector<EpisodeStat>& history, const std::string& path) {
  std::string s = "episode,total_reward,total_fuel_g,final_soc\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    s += std::to_string(i) + "," + format_double(history[i].total_reward) + "," +
         format_double(history[i].total_fuel_g) + "," + format_double(history[i].final_soc) +
         "\n";
  }
  write_text_file(path, s);
}

std::vector<EpisodeStat> load_reward_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "episode,total_reward,total_fuel_g,final_soc")
    fail(Status::parse_error, path + ": not a reward history file");
  std::vector<EpisodeStat> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cells = split(t, ',');
    if (cells.size() != 4)
      fail(Status::parse_error, path + ": row " + std::to_string(row) + " needs 4 cells");
    EpisodeStat st;
    st.total_reward = parse_double(cells[1], path + " total_reward");
    st.total_fuel_g = parse_double(cells[2], path + " total_fuel_g");
    st.final_soc = parse_double(cells[3], path + " final_soc");
    out.push_back(st);
  }
  return out;
}

TraceTable traces_from_rollout(const DriveCycle& cycle, const RolloutResult& r) {
  TraceTable t;
  t.dt = cycle.dt;
  t.v.assign(cycle.speed.begin(), cycle.speed.begin() + static_cast<long>(r.p_e_w.size()));
  t.p_d_w = r.p_d_w;
  t.p_e_w = r.p_e_w;
  t.p_b_w = r.p_b_w;
  t.soc.assign(r.soc_trace.begin() + 1, r.soc_trace.end());
  t.fuel_gps = r.fuel_gps;
  return t;
}

TraceTable traces_from_dp(const DriveCycle& cycle, const DpTrajectory& tr) {
  TraceTable t;
  t.dt = cycle.dt;
  std::size_t n = tr.p_d_w.size();
  t.v.assign(cycle.speed.begin(), cycle.speed.begin() + static_cast<long>(n));
  t.p_d_w = tr.p_d_w;
  t.p_e_w.assign(tr.policy.engine_power.begin(),
                 tr.policy.engine_power.begin() + static_cast<long>(n));
  t.p_b_w = tr.p_b_w;
  t.soc.assign(tr.soc_trace.begin() + 1, tr.soc_trace.end());
  t.fuel_gps = tr.fuel_gps;
  return t;
}

void write_traces_csv(const TraceTable& t, const std::string& path) {
  std::size_t n = t.p_e_w.size();
  if (t.v.size() != n || t.p_d_w.size() != n || t.p_b_w.size() != n || t.soc.size() != n ||
      t.fuel_gps.size() != n)
    fail(Status::invalid_argument, "trace columns disagree in length");
  std::string s = "t,v,pd_w,pe_w,pb_w,soc,fuel_gps\n";
  for (std::size_t k = 0; k < n; ++k) {
    s += format_double(static_cast<double>(k) * t.dt) + "," + format_double(t.v[k]) + "," +
         format_double(t.p_d_w[k]) + "," + format_double(t.p_e_w[k]) + "," +
         format_double(t.p_b_w[k]) + "," + format_double(t.soc[k]) + "," +
         format_double(t.fuel_gps[k]) + "\n";
  }
  write_text_file(path, s);
}

}  // namespace hems
