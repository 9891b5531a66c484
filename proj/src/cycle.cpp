#include "hems/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hems {

double DriveCycle::distance_m() const {
  double d = 0.0;
  for (std::size_t k = 0; k + 1 < speed.size(); ++k)
    d += 0.5 * (speed[k] + speed[k + 1]) * dt;
  return d;
}

CycleKind cycle_kind_from_string(const std::string& s) {
  if (s == "pulse") return CycleKind::pulse;
  if (s == "urban_like") return CycleKind::urban_like;
  if (s == "highway_like") return CycleKind::highway_like;
  fail(Status::invalid_argument, "unknown cycle kind: '" + s + "'");
}

std::string to_string(CycleKind kind) {
  switch (kind) {
    case CycleKind::pulse: return "pulse";
    case CycleKind::urban_like: return "urban_like";
    case CycleKind::highway_like: return "highway_like";
  }
  return "?";
}

void finalize_cycle(DriveCycle& c) {
  if (c.dt <= 0.0) fail(Status::invalid_argument, "cycle dt must be positive");
  if (c.speed.size() < 2) fail(Status::invalid_argument, "cycle needs at least 2 samples");
  for (double v : c.speed)
    if (v < 0.0) fail(Status::invalid_argument, "cycle contains negative speed");
  c.accel.assign(c.speed.size(), 0.0);
  for (std::size_t k = 0; k + 1 < c.speed.size(); ++k)
    c.accel[k] = (c.speed[k + 1] - c.speed[k]) / c.dt;
}

namespace {

// Linear interpolation of (times, values) onto the uniform grid
// times.front() + k*dt. Grid points that coincide with a source sample
// reproduce its value exactly.
std::vector<double> interp_to_grid(const std::vector<double>& times,
                                   const std::vector<double>& values, double dt) {
  const double t0 = times.front();
  const double span = times.back() - t0;
  const auto n = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;
  std::vector<double> out(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (seg + 2 < times.size() && times[seg + 1] <= t) ++seg;
    const double t_a = times[seg], t_b = times[seg + 1];
    double w = (t - t_a) / (t_b - t_a);
    w = std::clamp(w, 0.0, 1.0);
    out[k] = values[seg] + w * (values[seg + 1] - values[seg]);
  }
  return out;
}

struct Csv2Col {
  std::vector<double> t;
  std::vector<double> y;
};

Csv2Col load_two_column_csv(const std::string& path, const std::string& header) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(Status::parse_error, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    auto cols = split(line, ',');
    auto want = split(header, ',');
    if (cols.size() != 2 || trim(cols[0]) != want[0] || trim(cols[1]) != want[1])
      fail(Status::parse_error, path + ": expected header '" + header + "', got '" + line + "'");
  }
  Csv2Col out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 2)
      fail(Status::parse_error, path + ":" + std::to_string(lineno) + ": expected 2 columns");
    out.t.push_back(parse_double(cols[0], path + ":" + std::to_string(lineno)));
    out.y.push_back(parse_double(cols[1], path + ":" + std::to_string(lineno)));
  }
  if (out.t.size() < 2)
    fail(Status::parse_error, path + ": fewer than 2 data rows");
  for (std::size_t i = 0; i + 1 < out.t.size(); ++i)
    if (!(out.t[i + 1] > out.t[i]))
      fail(Status::parse_error, path + ": timestamps not strictly increasing at row " +
                                    std::to_string(i + 2));
  return out;
}

std::string basename_no_ext(const std::string& path) {
  auto slash = path.find_last_of("/\\");
  std::string base = (slash == std::string::npos) ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
  return base;
}

}  // namespace

DriveCycle resample(const DriveCycle& c, double dt) {
  if (dt <= 0.0) fail(Status::invalid_argument, "resample dt must be positive");
  if (c.dt == dt) return c;
  std::vector<double> times(c.speed.size());
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k) * c.dt;
  DriveCycle out;
  out.name = c.name;
  out.dt = dt;
  out.speed = interp_to_grid(times, c.speed, dt);
  finalize_cycle(out);
  return out;
}

DriveCycle load_cycle(const std::string& path, double dt) {
  if (dt <= 0.0) fail(Status::invalid_argument, "load_cycle dt must be positive");
  Csv2Col data = load_two_column_csv(path, "t,v");
  for (double v : data.y)
    if (v < 0.0) fail(Status::invalid_argument, path + ": negative speed");
  DriveCycle c;
  c.name = basename_no_ext(path);
  c.dt = dt;
  c.speed = interp_to_grid(data.t, data.y, dt);
  finalize_cycle(c);
  return c;
}

void save_cycle(const DriveCycle& c, const std::string& path) {
  std::string out = "t,v\n";
  for (std::size_t k = 0; k < c.speed.size(); ++k) {
    out += format_double(static_cast<double>(k) * c.dt);
    out += ',';
    out += format_double(c.speed[k]);
    out += '\n';
  }
  write_text_file(path, out);
}

ExpertPolicy load_expert(const std::string& path, const DriveCycle& cycle,
                         double engine_power_max_w) {
  Csv2Col data = load_two_column_csv(path, "t,pe_kw");
  std::vector<double> power_kw = interp_to_grid(data.t, data.y, cycle.dt);
  if (power_kw.size() != cycle.length())
    fail(Status::invalid_argument,
         path + ": expert length " + std::to_string(power_kw.size()) +
             " does not match cycle length " + std::to_string(cycle.length()));
  ExpertPolicy p;
  p.cycle_name = cycle.name;
  p.dt = cycle.dt;
  p.engine_power.resize(power_kw.size());
  const double slack = 1e-6 * engine_power_max_w;
  for (std::size_t k = 0; k < power_kw.size(); ++k) {
    double w = power_kw[k] * 1000.0;
    if (w < -slack || w > engine_power_max_w + slack)
      fail(Status::out_of_range, path + ": engine power " + format_double(w) +
                                     " W outside [0, " + format_double(engine_power_max_w) +
                                     "] at sample " + std::to_string(k));
    p.engine_power[k] = std::clamp(w, 0.0, engine_power_max_w);
  }
  return p;
}

void save_expert(const ExpertPolicy& p, const std::string& path) {
  std::string out = "t,pe_kw\n";
  for (std::size_t k = 0; k < p.engine_power.size(); ++k) {
    out += format_double(static_cast<double>(k) * p.dt);
    out += ',';
    out += format_double(p.engine_power[k] / 1000.0);
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

// Appends `seconds` worth of samples approaching `target` at |rate| m/s^2.
void ramp_to(std::vector<double>& v, double target, double rate, double dt) {
  double cur = v.back();
  double dir = (target >= cur) ? 1.0 : -1.0;
  while ((target - cur) * dir > 1e-12) {
    double step = dir * rate * dt;
    if ((target - cur) * dir < rate * dt) step = target - cur;
    cur += step;
    v.push_back(std::max(0.0, cur));
  }
}

void hold(std::vector<double>& v, std::size_t samples) {
  for (std::size_t i = 0; i < samples; ++i) v.push_back(v.back());
}

// Cruise with a bounded random walk around v_center.
void wobble(std::vector<double>& v, std::size_t samples, double v_lo, double v_hi,
            double max_step, Rng& rng) {
  double cur = v.back();
  for (std::size_t i = 0; i < samples; ++i) {
    cur += rng.uniform(-max_step, max_step);
    cur = std::clamp(cur, v_lo, v_hi);
    v.push_back(cur);
  }
}

DriveCycle make_pulse(std::size_t n, double dt) {
  // Trapezoid: 1 m/s^2 ramps to 15 m/s, cruise, ramp down, short tail idle.
  std::vector<double> v = {0.0};
  ramp_to(v, 15.0, 1.0, dt);
  const std::size_t tail_idle = static_cast<std::size_t>(std::llround(10.0 / dt));
  const std::size_t down = v.size() - 1;  // symmetric ramp
  if (v.size() + down + tail_idle < n) hold(v, n - v.size() - down - tail_idle);
  ramp_to(v, 0.0, 1.0, dt);
  if (v.size() < n) hold(v, n - v.size());
  v.resize(n);
  DriveCycle c;
  c.dt = dt;
  c.speed = std::move(v);
  return c;
}

DriveCycle make_urban(std::size_t n, double dt, Rng& rng) {
  std::vector<double> v = {0.0};
  while (v.size() < n) {
    hold(v, 3 + rng.uniform_index(8));
    if (v.size() >= n) break;
    const double v_target = rng.uniform(8.0, 18.0);
    const double a_up = rng.uniform(0.6, 1.1);
    const double a_dn = rng.uniform(0.7, 1.0);
    const double v_hi = std::min(19.0, v_target + 1.5);
    // Braking room is budgeted from the top of the wobble band so the phase
    // can always come back to rest before the trace ends.
    const std::size_t brake = static_cast<std::size_t>(std::ceil(v_hi / (a_dn * dt))) + 1;
    const std::size_t need =
        static_cast<std::size_t>(std::ceil(v_target / (a_up * dt))) + brake + 2;
    if (v.size() + need > n) break;
    ramp_to(v, v_target, a_up, dt);
    std::size_t cruise = 10 + rng.uniform_index(31);
    if (v.size() + cruise + brake > n) cruise = n - v.size() - brake;
    wobble(v, cruise, std::max(3.0, v_target - 1.5), v_hi, 0.25, rng);
    ramp_to(v, 0.0, a_dn, dt);
  }
  if (v.size() < n) hold(v, n - v.size());
  v.resize(n);
  // Never end mid-motion: the loop above only starts a phase it can finish.
  DriveCycle c;
  c.dt = dt;
  c.speed = std::move(v);
  return c;
}

DriveCycle make_highway(std::size_t n, double dt, Rng& rng) {
  std::vector<double> v = {0.0};
  hold(v, 2);
  const double v_main = rng.uniform(26.0, 31.0);
  ramp_to(v, v_main, 1.0, dt);
  const std::size_t decel_len = static_cast<std::size_t>(std::ceil(33.0 / dt)) + 3;
  const bool with_slowdown = n >= static_cast<std::size_t>(std::llround(240.0 / dt));
  if (with_slowdown) {
    const std::size_t first_leg = (n - v.size() - decel_len) / 2;
    wobble(v, first_leg, v_main - 2.0, std::min(33.0, v_main + 2.0), 0.2, rng);
    const double v_slow = rng.uniform(16.0, 20.0);
    ramp_to(v, v_slow, 0.8, dt);
    wobble(v, 15, v_slow - 1.0, v_slow + 1.0, 0.2, rng);
    ramp_to(v, v_main, 0.8, dt);
  }
  if (v.size() + decel_len < n)
    wobble(v, n - v.size() - decel_len, v_main - 2.0, std::min(33.0, v_main + 2.0), 0.2, rng);
  ramp_to(v, 0.0, 1.0, dt);
  if (v.size() < n) hold(v, n - v.size());
  v.resize(n);
  if (v.back() > 0.0) {  // guarantee the trace ends at rest
    std::size_t k = v.size();
    double cur = 0.0;
    while (k > 0 && cur < v[k - 1]) {
      --k;
      v[k] = std::min(v[k], cur);
      cur += 1.0 * dt;
    }
  }
  DriveCycle c;
  c.dt = dt;
  c.speed = std::move(v);
  return c;
}

}  // namespace

DriveCycle synth_cycle(CycleKind kind, double duration_s, std::uint64_t seed, double dt) {
  if (dt <= 0.0) fail(Status::invalid_argument, "synth_cycle dt must be positive");
  if (duration_s < 60.0)
    fail(Status::invalid_argument, "synth_cycle duration must be at least 60 s");
  const auto n = static_cast<std::size_t>(std::floor(duration_s / dt + 1e-9)) + 1;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  DriveCycle c;
  switch (kind) {
    case CycleKind::pulse: c = make_pulse(n, dt); break;
    case CycleKind::urban_like: c = make_urban(n, dt, rng); break;
    case CycleKind::highway_like: c = make_highway(n, dt, rng); break;
  }
  c.name = to_string(kind) + "_" + std::to_string(static_cast<long long>(duration_s)) + "_" +
           std::to_string(seed);
  finalize_cycle(c);
  return c;
}

}  // namespace hems
