#pragma once

#include <string>
#include <vector>

#include "hems/util.hpp"

namespace hems {

// Time-indexed vehicle speed trace sampled at a uniform interval.
// accel[k] = (speed[k+1] - speed[k]) / dt, with accel[N-1] = 0.
struct DriveCycle {
  std::string name;
  double dt = 1.0;               // s
  std::vector<double> speed;     // m/s
  std::vector<double> accel;     // m/s^2

  std::size_t length() const { return speed.size(); }
  double duration() const { return speed.empty() ? 0.0 : (speed.size() - 1) * dt; }
  double distance_m() const;     // trapezoidal integral of speed
};

// Time-indexed engine-power sequence used as expert knowledge for guided
// training. Length always matches the associated cycle.
struct ExpertPolicy {
  std::string cycle_name;
  double dt = 1.0;
  std::vector<double> engine_power;  // W
};

enum class CycleKind { pulse, urban_like, highway_like };

CycleKind cycle_kind_from_string(const std::string& s);
std::string to_string(CycleKind kind);

// Derives accel from speed by forward difference and validates invariants.
void finalize_cycle(DriveCycle& c);

// Resamples to a uniform grid at `dt` by linear interpolation. A cycle that
// is already on the requested grid is returned unchanged, which makes
// resampling idempotent.
DriveCycle resample(const DriveCycle& c, double dt);

// CSV with header `t,v` (seconds, m/s). Timestamps must be strictly
// increasing; the result is resampled to uniform `dt`.
DriveCycle load_cycle(const std::string& path, double dt = 1.0);
void save_cycle(const DriveCycle& c, const std::string& path);

// CSV with header `t,pe_kw`. Power is converted to watts and validated
// against [0, engine_power_max_w]; the resampled length must match the cycle.
ExpertPolicy load_expert(const std::string& path, const DriveCycle& cycle,
                         double engine_power_max_w = 57000.0);
void save_expert(const ExpertPolicy& p, const std::string& path);

// Deterministic synthetic cycles. All kinds keep speeds in [0, 35] m/s,
// accelerations in [-3, 3] m/s^2, and demand gentle enough that the default
// powertrain can follow them without saturating the battery.
DriveCycle synth_cycle(CycleKind kind, double duration_s, std::uint64_t seed, double dt = 1.0);

}  // namespace hems
