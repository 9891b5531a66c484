#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <map>
#include <vector>

namespace hems {

// Error codes shared with the C API (see include/hems.h).
enum class Status : int {
  ok = 0,
  io_error = 1,
  parse_error = 2,
  invalid_argument = 3,
  out_of_range = 4,
  bad_state = 5,
  diverged = 6,
  internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(Status s, const std::string& msg) : std::runtime_error(msg), status_(s) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

[[noreturn]] inline void fail(Status s, const std::string& msg) { throw Error(s, msg); }

// Deterministic RNG. mt19937_64 has a standard-specified sequence; the
// distributions below are hand-rolled so results do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * static_cast<__uint128_t>(n)) >> 64);
  }

  // Standard normal via Box-Muller, one cached value.
  double gaussian();

  // Without-replacement sample of k indices from [0, n).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a over bytes; used for config hashes and determinism checks.
std::uint64_t fnv1a(const void* data, std::size_t len);
std::uint64_t fnv1a(const std::string& s);
std::uint64_t file_hash(const std::string& path);

// Shortest-round-trip formatting: parsing the result with strtod gives back
// the exact double.
std::string format_double(double v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

// Flat `key = value` config text. Lines starting with '#' and blank lines
// are ignored. Duplicate keys keep the last value.
using KeyValueMap = std::map<std::string, std::string>;
KeyValueMap parse_key_values(const std::string& text);
KeyValueMap load_key_value_file(const std::string& path);
std::string render_key_values(const KeyValueMap& kv);

double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace hems
