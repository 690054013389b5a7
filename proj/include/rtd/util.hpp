#pragma once
// Shared utilities: deterministic RNG streams, a key=value config reader,
// hashing, and small string/file helpers.

#include <cstdarg>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtd {

// ------------------------------------------------------------------ hashing

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 1469598103934665603ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// -------------------------------------------------------------- RNG streams
//
// All randomness flows through named streams derived from a single base seed,
// so every run is reproducible from (seed, stream name) alone, independent of
// evaluation order and worker count.  Distributions are hand-rolled because
// std::<distribution> output is implementation-defined; mt19937_64 itself is
// fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  std::uint64_t bits() { return eng_(); }

  // [0,1)
  double uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // inclusive range
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    bits() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal(double mu = 0.0, double sigma = 1.0);

  // independent child stream; derivation depends only on (seed, name)
  Rng stream(const std::string& name) const {
    return Rng(splitmix64(seed_ ^ fnv1a64(name)));
  }
  Rng stream(const std::string& name, std::uint64_t idx) const {
    return Rng(splitmix64(splitmix64(seed_ ^ fnv1a64(name)) + idx));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

// ------------------------------------------------------------ config reader
//
// Plain-text config: "[section]" headers, "key = value" lines, '#' comments.
// Keys are exposed as "section.key".  Values stay strings until queried.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  const std::string& str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& dflt) const;
  double num(const std::string& key) const;
  double num(const std::string& key, double dflt) const;
  std::int64_t integer(const std::string& key) const;
  std::int64_t integer(const std::string& key, std::int64_t dflt) const;
  bool flag(const std::string& key, bool dflt) const;
  // comma/space separated list of numbers
  std::vector<double> nums(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  const std::map<std::string, std::string>& entries() const { return kv_; }
  const std::string& origin() const { return origin_; }

  // hash of the normalized key=value content (ordering-independent input form)
  std::uint64_t content_hash() const;

 private:
  std::map<std::string, std::string> kv_;
  std::string origin_ = "<none>";
};

// ------------------------------------------------------------------ strings

std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// fixed-format float for stable text artifacts (shortest round-trip not
// needed; %.*g with 17 digits round-trips doubles)
std::string num_str(double v);

}  // namespace rtd
