#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>

namespace roughvol {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of an independent stream keyed by (master, keys...). Order of keys matters.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t k : keys) s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return s;
}

/// Bit pattern of a double, for keying streams by parameter values rather than positions.
inline std::uint64_t key_of(double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  return bits;
}

/// Standard normal draws from one stream.
template <typename Scalar>
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  Scalar operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<Scalar> dist_{Scalar(0), Scalar(1)};
};

}  // namespace roughvol
