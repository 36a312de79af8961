#ifndef CHANPAC_RNG_HPP
#define CHANPAC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace chanpac {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic, splittable random stream. A stream is identified by
// (seed, stream name, index); identical identifiers give identical draws
// on every platform (mt19937_64 is fully specified by the standard and
// the normal sampler below avoids implementation-defined distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string_view stream = "",
               std::uint64_t index = 0)
      : Rng(FromKey{}, derive_key(seed, stream, index)) {}

  // Independent stream derived from this one's identity.
  Rng derived(std::uint64_t index) const {
    return Rng(FromKey{},
               splitmix64(key_ ^ splitmix64(index + 0x517cc1b727220a95ull)));
  }

  std::uint64_t u64() { return eng_(); }

  // Uniform on [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Standard normal via the Marsaglia polar method.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  std::uint64_t key() const { return key_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key), eng_(key) {}

  static std::uint64_t derive_key(std::uint64_t seed, std::string_view stream,
                                  std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the stream name
    for (char c : stream) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return splitmix64(splitmix64(seed) ^ splitmix64(h) ^
                      splitmix64(index + 0x2545f4914f6cdd1dull));
  }

  std::uint64_t key_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace chanpac

#endif
