#include "teamcredit/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace teamcredit {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::uint64_t mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  // Multiply-shift; bias is 2^-64 per draw which is immaterial here.
  return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                           static_cast<std::uint64_t>(n)) >>
                          64);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // 1 - u keeps the log argument strictly positive.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, then splitmix finalization against the base seed.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return mix(seed + kGolden * h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix(seed + kGolden * (index + 1));
}

}  // namespace teamcredit
