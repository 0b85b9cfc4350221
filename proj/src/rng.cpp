#include "ntklab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ntklab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void round_once(std::array<std::uint32_t, 4>& ctr,
                       std::array<std::uint32_t, 2>& key) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 2> key,
                                               std::array<std::uint32_t, 4> ctr) noexcept {
  for (int r = 0; r < 10; ++r) round_once(ctr, key);
  return ctr;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_hi_(stream) {}

std::uint64_t Rng::next_u64() noexcept {
  if (buf_left_ == 0) {
    const auto out = Philox4x32::block(
        key_, {static_cast<std::uint32_t>(ctr_lo_), static_cast<std::uint32_t>(ctr_lo_ >> 32),
               static_cast<std::uint32_t>(ctr_hi_), static_cast<std::uint32_t>(ctr_hi_ >> 32)});
    buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buf_left_ = 2;
    ++ctr_lo_;
  }
  return buf_[--buf_left_];
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % bound;
}

double Rng::sign() noexcept { return (next_u64() & 1u) ? 1.0 : -1.0; }

Rng Rng::split(std::uint64_t substream) const noexcept {
  // Re-key through one Philox block so child streams are decorrelated from
  // the parent and from each other.
  const auto out = Philox4x32::block(
      key_, {static_cast<std::uint32_t>(substream), static_cast<std::uint32_t>(substream >> 32),
             0x73706c74u, 0x6b657973u});  // "splt", "keys"
  const std::uint64_t child_seed = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  const std::uint64_t child_stream = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  return Rng(child_seed, child_stream);
}

}  // namespace ntklab
