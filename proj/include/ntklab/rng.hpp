#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace ntklab {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Being a pure function of (key, counter) it
// splits into independent substreams, so parallel generation stays
// reproducible: every consumer derives its own stream and never contends
// for shared state.
struct Philox4x32 {
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 2> key,
                                            std::array<std::uint32_t, 4> ctr) noexcept;
};

inline constexpr std::string_view kRngAlgorithm = "philox4x32-10";

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform on (0, 1]; safe to pass to log().
  double uniform_open() noexcept;
  // Standard normal via Box-Muller (two uniforms per pair, second cached).
  double normal() noexcept;
  // Uniform integer in [0, bound), bound >= 1; unbiased (rejection).
  std::uint64_t below(std::uint64_t bound) noexcept;
  // +1 or -1 with equal probability.
  double sign() noexcept;

  // Independent child stream; children of distinct ids never overlap with
  // each other or with the parent.
  Rng split(std::uint64_t substream) const noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t ctr_hi_ = 0;  // stream id
  std::uint64_t ctr_lo_ = 0;  // block position
  std::array<std::uint64_t, 2> buf_{};
  int buf_left_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace ntklab
