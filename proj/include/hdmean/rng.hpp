#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace hdmean {

namespace detail {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t avalanche(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  return avalanche(state += kSplitMixGamma);
}

inline constexpr std::uint64_t rotl64(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Role tag keeping the draw streams of distinct consumers disjoint.
enum class StreamRole : std::uint64_t {
  Group1Row = 1,
  Group2Row = 2,
  MeanDraw = 3,
  SigmaBuild = 4,
};

inline StreamRole group_role(int group) noexcept {
  return group == 0 ? StreamRole::Group1Row : StreamRole::Group2Row;
}

namespace detail {

// Collision-resistant key for a (seed, replication, role, index) tuple.
inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                                          std::uint64_t role, std::uint64_t index) noexcept {
  std::uint64_t s = 0x243F6A8885A308D3ULL;
  s = avalanche((s + kSplitMixGamma) ^ seed);
  s = avalanche((s + kSplitMixGamma) ^ replication);
  s = avalanche((s + kSplitMixGamma) ^ role);
  s = avalanche((s + kSplitMixGamma) ^ index);
  return s;
}

}  // namespace detail

// Counter-keyed xoshiro256++ stream. Every (seed, replication, role, index)
// tuple owns an independent stream, so data generation is reproducible and
// independent of evaluation order and worker count.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t replication, StreamRole role,
            std::uint64_t index) noexcept {
    std::uint64_t sm = detail::stream_key(seed, replication,
                                          static_cast<std::uint64_t>(role), index);
    for (auto& word : state_) word = detail::splitmix64(sm);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
      state_[0] = detail::kSplitMixGamma;
    }
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // (chi^2_2 - 2)/2 = Exp(1) - 1: mean 0, variance 1, skewness 2.
  double centered_chi2_unit() noexcept {
    return -std::log(1.0 - uniform01()) - 1.0;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace hdmean
