#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace nsergo {

/// Philox4x32-10 counter-based generator.
///
/// A pure function of (counter, key); streams for different trajectories, steps
/// and modes are independent without shared state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;

  static constexpr Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }
};

/// Uniform in the open interval (0, 1) from 53 bits of two words.
inline double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 21) ^ (std::uint64_t{lo} >> 11);
  return (double(bits) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> gaussian_pair(const Philox4x32::Counter& out) {
  const double u1 = uniform_open(out[0], out[1]);
  const double u2 = uniform_open(out[2], out[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

/// Standard normals addressed by (seed, trajectory, step, slot); slot counts pairs.
inline std::array<double, 2> gaussian_at(std::uint64_t seed, std::uint32_t trajectory, std::uint64_t step,
                                         std::uint32_t slot) {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), trajectory,
                                slot};
  return gaussian_pair(Philox4x32::block(ctr, Philox4x32::key_from_seed(seed)));
}

}  // namespace nsergo
