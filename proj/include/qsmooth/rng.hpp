#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace qsmooth {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Deterministic stream of uniforms/normals. The 64-bit seed is the Philox
/// key; `stream` selects an independent substream (one per trajectory) by
/// occupying the upper counter words. Output depends only on (seed, stream,
/// number of draws), never on platform or thread scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; values come in pairs from one block.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
  std::optional<double> spare_normal_;
};

}  // namespace qsmooth
