#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bdsde/parallel.hpp"
#include "bdsde/partition.hpp"

namespace bdsde {

// Conditioning mode for the backward noise. In frozen mode one B-path is
// shared by every sample (conditional expectations become regressions on X
// across forward paths); in per-path mode each sample carries its own
// backward increments.
enum class BMode : std::uint32_t { frozen = 0, per_path = 1 };

// Pre-generated Brownian increments for M forward paths on a partition:
// dW is paths x n x d with dW_i ~ N(0, dt_i I); dB is n x l (frozen) or
// paths x n x l (per-path). Increment index i runs 1..n.
struct NoiseGrid {
  Partition partition;
  std::size_t d = 1;
  std::size_t l = 1;
  std::size_t paths = 0;
  BMode mode = BMode::frozen;
  std::uint64_t seed = 0;
  std::vector<double> dW;
  std::vector<double> dB;

  double dw(std::size_t p, std::size_t i, std::size_t k) const {
    return dW[(p * partition.steps() + (i - 1)) * d + k];
  }
  std::span<const double> dw_row(std::size_t p, std::size_t i) const {
    return {dW.data() + (p * partition.steps() + (i - 1)) * d, d};
  }
  // Backward increment for step i; per-path mode indexes the path, frozen
  // mode ignores it.
  std::span<const double> db_row(std::size_t p, std::size_t i) const {
    if (mode == BMode::frozen) return {dB.data() + (i - 1) * l, l};
    return {dB.data() + (p * partition.steps() + (i - 1)) * l, l};
  }
  // Cumulative backward-noise value B_{t_i} (component k) for path p.
  double b_value(std::size_t p, std::size_t i, std::size_t k) const;
};

NoiseGrid sample_noise(const Partition& partition, std::size_t paths, std::size_t d,
                       std::size_t l, BMode mode, std::uint64_t seed,
                       ExecMode exec = ExecMode::parallel);

// Conditional refinement of every increment family onto a finer partition.
// The law of the fine increments given the coarse ones is the Brownian
// bridge, and within each coarse interval the fine increments sum
// (left-to-right floating-point order) to the coarse increment, bit-for-bit
// whenever the rounding lattice permits and otherwise to within one ulp of
// the largest increment in the interval.
NoiseGrid brownian_bridge_refine(const NoiseGrid& source, const Partition& fine,
                                 std::uint64_t bridge_seed,
                                 ExecMode exec = ExecMode::parallel);

// Binary round-trip. Layout: magic "BDSN", u32 version, u32 d, u32 l,
// u32 n, u64 paths, u32 mode, u64 seed, then little-endian f64 payload:
// the n+1 partition times, dW path-major, dB (path-major in per-path mode).
void save_noise(const NoiseGrid& grid, const std::string& path);
NoiseGrid load_noise(const std::string& path);

}  // namespace bdsde
