#pragma once

#include <array>
#include <cstdint>

namespace bdsde {

// Counter-based generator: Philox 4x64 with 10 rounds, the canonical
// round function and key schedule (numpy's bit generator wraps the same
// core but advances the counter before emitting its first block, so its
// stream at counter c equals block(key, c + 1)). Every draw is addressed
// by (key, counter) with no sequential state, so per-path and per-step
// substreams can be evaluated in any order by any thread while producing
// identical values.
struct Philox4x64 {
  static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 2>& key,
                                            const std::array<std::uint64_t, 4>& counter);
};

// Map a 64-bit word to the open interval (0, 1) on a 2^-53 grid.
double u64_to_unit(std::uint64_t x);

// Inverse standard normal CDF (Wichura's AS241, double precision).
double inverse_normal_cdf(double p);

// One stream per (seed, purpose) pair; the counter carries the address of
// the individual draw (typically path, step, component).
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t purpose = 0;
};

namespace stream_purpose {
inline constexpr std::uint64_t forward_w = 0x5755;   // Brownian increments driving X
inline constexpr std::uint64_t backward_b = 0x4242;  // backward-noise increments
inline constexpr std::uint64_t bridge_w = 0x6257;    // bridge refinement draws for W
inline constexpr std::uint64_t bridge_b = 0x6242;    // bridge refinement draws for B
inline constexpr std::uint64_t nested = 0x6e65;      // nested resimulation streams
inline constexpr std::uint64_t probe = 0x7072;       // assumption-validation probes
}  // namespace stream_purpose

std::uint64_t raw_word(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                       std::uint64_t c2, std::uint64_t c3);

double uniform_draw(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                    std::uint64_t c2, std::uint64_t c3);

// One N(0,1) variate at the given counter address.
double normal_draw(const StreamKey& key, std::uint64_t c0, std::uint64_t c1,
                   std::uint64_t c2, std::uint64_t c3);

// Deterministic child-seed derivation for recursive simulations.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t branch);

}  // namespace bdsde
