#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace nfd {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The pair (seed, stream_id) fully determines
/// the sequence; the stream position is a block counter, so copies are cheap
/// and independent of how work is scheduled.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// Random access: the first normal of block `index`, without touching the
  /// stream position. Normals use the ziggurat method, one 64-bit word each.
  double normal_at(std::uint64_t index) const;

  /// Random access: writes `count` normals taken two per block starting at
  /// block `first_block`.
  void normals_at(std::uint64_t first_block, double* out, std::size_t count) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return block_; }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
};

Rng split_rng(std::uint64_t seed, std::uint64_t stream_id);

/// Mixes a parent identifier with a child tag into a fresh 64-bit stream id
/// (splitmix64 finalizer). Used to carve hierarchical stream namespaces.
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag);

inline double uniform_from_bits(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace nfd
