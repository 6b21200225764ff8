#include "nfd/rng.hpp"

#include <algorithm>
#include <cmath>

namespace nfd {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

constexpr int kZigLayers = 256;
constexpr double kZigR = 3.6541528853610088;
constexpr double kZigV = 0.00492867323399;
constexpr std::uint64_t kFallbackTag = 0x5a1c0ffee0000001ull;

struct ZigguratTables {
  double x[kZigLayers + 1];
  double f[kZigLayers + 1];
  ZigguratTables() {
    auto pdf = [](double z) { return std::exp(-0.5 * z * z); };
    x[0] = kZigV / pdf(kZigR);
    x[1] = kZigR;
    for (int i = 1; i < kZigLayers - 1; ++i) {
      const double arg = kZigV / x[i] + pdf(x[i]);
      x[i + 1] = arg < 1.0 ? std::sqrt(-2.0 * std::log(arg)) : 0.0;
    }
    x[kZigLayers] = 0.0;
    for (int i = 0; i <= kZigLayers; ++i) f[i] = pdf(x[i]);
  }
};

const ZigguratTables& zig() {
  static const ZigguratTables tables;
  return tables;
}

/// Ziggurat attempt on one word; false means the word was rejected.
/// Extra uniforms for the wedge and tail come from `extra`.
template <class Extra>
bool zig_attempt(std::uint64_t w, Extra&& extra, double& out) {
  const ZigguratTables& t = zig();
  const int i = static_cast<int>(w & 0xFF);
  const double sign = (w & 0x100) ? -1.0 : 1.0;
  const double u = static_cast<double>(static_cast<std::int64_t>(w >> 11)) * 0x1.0p-53;
  const double z = u * t.x[i];
  if (z < t.x[i + 1]) {
    out = sign * z;
    return true;
  }
  if (i == 0) {
    for (;;) {
      const double a = -std::log(extra()) / kZigR;
      const double b = -std::log(extra());
      if (2.0 * b > a * a) {
        out = sign * (kZigR + a);
        return true;
      }
    }
  }
  const double y = t.f[i] + extra() * (t.f[i + 1] - t.f[i]);
  if (y < std::exp(-0.5 * z * z)) {
    out = sign * z;
    return true;
  }
  return false;
}

/// Slow path for the word with global index `word`: consumes a stream
/// derived from it, so random access stays exact.
double zig_slow(std::uint64_t seed, std::uint64_t stream, std::uint64_t word, std::uint64_t w) {
  Rng fallback(seed, derive_stream(stream ^ kFallbackTag, word));
  auto extra = [&] { return fallback.uniform(); };
  double out = 0.0;
  if (zig_attempt(w, extra, out)) return out;
  while (!zig_attempt(fallback.next_u64(), extra, out)) {
  }
  return out;
}

inline double zig_normal(const ZigguratTables& t, std::uint64_t seed, std::uint64_t stream, std::uint64_t word,
                         std::uint64_t w) {
  const int i = static_cast<int>(w & 0xFF);
  const double z = static_cast<double>(static_cast<std::int64_t>(w >> 11)) * 0x1.0p-53 * t.x[i];
  if (z < t.x[i + 1]) [[likely]] return (w & 0x100) ? -z : z;
  return zig_slow(seed, stream, word, w);
}

constexpr int kLanes = 16;

/// Philox blocks first..first+kLanes-1, two 64-bit words each.
void philox_lanes(std::uint64_t first, std::uint64_t stream, std::uint64_t seed, std::uint64_t* words) {
  std::uint32_t c0[kLanes], c1[kLanes], c2[kLanes], c3[kLanes];
  for (int l = 0; l < kLanes; ++l) {
    c0[l] = static_cast<std::uint32_t>(first + l);
    c1[l] = static_cast<std::uint32_t>((first + l) >> 32);
    c2[l] = static_cast<std::uint32_t>(stream);
    c3[l] = static_cast<std::uint32_t>(stream >> 32);
  }
  std::uint32_t k0 = static_cast<std::uint32_t>(seed), k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int round = 0; round < 10; ++round) {
    for (int l = 0; l < kLanes; ++l) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0[l];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2[l];
      const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[l] ^ k0;
      const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[l] ^ k1;
      c0[l] = n0;
      c1[l] = static_cast<std::uint32_t>(p1);
      c2[l] = n2;
      c3[l] = static_cast<std::uint32_t>(p0);
    }
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  for (int l = 0; l < kLanes; ++l) {
    words[2 * l] = join(c0[l], c1[l]);
    words[2 * l + 1] = join(c2[l], c3[l]);
  }
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::array<std::uint32_t, 4> Rng::block(std::uint64_t index) const {
  return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                     static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                    {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
}

std::uint64_t Rng::next_u64() {
  if (buffered_words_ == 0) {
    buffer_ = block(block_++);
    buffered_words_ = 4;
  }
  const int i = 4 - buffered_words_;
  buffered_words_ -= 2;
  return join(buffer_[i], buffer_[i + 1]);
}

double Rng::uniform() { return uniform_from_bits(next_u64()); }

double Rng::normal() {
  const std::uint64_t word = 2 * block_ + (buffered_words_ == 2 ? 1 : 0) - (buffered_words_ == 0 ? 0 : 2);
  return zig_normal(zig(), seed_, stream_, word, next_u64());
}

double Rng::normal_at(std::uint64_t index) const {
  const auto w = block(index);
  return zig_normal(zig(), seed_, stream_, 2 * index, join(w[0], w[1]));
}

void Rng::normals_at(std::uint64_t first_block, double* out, std::size_t count) const {
  const ZigguratTables& t = zig();
  std::uint64_t words[2 * kLanes];
  std::uint64_t b = first_block;
  for (std::size_t i = 0; i < count; b += kLanes) {
    philox_lanes(b, stream_, seed_, words);
    const std::size_t take = std::min<std::size_t>(2 * kLanes, count - i);
    for (std::size_t j = 0; j < take; ++j, ++i) out[i] = zig_normal(t, seed_, stream_, 2 * b + j, words[j]);
  }
}

Rng split_rng(std::uint64_t seed, std::uint64_t stream_id) { return Rng(seed, stream_id); }

std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag) {
  std::uint64_t z = parent * 0x9E3779B97F4A7C15ull + tag + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace nfd
