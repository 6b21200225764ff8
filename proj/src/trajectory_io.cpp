#include <bit>
#include <cstring>
#include <fstream>

#include "nfd/errors.hpp"
#include "nfd/limit_sim.hpp"

namespace nfd {

namespace {

constexpr char kMagic[8] = {'N', 'F', 'D', 'T', 'R', 'A', 'J', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(const unsigned char* bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_trajectory: cannot open " + path.string());
  out.write(kMagic, 8);
  put_u64(out, static_cast<std::uint64_t>(traj.particles()));
  put_u64(out, static_cast<std::uint64_t>(traj.times() - 1));
  put_u64(out, static_cast<std::uint64_t>(traj.iterations() - 1));
  for (double v : traj.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("write_trajectory: write failed for " + path.string());
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_trajectory: cannot open " + path.string());
  unsigned char header[32];
  if (!in.read(reinterpret_cast<char*>(header), 32)) throw FormatError("read_trajectory: truncated header");
  if (std::memcmp(header, kMagic, 8) != 0) throw FormatError("read_trajectory: bad magic");
  const std::uint64_t particles = get_u64(header + 8);
  const std::uint64_t steps = get_u64(header + 16);
  const std::uint64_t k_max = get_u64(header + 24);
  if (particles == 0 || particles > (1u << 30) || steps > (1u << 20) || k_max > (1u << 20)) {
    throw FormatError("read_trajectory: implausible dimensions in header");
  }
  Trajectory traj(static_cast<int>(steps + 1), static_cast<int>(k_max + 1), static_cast<int>(particles));
  std::vector<unsigned char> buffer(traj.data().size() * 8);
  if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
    throw FormatError("read_trajectory: payload shorter than header dimensions");
  }
  for (std::size_t i = 0; i < traj.data().size(); ++i) {
    traj.data()[i] = std::bit_cast<double>(get_u64(buffer.data() + 8 * i));
  }
  return traj;
}

}  // namespace nfd
