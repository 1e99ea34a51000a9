#include "pwiser/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace pwiser {

namespace {

// All multi-byte fields are little-endian regardless of host order.
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_f64_le(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

double read_f64_le(std::istream& is) {
  std::uint64_t bits = read_le<std::uint64_t>(is);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

void save_checkpoint(const ParamStore& ps, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("PWSR", 4);
  write_le<std::uint32_t>(os, kCheckpointVersion);
  for (const auto& [name, t] : ps) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(os, 2);
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.rows()));
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.rows(); ++i)
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) write_f64_le(os, t.value(i, j));
  }
  if (!os) throw IoError("write failure on checkpoint: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PWSR", 4) != 0)
    throw IoError("bad checkpoint magic in " + path);
  auto version = read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  ParamStore ps;
  while (true) {
    auto name_len = read_le<std::uint32_t>(is);
    if (is.eof()) break;
    if (!is) throw IoError("truncated checkpoint: " + path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto rank = read_le<std::uint32_t>(is);
    if (rank != 2) throw IoError("unsupported tensor rank in " + path);
    auto rows = static_cast<Eigen::Index>(read_le<std::uint64_t>(is));
    auto cols = static_cast<Eigen::Index>(read_le<std::uint64_t>(is));
    Tensor& t = ps.add(name, rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) t.value(i, j) = read_f64_le(is);
    if (!is) throw IoError("truncated checkpoint: " + path);
    is.peek();  // trigger eof before the next header read
    if (is.eof()) break;
  }
  return ps;
}

}  // namespace pwiser
