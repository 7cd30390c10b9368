#pragma once

// Little-endian binary primitives for the record and checkpoint containers.
// All sizes are explicit; matrices round-trip bit-exactly.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "resl2l/common.hpp"

namespace resl2l::io {

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of stream");
  return value;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::uint64_t max_len = (1ull << 32)) {
  const auto len = read_pod<std::uint64_t>(is);
  if (len > max_len) throw IoError("string length field corrupt");
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError("unexpected end of stream");
  return s;
}

template <typename Derived>
void write_matrix(std::ostream& os, const Eigen::PlainObjectBase<Derived>& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(typename Derived::Scalar) * m.size()));
}

template <typename MatrixT>
MatrixT read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24))
    throw IoError("matrix dimension field corrupt");
  MatrixT m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(typename MatrixT::Scalar) * m.size()));
  if (!is) throw IoError("unexpected end of stream");
  return m;
}

template <typename T>
void write_vector(std::ostream& os, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  write_pod<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(T) * v.size()));
}

template <typename T>
std::vector<T> read_vector(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto len = read_pod<std::uint64_t>(is);
  if (len > (1ull << 32)) throw IoError("vector length field corrupt");
  std::vector<T> v(len);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(T) * len));
  if (!is) throw IoError("unexpected end of stream");
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace resl2l::io
