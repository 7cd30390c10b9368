#pragma once

// Shared aliases, error types and small utilities used across the library.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace resl2l {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecF = Eigen::VectorXf;
using MatF = Eigen::MatrixXf;
using IMat = Eigen::MatrixXi;
using SpikeMat = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Invalid configuration or incompatible shapes. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced during simulation or optimization. CLI exit code 3.
struct NumericalError : std::runtime_error {
  long step_index;
  NumericalError(const std::string& msg, long step)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"),
        step_index(step) {}
};

// Filesystem failures and corrupt/unknown file formats. CLI exit code 4.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace resl2l
