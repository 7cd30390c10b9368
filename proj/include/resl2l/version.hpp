#pragma once

namespace resl2l {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the on-disk layout changes; readers reject other versions.
inline constexpr unsigned kCheckpointFormatVersion = 1;
inline constexpr unsigned kRecordFormatVersion = 1;

}  // namespace resl2l
