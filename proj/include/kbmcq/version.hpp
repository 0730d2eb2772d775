#pragma once

#include <cstdint>

namespace kbmcq {

inline constexpr const char* kToolVersion = "0.1.0";

// Bumped whenever the binary KB cache layout changes.
inline constexpr std::uint32_t kCacheFormatVersion = 1;

}  // namespace kbmcq
