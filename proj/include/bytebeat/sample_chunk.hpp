#pragma once

#include <cstdint>
#include <vector>

namespace bytebeat {

inline constexpr std::uint32_t kDefaultRate = 8000;

/// A contiguous run of unsigned 8-bit samples starting at counter value t0.
struct SampleChunk {
  std::uint64_t t0 = 0;
  std::uint32_t rate = kDefaultRate;
  std::vector<std::uint8_t> data;
};

}  // namespace bytebeat
