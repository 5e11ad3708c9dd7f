#pragma once

#include <cstdint>
#include <stdexcept>
#include <tuple>

namespace nsdf {

// 3x21-bit Morton codes, x in the least significant position of each triple.

inline constexpr std::uint32_t kMortonCoordBits = 21;
inline constexpr std::uint32_t kMortonCoordLimit = 1u << kMortonCoordBits;

namespace detail {

inline std::uint64_t split_by_3(std::uint64_t x) {
  x &= 0x1fffff;
  x = (x | x << 32) & 0x1f00000000ffffull;
  x = (x | x << 16) & 0x1f0000ff0000ffull;
  x = (x | x << 8) & 0x100f00f00f00f00full;
  x = (x | x << 4) & 0x10c30c30c30c30c3ull;
  x = (x | x << 2) & 0x1249249249249249ull;
  return x;
}

inline std::uint32_t compact_by_3(std::uint64_t x) {
  x &= 0x1249249249249249ull;
  x = (x ^ (x >> 2)) & 0x10c30c30c30c30c3ull;
  x = (x ^ (x >> 4)) & 0x100f00f00f00f00full;
  x = (x ^ (x >> 8)) & 0x1f0000ff0000ffull;
  x = (x ^ (x >> 16)) & 0x1f00000000ffffull;
  x = (x ^ (x >> 32)) & 0x1fffff;
  return static_cast<std::uint32_t>(x);
}

}  // namespace detail

inline bool morton_encodable(std::int64_t ix, std::int64_t iy, std::int64_t iz) {
  return ix >= 0 && iy >= 0 && iz >= 0 && ix < kMortonCoordLimit &&
         iy < kMortonCoordLimit && iz < kMortonCoordLimit;
}

inline std::uint64_t morton_encode(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) {
  if (ix >= kMortonCoordLimit || iy >= kMortonCoordLimit || iz >= kMortonCoordLimit) {
    throw std::invalid_argument("morton_encode: coordinate out of 21-bit range");
  }
  return detail::split_by_3(ix) | detail::split_by_3(iy) << 1 | detail::split_by_3(iz) << 2;
}

inline std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> morton_decode(std::uint64_t code) {
  return {detail::compact_by_3(code), detail::compact_by_3(code >> 1),
          detail::compact_by_3(code >> 2)};
}

/// Node/corner key within one octree level.
struct MortonKey {
  std::uint64_t code = 0;
  int level = 0;
};

}  // namespace nsdf
