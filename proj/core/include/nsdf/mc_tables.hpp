#pragma once

#include <array>
#include <cstdint>

namespace nsdf::mc {

// Classic 256-case Marching Cubes lookup tables.
//
// Corner numbering:        Edge numbering (corner pairs):
//   0 (0,0,0)  4 (0,0,1)     0:(0,1)  1:(1,2)  2:(2,3)  3:(3,0)
//   1 (1,0,0)  5 (1,0,1)     4:(4,5)  5:(5,6)  6:(6,7)  7:(7,4)
//   2 (1,1,0)  6 (1,1,1)     8:(0,4)  9:(1,5) 10:(2,6) 11:(3,7)
//   3 (0,1,0)  7 (0,1,1)
//
// A case's bit i is set when corner i is inside (value < iso).

extern const std::array<std::uint16_t, 256> kEdgeTable;
extern const std::array<std::array<std::int8_t, 16>, 256> kTriTable;

inline constexpr std::array<std::array<std::uint8_t, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

inline constexpr std::array<std::array<std::uint8_t, 3>, 8> kCornerOffset = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

/// FNV-1a over both tables; pinned by a unit test.
std::uint64_t table_checksum();

}  // namespace nsdf::mc
