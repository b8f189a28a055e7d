#pragma once

#include <array>
#include <cstdint>

#include "diffmc/types.hpp"

namespace dmc::mc {

// Corner c of a cell sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
// Edges 0-3 run along x, 4-7 along y, 8-11 along z; each edge goes from its
// lower corner in the +axis direction.

inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},
    {0, 2}, {1, 3}, {4, 6}, {5, 7},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

inline constexpr std::array<int, 12> kEdgeAxis{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};

inline constexpr int corner_bit(int corner, int axis) { return (corner >> axis) & 1; }

inline Vec3 corner_offset(int corner) {
    return Vec3(corner_bit(corner, 0), corner_bit(corner, 1), corner_bit(corner, 2));
}

/// Cell face f lies on axis f / 2 at side f % 2 (0 = low, 1 = high).
struct Face {
    int axis;
    int side;
    std::array<int, 4> corners;  ///< cyclic order around the face
    std::array<int, 4> edges;    ///< edges[k] joins corners[k] and corners[k + 1]
};

const std::array<Face, 6>& faces();

/// Triangulation of one sign configuration. Bit c of the configuration index
/// is set when corner c is inside (value below iso).
struct Case {
    std::uint8_t triangle_count = 0;
    std::array<std::array<std::uint8_t, 3>, 12> triangles{};
};

/// 256-entry configuration table. Ambiguous faces always separate the inside
/// corners, which makes neighbouring cells agree on every shared face.
/// Triangles wind counter-clockwise seen from the outside (positive) side.
class McTable {
public:
    McTable();
    const Case& operator[](int config) const { return cases_[static_cast<std::size_t>(config)]; }

private:
    std::array<Case, 256> cases_;
};

const McTable& table();

}  // namespace dmc::mc
