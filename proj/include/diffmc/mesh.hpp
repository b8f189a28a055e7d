#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "diffmc/types.hpp"

namespace dmc {

using Triangle = std::array<std::uint32_t, 3>;
using Rgb8 = std::array<std::uint8_t, 3>;

/// Lattice edge that produced a vertex. Endpoints are node ids of the source
/// grid; extractors that add extra lattice points (cell centres) number them
/// after the grid nodes.
struct EdgeProvenance {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    friend bool operator==(const EdgeProvenance&, const EdgeProvenance&) = default;
};

/// Welded triangle mesh. Triangles wind counter-clockwise seen from outside.
struct IndexedMesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    /// Per-vertex owning lattice edge; empty for meshes not produced by extraction.
    std::vector<EdgeProvenance> provenance;
    /// Optional per-vertex colours.
    std::vector<Rgb8> colors;

    bool empty() const { return triangles.empty(); }
    /// Throws when a triangle references a missing vertex.
    void check_indices() const;
};

void write_obj(const IndexedMesh& mesh, const std::filesystem::path& path);
IndexedMesh read_obj(const std::filesystem::path& path);

/// Binary little-endian PLY with float positions, int32 face lists and
/// optional uchar RGB.
void write_ply(const IndexedMesh& mesh, const std::filesystem::path& path);
/// Reads ascii or binary little-endian PLY files with triangle faces.
IndexedMesh read_ply(const std::filesystem::path& path);

/// Dispatches on the file extension (.obj or .ply).
IndexedMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const IndexedMesh& mesh, const std::filesystem::path& path);

}  // namespace dmc
