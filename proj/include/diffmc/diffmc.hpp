#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "diffmc/field.hpp"
#include "diffmc/mesh.hpp"

namespace dmc {

struct ExtractOptions {
    /// Force the outermost node layer outside so the surface is closed.
    bool closed = true;
    int threads = 0;
};

/// Derivatives of one extracted vertex v = p_a + u (p_b - p_a) with respect
/// to the two grid nodes of its owning edge.
struct VertexDerivative {
    std::uint64_t node_a = 0;
    std::uint64_t node_b = 0;
    Vec3 d_value_a = Vec3::Zero();  ///< dv/ds_a
    Vec3 d_value_b = Vec3::Zero();  ///< dv/ds_b
    double weight_a = 0.0;          ///< dv/dd_a = weight_a * I
    double weight_b = 0.0;          ///< dv/dd_b = weight_b * I

    Mat3 d_displacement_a() const { return weight_a * Mat3::Identity(); }
    Mat3 d_displacement_b() const { return weight_b * Mat3::Identity(); }
};

/// Sparse vertex-to-grid Jacobian, one record per mesh vertex.
struct VertexJacobian {
    std::size_t node_count = 0;
    std::vector<VertexDerivative> vertices;
};

/// What extraction changed about its input before triangulating.
struct ExtractionInfo {
    std::size_t perturbed_nodes = 0;  ///< values exactly at iso nudged upward
    std::size_t closed_nodes = 0;     ///< boundary nodes reflected outside
    std::size_t clamped_vertices = 0; ///< vertices whose edge parameter hit the clamp
};

struct Extraction {
    IndexedMesh mesh;
    VertexJacobian jacobian;
    ExtractionInfo info;
};

/// Relative size of the upward nudge applied to nodes exactly at iso.
inline constexpr double kIsoPerturbation = 1e-7;
/// Edge parameters are clamped to [kEdgeClamp, 1 - kEdgeClamp].
inline constexpr double kEdgeClamp = 1e-6;
/// Margin kept below half a cell by clamp_displacements, in cell units.
inline constexpr double kDisplacementMargin = 1e-4;

/// Marching cubes on a deformable grid with vertex derivatives.
///
/// A node is inside when its value is below `iso`. Vertices are welded per
/// grid edge and numbered in (node, axis) order, so the output is identical
/// for every thread count.
Extraction extract(const DeformableGrid& grid, double iso, const ExtractOptions& options = {});

struct GridGradient {
    std::vector<double> values;
    std::vector<Vec3> displacement;
};

/// Pulls per-vertex cotangents dL/dv back onto grid values and displacements.
GridGradient chain_gradient(const VertexJacobian& jac, std::span<const Vec3> dl_dv);

/// Clamps each displacement component to (0.5 - kDisplacementMargin) * spacing.
DeformableGrid clamp_displacements(const DeformableGrid& grid);

/// Text dump of the Jacobian, one nonzero per line:
/// `vertex component node param value` with param `s` (value) or `d` (the
/// matching displacement component; blocks are diagonal).
void write_jacobian_triplets(const VertexJacobian& jac, const std::filesystem::path& path);

}  // namespace dmc
