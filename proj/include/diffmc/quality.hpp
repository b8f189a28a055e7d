#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "diffmc/mesh.hpp"

namespace dmc {

/// One sampled defect. `ids` are vertex ids for edges/vertices and triangle
/// ids for degenerate triangles and intersecting pairs.
struct Offender {
    std::string kind;
    std::vector<std::uint64_t> ids;
    friend bool operator==(const Offender&, const Offender&) = default;
};

struct QualityReport {
    bool watertight = false;
    bool manifold_connectivity = false;
    bool self_intersection_free = true;
    bool self_intersection_checked = false;
    std::int64_t euler_characteristic = 0;
    std::size_t vertex_count = 0;  ///< vertices referenced by a triangle
    std::size_t edge_count = 0;
    std::size_t face_count = 0;
    std::size_t boundary_edge_count = 0;
    std::size_t nonmanifold_edge_count = 0;
    std::size_t nonmanifold_vertex_count = 0;
    std::size_t degenerate_triangle_count = 0;
    std::size_t intersecting_pair_count = 0;
    std::vector<Offender> offending_elements;

    /// Connectivity and (when checked) self-intersection both pass.
    bool manifold() const { return manifold_connectivity && self_intersection_free; }
};

/// Maximum offenders of each kind kept in a report.
inline constexpr std::size_t kMaxOffendersPerKind = 16;

/// Edge census: watertight iff every undirected edge has exactly two faces.
/// A triangle with a repeated index is degenerate; each collapsed edge counts
/// as a non-manifold edge.
QualityReport check_watertight(const IndexedMesh& mesh);

struct ManifoldOptions {
    bool self_intersection = true;
    int threads = 0;
};

/// Edge incidence <= 2, one fan per vertex (open fans allowed), and no
/// intersecting triangle pairs other than those sharing a vertex. The edge
/// census fields are filled in as well.
QualityReport check_manifold(const IndexedMesh& mesh, const ManifoldOptions& options = {});

/// Both checks merged into one report.
QualityReport certify(const IndexedMesh& mesh, const ManifoldOptions& options = {});

/// All intersecting triangle pairs (i < j, sorted), found through an
/// axis-aligned bounding-box tree. Pairs sharing a vertex index are skipped.
std::vector<std::pair<std::uint32_t, std::uint32_t>> intersecting_pairs(const IndexedMesh& mesh, int threads = 0);

/// O(n^2) reference for intersecting_pairs.
std::vector<std::pair<std::uint32_t, std::uint32_t>> intersecting_pairs_brute_force(const IndexedMesh& mesh);

nlohmann::json to_json(const QualityReport& report);

}  // namespace dmc
