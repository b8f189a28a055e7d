#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "diffmc/mesh.hpp"

namespace dmc::test {

/// Fresh directory under the system temp dir, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("diffmc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Axis-aligned box surface, 8 vertices and 12 outward-wound triangles.
inline IndexedMesh box_mesh(const Vec3& lo, const Vec3& hi) {
    IndexedMesh m;
    for (int c = 0; c < 8; ++c)
        m.vertices.emplace_back(c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(), c & 4 ? hi.z() : lo.z());
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return m;
}

/// Two triangles sharing only vertex 0.
inline IndexedMesh bowtie_mesh() {
    IndexedMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(-1, 0, 0), Vec3(-1, -1, 0)};
    m.triangles = {{0, 1, 2}, {0, 3, 4}};
    return m;
}

/// Appends `b` to `a` with reindexed triangles.
inline IndexedMesh merged(IndexedMesh a, const IndexedMesh& b) {
    const auto base = static_cast<std::uint32_t>(a.vertices.size());
    a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
    for (auto t : b.triangles) a.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    return a;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Vec3 v;
    do v = Vec3(n(rng), n(rng), n(rng));
    while (v.norm() < 1e-6);
    return v.normalized();
}

}  // namespace dmc::test
