#include <random>

#include <doctest.h>

#include "diffmc/diffmc.hpp"
#include "diffmc/predicates.hpp"
#include "diffmc/quality.hpp"
#include "helpers.hpp"

using namespace dmc;

namespace {

IndexedMesh tetrahedron(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    IndexedMesh m;
    m.vertices = {a, b, c, d};
    m.triangles = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
    return m;
}

}  // namespace

TEST_CASE("single triangle has three boundary edges") {
    IndexedMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.triangles = {{0, 1, 2}};
    const auto q = check_watertight(m);
    CHECK_FALSE(q.watertight);
    CHECK(q.boundary_edge_count == 3);
}

TEST_CASE("closed box") {
    const auto m = test::box_mesh(Vec3::Zero(), Vec3::Ones());
    const auto q = certify(m);
    CHECK(q.watertight);
    CHECK(q.manifold());
    CHECK(q.euler_characteristic == 2);
    CHECK(q.edge_count == 18);
    CHECK(q.face_count == 12);
}

TEST_CASE("two tetrahedra sharing one edge") {
    // Shared edge (0,0,0)-(1,0,0); the two tets sit on opposite sides.
    const auto a = tetrahedron(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1));
    auto b = tetrahedron(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, -1));
    IndexedMesh m = a;
    m.vertices.push_back(b.vertices[2]);
    m.vertices.push_back(b.vertices[3]);
    const std::array<std::uint32_t, 4> map{0, 1, 4, 5};
    for (const auto& t : b.triangles) m.triangles.push_back({map[t[0]], map[t[1]], map[t[2]]});
    const auto q = check_watertight(m);
    CHECK(q.nonmanifold_edge_count >= 1);
    CHECK_FALSE(q.watertight);
}

TEST_CASE("bowtie fails the fan check") {
    const auto q = check_manifold(test::bowtie_mesh());
    CHECK_FALSE(q.manifold_connectivity);
    CHECK(q.nonmanifold_vertex_count == 1);
    CHECK_FALSE(q.manifold());
}

TEST_CASE("extracted sphere passes every check") {
    const auto g = DeformableGrid(sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.35), 24));
    const auto q = certify(extract(g, 0.0).mesh);
    CHECK(q.watertight);
    CHECK(q.manifold_connectivity);
    CHECK(q.self_intersection_free);
    CHECK(q.self_intersection_checked);
}

TEST_CASE("interpenetrating boxes are flagged") {
    const auto m = test::merged(test::box_mesh(Vec3::Zero(), Vec3::Ones()),
                                test::box_mesh(Vec3::Constant(0.5), Vec3::Constant(1.5)));
    const auto q = certify(m);
    CHECK(q.watertight);
    CHECK(q.manifold_connectivity);
    CHECK_FALSE(q.self_intersection_free);
    const auto pairs = intersecting_pairs(m);
    CHECK(pairs == intersecting_pairs_brute_force(m));
    CHECK(q.intersecting_pair_count == pairs.size());
    CHECK_FALSE(pairs.empty());
}

TEST_CASE("tree and brute force agree on random triangle soups") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0), s(-0.15, 0.15);
    for (int trial = 0; trial < 20; ++trial) {
        IndexedMesh m;
        for (int t = 0; t < 120; ++t) {
            const Vec3 c(u(rng), u(rng), u(rng));
            const auto base = static_cast<std::uint32_t>(m.vertices.size());
            for (int k = 0; k < 3; ++k) m.vertices.push_back(c + Vec3(s(rng), s(rng), s(rng)));
            m.triangles.push_back({base, base + 1, base + 2});
        }
        CHECK(intersecting_pairs(m, 1) == intersecting_pairs_brute_force(m));
        CHECK(intersecting_pairs(m, 3) == intersecting_pairs_brute_force(m));
    }
}

TEST_CASE("degenerate triangles are counted") {
    auto m = test::box_mesh(Vec3::Zero(), Vec3::Ones());
    m.triangles.push_back({0, 0, 1});
    const auto q = check_watertight(m);
    CHECK(q.degenerate_triangle_count == 1);
    CHECK_FALSE(q.watertight);
}

TEST_CASE("welded neighbours touching along an edge are not intersections") {
    IndexedMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    m.triangles = {{0, 1, 2}, {1, 3, 2}};
    CHECK(intersecting_pairs(m).empty());
}

TEST_CASE("exact orientation") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    CHECK(exact::orient3d(a, b, c, Vec3(0, 0, 1)) != 0);
    CHECK(exact::orient3d(a, b, c, Vec3(0.3, 0.3, 0)) == 0);
    CHECK(exact::orient3d(a, b, c, Vec3(0, 0, 1)) == -exact::orient3d(a, c, b, Vec3(0, 0, 1)));
    // Nearly coplanar points where naive evaluation loses the sign.
    const Vec3 p(0.1, 0.1, 0.0), q(0.1 + 1e-16, 0.2, 0.0), r(0.3, 0.1 + 1e-16, 0.0);
    CHECK(exact::orient3d(p, q, r, Vec3(0.5, 0.5, 1e-300)) == -exact::orient3d(p, q, r, Vec3(0.5, 0.5, -1e-300)));
    CHECK(exact::orient2d(0, 0, 1, 1, 2, 2) == 0);
    CHECK(exact::orient2d(0, 0, 1, 0, 0, 1) == 1);
}

TEST_CASE("closed triangles that touch at a point intersect") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    CHECK(exact::triangles_intersect(a, b, c, Vec3(1, 0, 0), Vec3(2, 0, 1), Vec3(2, 1, 0)));
    CHECK_FALSE(exact::triangles_intersect(a, b, c, Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)));
    CHECK(exact::triangles_intersect(a, b, c, Vec3(0.2, 0.2, -1), Vec3(0.2, 0.2, 1), Vec3(0.3, 0.2, 1)));
}

TEST_CASE("report serialises offenders") {
    const auto q = certify(test::bowtie_mesh());
    const auto j = to_json(q);
    CHECK(j.at("watertight") == false);
    CHECK(j.contains("offending_elements"));
}
