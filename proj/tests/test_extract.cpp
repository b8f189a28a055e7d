#include <map>
#include <random>
#include <set>

#include <doctest.h>

#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/marching_tets.hpp"
#include "diffmc/mc_table.hpp"
#include "diffmc/quality.hpp"

using namespace dmc;

namespace {

// In-plane location of a corner on a face of the given axis.
int plane_code(int corner, int axis) {
    int code = 0, bit = 0;
    for (int a = 0; a < 3; ++a)
        if (a != axis) code |= mc::corner_bit(corner, a) << bit++;
    return code;
}

std::pair<int, int> face_edge(int edge, int axis) {
    const int a = plane_code(mc::kEdgeCorners[edge][0], axis), b = plane_code(mc::kEdgeCorners[edge][1], axis);
    return {std::min(a, b), std::max(a, b)};
}

std::int64_t edge_count(const IndexedMesh& m) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
    return static_cast<std::int64_t>(edges.size());
}

std::int64_t euler(const IndexedMesh& m) {
    std::set<std::uint32_t> used;
    for (const auto& t : m.triangles) used.insert(t.begin(), t.end());
    return static_cast<std::int64_t>(used.size()) - edge_count(m) + static_cast<std::int64_t>(m.triangles.size());
}

DeformableGrid single_cube(std::array<double, 8> v) {
    return DeformableGrid(ScalarGrid(Index3(2, 2, 2), Vec3::Zero(), Vec3::Ones(), {v.begin(), v.end()}));
}

}  // namespace

TEST_CASE("every table entry agrees with its neighbours on each shared face") {
    using Segment = std::pair<std::pair<int, int>, std::pair<int, int>>;
    std::map<std::pair<int, int>, std::set<Segment>> seen;  // (axis, face signs) -> boundary segments
    for (int config = 0; config < 256; ++config) {
        const auto& c = mc::table()[config];
        std::map<std::pair<int, int>, int> use;
        for (int t = 0; t < c.triangle_count; ++t)
            for (int k = 0; k < 3; ++k) {
                const int a = c.triangles[t][k], b = c.triangles[t][(k + 1) % 3];
                ++use[std::minmax(a, b)];
            }
        std::array<std::set<Segment>, 6> per_face;
        int boundary = 0;
        for (const auto& [e, n] : use) {
            CHECK(n <= 2);
            if (n != 1) continue;
            ++boundary;
            int owner = -1;
            for (int f = 0; f < 6; ++f) {
                const auto& edges = mc::faces()[f].edges;
                if (std::count(edges.begin(), edges.end(), e.first) && std::count(edges.begin(), edges.end(), e.second))
                    owner = f;
            }
            REQUIRE_MESSAGE(owner >= 0, "open edge inside the cell for config " << config);
            const int axis = mc::faces()[owner].axis;
            per_face[owner].insert(std::minmax(face_edge(e.first, axis), face_edge(e.second, axis)));
        }
        int cut_total = 0;
        for (int f = 0; f < 6; ++f) {
            const auto& face = mc::faces()[f];
            int signs = 0, cut = 0;
            for (int corner : face.corners) signs |= ((config >> corner) & 1) << plane_code(corner, face.axis);
            for (int e : face.edges) cut += ((config >> mc::kEdgeCorners[e][0]) & 1) != ((config >> mc::kEdgeCorners[e][1]) & 1);
            cut_total += cut;
            CHECK(per_face[f].size() * 2 == static_cast<std::size_t>(cut));
            const auto key = std::make_pair(face.axis, signs);
            const auto [it, fresh] = seen.emplace(key, per_face[f]);
            if (!fresh) CHECK_MESSAGE(it->second == per_face[f], "config " << config << " face " << f);
        }
        CHECK(boundary * 2 == cut_total);
    }
}

TEST_CASE("only the two uniform configurations are empty") {
    CHECK(mc::table()[0].triangle_count == 0);
    CHECK(mc::table()[255].triangle_count == 0);
    for (int c = 1; c < 255; ++c) CHECK(mc::table()[c].triangle_count > 0);
}

TEST_CASE("uniform grid gives an empty mesh") {
    const auto ex = extract(single_cube({1, 1, 1, 1, 1, 1, 1, 1}), 0.0, {false});
    CHECK(ex.mesh.vertices.empty());
    CHECK(ex.mesh.triangles.empty());
}

TEST_CASE("single inside corner gives one triangle at edge midpoints") {
    const auto grid = single_cube({-1, 1, 1, 1, 1, 1, 1, 1});
    const auto ex = extract(grid, 0.0, {false});
    REQUIRE(ex.mesh.triangles.size() == 1);
    REQUIRE(ex.mesh.vertices.size() == 3);
    REQUIRE(ex.jacobian.vertices.size() == 3);
    for (std::size_t v = 0; v < 3; ++v) {
        const auto& d = ex.jacobian.vertices[v];
        const Vec3 pa = grid.position(d.node_a), pb = grid.position(d.node_b);
        CHECK((ex.mesh.vertices[v] - 0.5 * (pa + pb)).norm() < 1e-15);
        // v = pa + u (pb - pa): dv/ds = (pb - pa) du/ds with du/ds_a = du/ds_b = -0.25.
        CHECK((d.d_value_a - (-0.25) * (pb - pa)).norm() < 1e-15);
        CHECK((d.d_value_b - (-0.25) * (pb - pa)).norm() < 1e-15);
        CHECK(d.weight_a == doctest::Approx(0.5));
        CHECK(d.weight_b == doctest::Approx(0.5));
        CHECK((d.node_a == 0 || d.node_b == 0));
    }
    // Outward winding: the normal points away from the inside corner.
    const auto& t = ex.mesh.triangles[0];
    const Vec3 n = (ex.mesh.vertices[t[1]] - ex.mesh.vertices[t[0]]).cross(ex.mesh.vertices[t[2]] - ex.mesh.vertices[t[0]]);
    CHECK(n.dot(ex.mesh.vertices[t[0]]) > 0);
}

TEST_CASE("sphere extraction is a closed genus-0 surface") {
    const auto grid = DeformableGrid(sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.35), 32));
    const auto ex = extract(grid, 0.0);
    const auto& m = ex.mesh;
    CHECK(euler(m) == 2);
    CHECK(2 * edge_count(m) == 3 * static_cast<std::int64_t>(m.triangles.size()));
    CHECK(euler(extract_mt(grid, 0.0)) == 2);
    const auto q = certify(m);
    CHECK(q.watertight);
    CHECK(q.manifold());
    CHECK(q.euler_characteristic == 2);
}

TEST_CASE("torus extraction has Euler characteristic 0") {
    const auto grid = DeformableGrid(sample_unit_cube(AnalyticField::torus(Vec3(0.5, 0.5, 0.5), 0.3, 0.12), 48));
    const auto ex = extract(grid, 0.0);
    CHECK(euler(ex.mesh) == 0);
    CHECK(2 * edge_count(ex.mesh) == 3 * static_cast<std::int64_t>(ex.mesh.triangles.size()));
    CHECK(euler(extract_mt(grid, 0.0)) == 0);
}

TEST_CASE("extraction does not depend on the thread count") {
    const auto g = with_random_displacement(sample_unit_cube(parse_field("union"), 24), 0.3, 5);
    const auto a = extract(g, 0.0, {true, 1}), b = extract(g, 0.0, {true, 4});
    CHECK(a.mesh.triangles == b.mesh.triangles);
    CHECK(a.mesh.vertices == b.mesh.vertices);
    CHECK(a.mesh.provenance == b.mesh.provenance);
}

TEST_CASE("nodes exactly at iso are nudged and the mesh stays closed") {
    const auto g = DeformableGrid(sample_unit_cube(AnalyticField::plane(Vec3(0, 0, 1), 0.5), 9));
    const auto ex = extract(g, 0.0);
    CHECK(ex.info.perturbed_nodes == 81);
    const auto q = certify(ex.mesh);
    CHECK(q.watertight);
    CHECK(q.manifold());
}

TEST_CASE("closing forces boundary nodes outside") {
    const auto g = DeformableGrid(sample_unit_cube(AnalyticField::plane(Vec3(0, 0, 1), 0.37), 8));
    const auto open = extract(g, 0.0, {false});
    const auto closed = extract(g, 0.0, {true});
    CHECK_FALSE(check_watertight(open.mesh).watertight);
    CHECK(closed.info.closed_nodes > 0);
    CHECK(check_watertight(closed.mesh).watertight);
}

TEST_CASE("zero cotangents give a zero gradient") {
    const auto g = DeformableGrid(sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.3), 12));
    const auto ex = extract(g, 0.0);
    const std::vector<Vec3> zero(ex.mesh.vertices.size(), Vec3::Zero());
    const auto gg = chain_gradient(ex.jacobian, zero);
    REQUIRE(gg.values.size() == g.base.node_count());
    for (double x : gg.values) CHECK(x == 0.0);
    for (const auto& d : gg.displacement) CHECK(d == Vec3::Zero());
    CHECK_THROWS_AS(chain_gradient(ex.jacobian, std::vector<Vec3>(3)), Error);
}

TEST_CASE("gradient support of the single-triangle case") {
    const auto grid = single_cube({-1, 1, 1, 1, 1, 1, 1, 1});
    const auto ex = extract(grid, 0.0, {false});
    const std::vector<Vec3> up(3, Vec3::UnitZ());
    const auto gg = chain_gradient(ex.jacobian, up);
    // Corners touched by the cut edges of corner 0: 0, 1, 2 and 4.
    const std::set<std::size_t> touched{0, 1, 2, 4};
    bool any_value = false;
    for (std::size_t n = 0; n < 8; ++n) {
        if (!touched.count(n)) {
            CHECK(gg.values[n] == 0.0);
            CHECK(gg.displacement[n] == Vec3::Zero());
        } else {
            CHECK(gg.displacement[n].z() != 0.0);
            any_value = any_value || gg.values[n] != 0.0;
        }
    }
    CHECK(any_value);
}

TEST_CASE("chain gradient matches finite differences of a linear functional") {
    const auto base = sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.3), 16);
    const DeformableGrid grid = with_random_displacement(base, 0.2, 3);
    const auto ex = extract(grid, 0.0);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    std::vector<Vec3> w(ex.mesh.vertices.size());
    for (auto& x : w) x = Vec3(n(rng), n(rng), n(rng));
    const auto gg = chain_gradient(ex.jacobian, w);
    // Termwise differences: unmoved vertices contribute exactly zero.
    const auto central = [&](const Extraction& ep, const Extraction& em, double h) {
        double s = 0.0;
        for (std::size_t v = 0; v < w.size(); ++v) s += w[v].dot(ep.mesh.vertices[v] - em.mesh.vertices[v]);
        return s / (2 * h);
    };
    std::vector<std::size_t> active;
    for (const auto& d : ex.jacobian.vertices) active.push_back(d.node_a), active.push_back(d.node_b);
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    std::shuffle(active.begin(), active.end(), rng);
    const double h = 1e-6 * base.spacing().x();
    int compared = 0;
    for (std::size_t i = 0; i < 40 && i < active.size(); ++i) {
        const std::size_t node = active[i];
        for (int p = 0; p < 4; ++p) {
            auto plus = grid, minus = grid;
            if (p == 0) {
                plus.base.values()[node] += h;
                minus.base.values()[node] -= h;
            } else {
                plus.displacement[node][p - 1] += h;
                minus.displacement[node][p - 1] -= h;
            }
            const auto ep = extract(plus, 0.0), em = extract(minus, 0.0);
            if (ep.mesh.provenance != ex.mesh.provenance || em.mesh.provenance != ex.mesh.provenance) continue;
            const double numeric = central(ep, em, h);
            const double analytic = p == 0 ? gg.values[node] : gg.displacement[node][p - 1];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            CHECK(std::abs(numeric - analytic) / scale < 1e-5);
            ++compared;
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("displacement clamp") {
    const auto base = sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.3), 5);
    const double h = base.spacing().x();
    DeformableGrid zero(base, std::vector<Vec3>(base.node_count(), Vec3::Zero()));
    CHECK(clamp_displacements(zero).displacement == zero.displacement);

    DeformableGrid big = zero;
    big.displacement[7] = Vec3(10 * h, 0, 0);
    const auto c = clamp_displacements(big);
    CHECK(c.displacement[7].x() == doctest::Approx((0.5 - 1e-4) * h).epsilon(1e-15));
    CHECK(c.displacement[7].y() == 0.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2 * h, 2 * h);
    DeformableGrid r = zero;
    for (auto& d : r.displacement) d = Vec3(u(rng), u(rng), u(rng));
    const auto once = clamp_displacements(r);
    CHECK(clamp_displacements(once).displacement == once.displacement);
    CHECK_NOTHROW(once.check_displacements());
}
