#include <fstream>
#include <sstream>

#include <doctest.h>

#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/grid_io.hpp"
#include "diffmc/optimize.hpp"
#include "helpers.hpp"

using namespace dmc;

TEST_CASE("grid round trip is bitwise in double precision") {
    const auto dir = test::scratch_dir("grid_io");
    const auto g = with_random_displacement(sample_unit_cube(parse_field("torus"), 11), 0.3, 4);
    write_grid(g, dir / "g.json");
    const auto back = read_grid(dir / "g.json");
    CHECK(back.base.dims() == g.base.dims());
    CHECK(back.base.spacing() == g.base.spacing());
    CHECK(std::equal(back.base.values().begin(), back.base.values().end(), g.base.values().begin()));
    CHECK(back.displacement == g.displacement);
    CHECK(std::filesystem::exists(dir / "g.values.raw"));
    CHECK(std::filesystem::file_size(dir / "g.values.raw") == 8 * g.base.node_count());
}

TEST_CASE("single precision grids round to float") {
    const auto dir = test::scratch_dir("grid_io32");
    const auto g = DeformableGrid(sample_unit_cube(parse_field("sphere"), 7));
    write_grid(g, dir / "g.json", Precision::Float32);
    const auto back = read_grid(dir / "g.json");
    CHECK_FALSE(back.has_displacement());
    for (std::size_t n = 0; n < g.base.node_count(); ++n)
        CHECK(back.base.values()[n] == static_cast<double>(static_cast<float>(g.base.values()[n])));
}

TEST_CASE("grid header errors name the problem") {
    const auto dir = test::scratch_dir("grid_bad");
    std::ofstream(dir / "bad.json") << R"({"format": "something-else"})";
    CHECK_THROWS_AS(read_grid(dir / "bad.json"), Error);
    const auto g = DeformableGrid(sample_unit_cube(parse_field("sphere"), 5));
    write_grid(g, dir / "g.json");
    std::filesystem::resize_file(dir / "g.values.raw", 16);
    CHECK_THROWS_AS(read_grid(dir / "g.json"), Error);
}

TEST_CASE("mesh formats round trip") {
    const auto dir = test::scratch_dir("mesh_io");
    auto m = test::box_mesh(Vec3(0.125, 0.25, 0.5), Vec3(1, 2, 4));
    m.colors.assign(m.vertices.size(), Rgb8{10, 20, 30});
    write_obj(m, dir / "m.obj");
    const auto obj = read_obj(dir / "m.obj");
    CHECK(obj.triangles == m.triangles);
    CHECK(obj.vertices == m.vertices);

    write_ply(m, dir / "m.ply");
    const auto ply = read_mesh(dir / "m.ply");
    CHECK(ply.triangles == m.triangles);
    CHECK(ply.vertices == m.vertices);
    CHECK(ply.colors == m.colors);

    std::ofstream(dir / "ascii.ply") << "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                                        "property float z\nelement face 1\nproperty list uchar int vertex_indices\n"
                                        "end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
    const auto a = read_ply(dir / "ascii.ply");
    CHECK(a.triangles.size() == 1);
    CHECK(a.vertices[1] == Vec3(1, 0, 0));
    CHECK_THROWS_AS(read_mesh(dir / "m.stl"), Error);
}

TEST_CASE("points read from text and meshes") {
    const auto dir = test::scratch_dir("points_io");
    std::ofstream(dir / "p.txt") << "0 0 0\n1 2 3\n\n0.5 0.25 0.125\n";
    const auto p = read_points(dir / "p.txt");
    REQUIRE(p.size() == 3);
    CHECK(p[1] == Vec3(1, 2, 3));
    const auto m = test::box_mesh(Vec3::Zero(), Vec3::Ones());
    write_obj(m, dir / "b.obj");
    CHECK(read_points(dir / "b.obj").size() == 8);
}

TEST_CASE("jacobian triplets") {
    const auto dir = test::scratch_dir("jac_io");
    const auto g = DeformableGrid(ScalarGrid(Index3(2, 2, 2), Vec3::Zero(), Vec3::Ones(), {-1, 1, 1, 1, 1, 1, 1, 1}));
    const auto ex = extract(g, 0.0, {false});
    write_jacobian_triplets(ex.jacobian, dir / "j.txt");
    std::ifstream in(dir / "j.txt");
    std::string line;
    int rows = 0, weights = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        ++rows;
        std::istringstream ss(line);
        std::size_t v = 0, node = 0;
        int c = 0;
        std::string param;
        double value = 0.0;
        ss >> v >> c >> node >> param >> value;
        CHECK(v < 3);
        CHECK(node < 8);
        if (param == "d") {
            CHECK(value == 0.5);
            ++weights;
        }
    }
    // Per vertex and component: a value entry and a displacement weight for
    // each edge endpoint.
    CHECK(rows == 3 * 3 * 4);
    CHECK(weights == 3 * 3 * 2);
}
