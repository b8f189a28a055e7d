#include <cmath>
#include <fstream>
#include <random>

#include <doctest.h>

#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/optimize.hpp"
#include "diffmc/quality.hpp"
#include "helpers.hpp"

using namespace dmc;

namespace {

DeformableGrid sphere_grid(double r, int res) {
    return DeformableGrid(sample_unit_cube(AnalyticField::sphere(Vec3::Constant(0.5), r), res));
}

double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    const PointIndex ia(a), ib(b);
    double d = 0.0;
    for (const auto& p : a) d = std::max(d, ib.nearest(p).distance_squared);
    for (const auto& p : b) d = std::max(d, ia.nearest(p).distance_squared);
    return std::sqrt(d);
}

TargetSpec points_target(std::vector<Vec3> p) {
    TargetSpec t;
    t.points = std::move(p);
    return t;
}

}  // namespace

TEST_CASE("loss vanishes when vertices coincide with targets") {
    const auto mesh = extract(sphere_grid(0.3, 12), 0.0).mesh;
    const auto r = loss_and_vertex_grad(mesh, points_target(mesh.vertices));
    CHECK(r.loss == 0.0);
    for (const auto& g : r.grad) CHECK(g == Vec3::Zero());
}

TEST_CASE("single vertex against a single target") {
    IndexedMesh m;
    const Vec3 x(0.1, 0.2, 0.3), y(0.4, -0.1, 0.7);
    m.vertices = {x};
    m.triangles = {{0, 0, 0}};
    const auto r = loss_and_vertex_grad(m, points_target({y}));
    CHECK(r.loss == doctest::Approx(2.0 * (x - y).squaredNorm()).epsilon(1e-15));
    CHECK((r.grad[0] - 4.0 * (x - y)).norm() < 1e-15);
}

TEST_CASE("chamfer vertex gradient matches finite differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    IndexedMesh m = test::box_mesh(Vec3::Constant(0.2), Vec3::Constant(0.8));
    for (auto& v : m.vertices) v += 0.05 * Vec3(u(rng), u(rng), u(rng));
    std::vector<Vec3> targets;
    for (int i = 0; i < 30; ++i) targets.emplace_back(u(rng), u(rng), u(rng));
    const auto t = points_target(targets);
    const auto r = loss_and_vertex_grad(m, t);
    const double h = 1e-6;
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        for (int a = 0; a < 3; ++a) {
            auto p = m, q = m;
            p.vertices[v][a] += h;
            q.vertices[v][a] -= h;
            const auto lp = loss_and_vertex_grad(p, t), lq = loss_and_vertex_grad(q, t);
            REQUIRE(lp.signature == r.signature);
            REQUIRE(lq.signature == r.signature);
            const double numeric = (lp.loss - lq.loss) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(r.grad[v][a]), 1e-8});
            CHECK(std::abs(numeric - r.grad[v][a]) / scale < 1e-6);
        }
}

TEST_CASE("depth vertex gradient matches finite differences") {
    const IndexedMesh m = test::box_mesh(Vec3(0.3, 0.3, 0.3), Vec3(0.7, 0.7, 0.7));
    TargetSpec t;
    const auto cam = Camera::look_at(Vec3(1.9, 1.3, 1.1), Vec3::Constant(0.5), Vec3::UnitZ(), 24, 24, 40.0);
    t.views.push_back({cam, render_depth(test::box_mesh(Vec3::Constant(0.32), Vec3::Constant(0.71)), cam)});
    const auto r = loss_and_vertex_grad(m, t);
    CHECK(r.loss > 0.0);
    const double h = 1e-7;
    int compared = 0;
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        for (int a = 0; a < 3; ++a) {
            auto p = m, q = m;
            p.vertices[v][a] += h;
            q.vertices[v][a] -= h;
            const auto lp = loss_and_vertex_grad(p, t), lq = loss_and_vertex_grad(q, t);
            if (lp.signature != r.signature || lq.signature != r.signature) continue;
            REQUIRE(lp.terms.size() == lq.terms.size());
            double numeric = 0.0;
            for (std::size_t i = 0; i < lp.terms.size(); ++i) numeric += lp.terms[i] - lq.terms[i];
            numeric /= 2 * h;
            const double scale = std::max(std::abs(numeric), std::abs(r.grad[v][a]));
            // Below 1e-9 both sides are zero up to depth rounding divided by h.
            if (scale < 1e-9)
                CHECK(std::abs(r.grad[v][a]) < 1e-15);
            else
                CHECK(std::abs(numeric - r.grad[v][a]) / scale < 1e-5);
            ++compared;
        }
    CHECK(compared > 6);
}

TEST_CASE("mesh area and its gradient") {
    const auto m = test::box_mesh(Vec3::Zero(), Vec3(1, 2, 3));
    std::vector<Vec3> g(m.vertices.size(), Vec3::Zero());
    CHECK(mesh_area(m, &g) == doctest::Approx(2 * (2 + 3 + 6)));
    const double h = 1e-6;
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        for (int a = 0; a < 3; ++a) {
            auto p = m, q = m;
            p.vertices[v][a] += h;
            q.vertices[v][a] -= h;
            CHECK(g[v][a] == doctest::Approx((mesh_area(p) - mesh_area(q)) / (2 * h)).epsilon(1e-6));
        }
}

TEST_CASE("normal projection removes the tangential part") {
    IndexedMesh quad;
    quad.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0), Vec3(5, 5, 5)};
    quad.triangles = {{0, 1, 2}, {0, 2, 3}};
    std::vector<Vec3> g(5, Vec3(1, 2, 3));
    project_to_normals(quad, g);
    for (int v = 0; v < 4; ++v) CHECK((g[v] - Vec3(0, 0, 3)).norm() < 1e-15);
    CHECK(g[4] == Vec3::Zero());
}

TEST_CASE("gradient smoothing keeps constants and spreads impulses") {
    const auto grid = ScalarGrid::filled(Index3(5, 6, 7), Vec3::Zero(), Vec3::Ones(), 0.0);
    std::vector<double> c(grid.node_count(), 3.0);
    smooth_node_gradient(grid, c, 2);
    for (double x : c) CHECK(x == doctest::Approx(3.0).epsilon(1e-15));

    std::vector<double> impulse(grid.node_count(), 0.0);
    impulse[grid.index(2, 3, 3)] = 1.0;
    smooth_node_gradient(grid, impulse, 1);
    CHECK(impulse[grid.index(2, 3, 3)] == doctest::Approx(0.125));
    CHECK(impulse[grid.index(3, 3, 3)] == doctest::Approx(0.0625));
    double sum = 0.0;
    for (double x : impulse) sum += x;
    CHECK(sum == doctest::Approx(1.0));
    std::vector<double> same = c;
    smooth_node_gradient(grid, same, 0);
    CHECK(same == c);
}

TEST_CASE("optimizer steps") {
    OptimizeConfig cfg;
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.5, -4.0};
    Optimizer plain(OptimizerKind::Plain, 0.1, cfg);
    plain.step(p, g);
    CHECK(p[0] == doctest::Approx(0.95));
    CHECK(p[1] == doctest::Approx(-1.6));

    std::vector<double> q{0.0, 0.0};
    Optimizer adam(OptimizerKind::Adam, 0.01, cfg);
    adam.step(q, g);
    CHECK(q[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(0.01).epsilon(1e-6));

    std::vector<double> r{0.0};
    Optimizer momentum(OptimizerKind::Momentum, 1.0, cfg);
    momentum.step(r, std::vector<double>{1.0});
    momentum.step(r, std::vector<double>{1.0});
    CHECK(r[0] == doctest::Approx(-(1.0 + 1.9)));
}

TEST_CASE("config json round trip and validation") {
    OptimizeConfig c;
    c.iterations = 17;
    c.lr_values = 0.02;
    c.optimizer = OptimizerKind::Momentum;
    c.truncation = 2.5;
    const auto back = config_from_json(to_json(c));
    CHECK(back.iterations == 17);
    CHECK(back.lr_values == 0.02);
    CHECK(back.optimizer == OptimizerKind::Momentum);
    CHECK(back.truncation == 2.5);
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"no_such_key", 1}}), Error);
    c.lr_values = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("surface samples lie on the zero set") {
    const auto f = AnalyticField::torus(Vec3::Constant(0.5), 0.3, 0.1);
    const auto a = sample_surface_points(f, 500, 4), b = sample_surface_points(f, 500, 4);
    CHECK(a == b);
    for (const auto& p : a) CHECK(std::abs(f.sdf(p)) < 1e-9);
}

TEST_CASE("fit keeps a surface that already matches its target") {
    const auto init = sphere_grid(0.3, 16);
    const auto mesh = extract(init, 0.0).mesh;
    OptimizeConfig cfg;
    cfg.iterations = 20;
    const auto r = fit_grid(init, points_target(mesh.vertices), cfg);
    CHECK(r.trace.back().loss <= 1e-12);
    CHECK(r.mesh.triangles == mesh.triangles);
    CHECK(hausdorff(r.mesh.vertices, mesh.vertices) < 1e-6);
    CHECK(r.trace.size() == 21);
}

TEST_CASE("sphere fitted to box points") {
    const auto target = points_target(
        sample_surface_points(AnalyticField::box(Vec3::Constant(0.5), Vec3::Constant(0.3)), 4096, 1));
    OptimizeConfig cfg;
    cfg.seed = 1;
    const auto r = fit_grid(sphere_grid(0.4, 32), target, cfg);
    CHECK(r.trace.size() == 301);
    CHECK(r.trace.back().loss < 0.1 * r.trace.front().loss);
    CHECK(r.report.watertight);
    CHECK(r.report.manifold_connectivity);
}

TEST_CASE("truncation bounds node values") {
    const auto init = sphere_grid(0.3, 16);
    OptimizeConfig cfg;
    cfg.iterations = 3;
    cfg.truncation = 2.0;
    const auto target = points_target(sample_surface_points(AnalyticField::sphere(Vec3::Constant(0.5), 0.25), 500, 2));
    const auto r = fit_grid(init, target, cfg);
    const double band = 2.0 * init.base.spacing().x();
    for (double v : r.grid.base.values()) CHECK(std::abs(v) <= band);
}

TEST_CASE("fine-tuning with zero iterations is the identity") {
    const auto mesh = extract(sphere_grid(0.3, 12), 0.0).mesh;
    OptimizeConfig cfg;
    cfg.iterations = 0;
    const auto r = finetune_vertices(mesh, points_target(mesh.vertices), cfg);
    CHECK(r.mesh.vertices == mesh.vertices);
    CHECK(r.mesh.triangles == mesh.triangles);
}

TEST_CASE("fine-tuning follows a shifted target and keeps connectivity") {
    const auto mesh = extract(sphere_grid(0.3, 16), 0.0).mesh;
    std::vector<Vec3> shifted;
    for (const auto& v : mesh.vertices) shifted.push_back(v + Vec3(0, 0, 0.01));
    OptimizeConfig cfg;
    cfg.iterations = 200;
    cfg.lr_vertices = 5e-4;
    const auto r = finetune_vertices(mesh, points_target(shifted), cfg);
    CHECK(r.mesh.triangles == mesh.triangles);
    Vec3 mean = Vec3::Zero();
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) mean += r.mesh.vertices[v] - mesh.vertices[v];
    mean /= static_cast<double>(mesh.vertices.size());
    CHECK(mean.z() == doctest::Approx(0.01).epsilon(0.05));
    CHECK(std::abs(mean.x()) < 1e-3);
    CHECK(check_watertight(r.mesh).watertight);
}

TEST_CASE("aggressive fine-tuning on a thin shape stays watertight") {
    const auto grid = DeformableGrid(sample_unit_cube(AnalyticField::box(Vec3::Constant(0.5), Vec3(0.3, 0.3, 0.04)), 24));
    const auto mesh = extract(grid, 0.0).mesh;
    OptimizeConfig cfg;
    cfg.iterations = 60;
    cfg.lr_vertices = 0.02;
    const auto target = points_target(sample_surface_points(AnalyticField::sphere(Vec3::Constant(0.5), 0.2), 2000, 3));
    const auto r = finetune_vertices(mesh, target, cfg);
    CHECK(r.mesh.triangles == mesh.triangles);
    CHECK(check_watertight(r.mesh).watertight);
}

TEST_CASE("gradcheck of a zero-gradient case") {
    const auto grid = sphere_grid(0.3, 12);
    const auto mesh = extract(grid, 0.0).mesh;
    GradcheckOptions o;
    o.samples = 20;
    const auto r = gradcheck(grid, points_target(mesh.vertices), o);
    REQUIRE_FALSE(r.checked.empty());
    for (const auto& e : r.checked) {
        CHECK(e.analytic == 0.0);
        // Only the odd-order remainder of the central difference survives.
        CHECK(std::abs(e.numeric) < 1e-12);
    }
}

TEST_CASE("gradcheck on a sphere grid") {
    const auto grid = with_random_displacement(sphere_grid(0.3, 16).base, 0.2, 2);
    const auto target =
        points_target(sample_surface_points(AnalyticField::sphere(Vec3::Constant(0.52), 0.27), 1000, 6));
    GradcheckOptions o;
    o.samples = 64;
    o.seed = 3;
    const auto r = gradcheck(grid, target, o);
    CHECK(r.checked.size() == 64);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradcheck lists configuration flips as excluded") {
    auto grid = sphere_grid(0.3, 12);
    const double h = 1e-6 * grid.base.spacing().x();
    const auto ex = extract(grid, 0.0);
    std::size_t node = 0;
    for (const auto& d : ex.jacobian.vertices) {
        node = grid.base.values()[d.node_a] > 0 ? d.node_a : d.node_b;
        break;
    }
    grid.base.values()[node] = 0.5 * h;
    const auto target = points_target(sample_surface_points(AnalyticField::sphere(Vec3::Constant(0.5), 0.28), 500, 1));
    GradcheckOptions o;
    o.samples = 1u << 20;
    o.displacement = false;
    const auto r = gradcheck(grid, target, o);
    bool found = false;
    for (const auto& e : r.excluded) found = found || (e.node == node && e.excluded == "configuration change");
    CHECK(found);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked.size() + r.excluded.size() == r.active_parameters);
}

TEST_CASE("trace csv") {
    const auto dir = test::scratch_dir("trace");
    write_trace_csv({{0, 1.5, 2.0, 3, 4, 2}}, dir / "t.csv");
    std::ifstream in(dir / "t.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "iteration,loss,area,vertices,triangles,euler_characteristic");
    CHECK(row == "0,1.5,2,3,4,2");
}
