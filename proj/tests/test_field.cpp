#include <cmath>
#include <random>

#include <doctest.h>

#include "diffmc/field.hpp"
#include "diffmc/fixtures.hpp"

using namespace dmc;

TEST_CASE("plane sampled on a 2x2x2 grid") {
    const auto g = sample_field_to_grid(AnalyticField::plane(Vec3(0, 0, 1), 0.5), Index3(2, 2, 2), Vec3::Zero(),
                                        Vec3::Ones());
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            CHECK(g.at(i, j, 0) == -0.5);
            CHECK(g.at(i, j, 1) == 0.5);
        }
}

TEST_CASE("sphere value at its center") {
    const auto g = sample_field_to_grid(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.5), Index3(3, 3, 3),
                                        Vec3::Zero(), Vec3::Constant(0.5));
    CHECK(g.at(1, 1, 1) == -0.5);
}

TEST_CASE("torus grid signs match pointwise re-evaluation") {
    const Vec3 c(0.5, 0.5, 0.5);
    const auto f = AnalyticField::torus(c, 0.3, 0.1);
    const auto g = sample_unit_cube(f, 32);
    std::size_t inside = 0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        const Vec3 p = g.node_position(n);
        const double q = std::hypot(std::hypot(p.x() - c.x(), p.y() - c.y()) - 0.3, p.z() - c.z()) - 0.1;
        REQUIRE((g.values()[n] < 0) == (q < 0));
        inside += q < 0;
    }
    CHECK(inside > 0);
}

TEST_CASE("node ordering is x-fastest") {
    const auto g = sample_field_to_grid(AnalyticField::plane(Vec3(1, 0, 0), 0.0), Index3(3, 4, 5), Vec3::Zero(),
                                        Vec3::Ones());
    CHECK(g.index(1, 2, 3) == 1 + 3 * (2 + 4 * 3));
    CHECK(g.coords(g.index(2, 3, 4)) == Index3(2, 3, 4));
    CHECK(g.values()[1] == 1.0);
}

TEST_CASE("nonlinear warp") {
    CHECK(warp_value(0.0, 0.0) == 0.0);
    CHECK(warp_value(0.0, 0.1) == doctest::Approx(-0.1).epsilon(1e-15));

    // Bisection for the zero of exp(s) - 1 - 0.1.
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (warp_value(mid, 0.1) < 0 ? lo : hi) = mid;
    }
    CHECK(lo == doctest::Approx(std::log(1.1)).epsilon(1e-14));
    CHECK(lo == doctest::Approx(0.09531).epsilon(1e-4));

    bool saturated = false;
    CHECK(warp_value(1e6, 0.0, &saturated) == warp_cap());
    CHECK(saturated);

    const auto g = sample_unit_cube(AnalyticField::plane(Vec3(0, 0, 1), 0.5), 8);
    const auto w = apply_nonlinear_warp(g, 0.1);
    CHECK(w.saturated_nodes == 0);
    for (std::size_t n = 0; n < g.node_count(); ++n)
        CHECK(w.grid.values()[n] == doctest::Approx(std::exp(g.values()[n]) - 1.0 - 0.1).epsilon(1e-14));
}

TEST_CASE("density to opacity") {
    const auto one = [](double sigma, double step, double t) {
        auto g = ScalarGrid::filled(Index3(2, 2, 2), Vec3::Zero(), Vec3::Ones(), sigma);
        g.set_semantics(ValueSemantics::Density);
        return density_to_opacity(g, step, t).values()[0];
    };
    CHECK(one(0.0, 0.3, 0.5) == -0.5);
    CHECK(std::abs(one(std::log(2.0), 1.0, 0.5)) < 1e-15);
    CHECK(one(10.0, 0.01, 0.1) == doctest::Approx(-0.004837418).epsilon(1e-6));
    CHECK_THROWS_AS(one(-1.0, 0.1, 0.5), Error);
}

TEST_CASE("volume rendering of a single opaque sample") {
    const RaySample s{1e6, 1.0, Vec3(1, 0, 0)};
    const auto r = volume_render_ray(std::span<const RaySample>(&s, 1));
    CHECK((r.color - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK(r.transmittance < 1e-12);
}

TEST_CASE("volume rendering of two samples telescopes") {
    const std::vector<RaySample> s{{std::log(2.0), 1.0, Vec3(1, 0, 0)}, {1e6, 1.0, Vec3(0, 1, 0)}};
    const auto r = volume_render_ray(s);
    CHECK((r.color - Vec3(0.5, 0.5, 0.0)).norm() < 1e-12);
    REQUIRE(r.weights.size() == 2);
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("constant colour matches the closed form") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<RaySample> s(1 + trial % 17);
        double optical = 0.0;
        for (auto& x : s) {
            x = {u(rng), 0.01 + u(rng) * 0.1, Vec3(0.2, 0.4, 0.9)};
            optical += x.sigma * x.delta;
        }
        const auto r = volume_render_ray(s);
        const Vec3 expect = Vec3(0.2, 0.4, 0.9) * (1.0 - std::exp(-optical));
        CHECK((r.color - expect).norm() < 1e-12);
        double sum = r.transmittance;
        for (double w : r.weights) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("built-in fields parse and json fields round trip the shape") {
    for (const auto& name : builtin_field_names()) CHECK_NOTHROW(parse_field(name));
    const auto f = field_from_json(nlohmann::json::parse(
        R"({"kind": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.25, "warp": 0.1})"));
    CHECK(f.is_warped());
    CHECK(f.sdf(Vec3(0.5, 0.5, 0.75)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(parse_field("no-such-field"), Error);
}

TEST_CASE("certification fixtures are seeded") {
    const auto a = certification_fixtures(10, 3), b = certification_fixtures(10, 3);
    REQUIRE(a.size() == 10);
    const Vec3 p(0.41, 0.52, 0.63);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].eval(p) == b[i].eval(p));
}

TEST_CASE("random displacements stay below half a cell") {
    const auto g = sample_unit_cube(AnalyticField::sphere(Vec3(0.5, 0.5, 0.5), 0.3), 9);
    const auto d = with_random_displacement(g, 0.49, 11);
    CHECK_NOTHROW(d.check_displacements());
    const double h = g.spacing().x();
    for (const auto& v : d.displacement) CHECK(v.cwiseAbs().maxCoeff() <= 0.49 * h);
}
