#include "diffmc/fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "diffmc/diffmc.hpp"
#include "diffmc/parallel.hpp"

namespace dmc {

namespace {

Vec3 vec3(const nlohmann::json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw Error(std::string("field key '") + key + "' must be a 3-vector");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

}  // namespace

AnalyticField field_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        AnalyticField f = AnalyticField::sphere(Vec3::Zero(), 1.0);
        if (kind == "sphere") f = AnalyticField::sphere(vec3(j, "center"), j.at("radius").get<double>());
        else if (kind == "box") f = AnalyticField::box(vec3(j, "center"), vec3(j, "half_extents"));
        else if (kind == "torus")
            f = AnalyticField::torus(vec3(j, "center"), j.at("major_radius").get<double>(),
                                     j.at("minor_radius").get<double>());
        else if (kind == "plane") f = AnalyticField::plane(vec3(j, "normal"), j.at("offset").get<double>());
        else if (kind == "union") {
            std::vector<AnalyticField> parts;
            for (const auto& p : j.at("parts")) parts.push_back(field_from_json(p));
            f = AnalyticField::union_of(std::move(parts));
        } else {
            throw Error("unknown field kind '" + kind + "'");
        }
        if (j.contains("warp")) f = f.warped(j.at("warp").get<double>());
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad field description: ") + e.what());
    }
}

std::vector<std::string> builtin_field_names() { return {"sphere", "box", "torus", "plane", "union"}; }

AnalyticField parse_field(const std::string& name) {
    const Vec3 c(0.5, 0.5, 0.5);
    if (name == "sphere") return AnalyticField::sphere(c, 0.35);
    if (name == "box") return AnalyticField::box(c, Vec3(0.3, 0.3, 0.3));
    if (name == "torus") return AnalyticField::torus(c, 0.3, 0.12);
    if (name == "plane") return AnalyticField::plane(Vec3(0, 0, 1), 0.5);
    if (name == "union")
        return AnalyticField::union_of(
            {AnalyticField::sphere(Vec3(0.35, 0.5, 0.5), 0.22), AnalyticField::sphere(Vec3(0.65, 0.5, 0.5), 0.22)});
    std::ifstream in(name);
    if (!in) throw Error("'" + name + "' is neither a built-in field (sphere, box, torus, plane, union) nor a readable file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(name + ": " + e.what());
    }
    return field_from_json(j);
}

std::vector<Fixture> certification_fixtures(std::size_t count, std::uint64_t seed) {
    std::vector<Fixture> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(seed + 1000003ULL * i);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const auto range = [&](double a, double b) { return a + (b - a) * U(rng); };
        const auto point = [&](double a, double b) { return Vec3(range(a, b), range(a, b), range(a, b)); };
        const std::string tag = "#" + std::to_string(i);
        switch (i % 5) {
            case 0: {
                const auto f = AnalyticField::sphere(point(0.4, 0.6), range(0.12, 0.32));
                out.push_back({"sphere" + tag, f});
                break;
            }
            case 1: {
                const auto f = AnalyticField::box(point(0.4, 0.6), point(0.1, 0.3));
                out.push_back({"box" + tag, f});
                break;
            }
            case 2: {
                const double R = range(0.2, 0.3);
                const auto f = AnalyticField::torus(point(0.45, 0.55), R, range(0.06, 0.12));
                out.push_back({"torus" + tag, f});
                break;
            }
            case 3: {
                std::vector<AnalyticField> parts;
                const int n = 2 + static_cast<int>(U(rng) * 2.0);
                for (int k = 0; k < n; ++k) {
                    if (U(rng) < 0.5) parts.push_back(AnalyticField::sphere(point(0.3, 0.7), range(0.1, 0.22)));
                    else parts.push_back(AnalyticField::box(point(0.3, 0.7), point(0.08, 0.2)));
                }
                const auto f = AnalyticField::union_of(std::move(parts));
                out.push_back({"union" + tag, f});
                break;
            }
            default: {
                // Threshold of a sum of Gaussian bumps.
                struct Bump {
                    Vec3 c;
                    double inv2s2;
                };
                std::vector<Bump> bumps(8);
                for (auto& b : bumps) {
                    const double s = range(0.06, 0.14);
                    b = {point(0.2, 0.8), 1.0 / (2.0 * s * s)};
                }
                out.push_back({"blobs" + tag, [bumps](const Vec3& x) {
                                   double sum = 0.0;
                                   for (const auto& b : bumps) sum += std::exp(-(x - b.c).squaredNorm() * b.inv2s2);
                                   return 0.5 - sum;
                               }});
                break;
            }
        }
    }
    return out;
}

ScalarGrid sample_function(const FieldFn& f, int res, int threads) {
    if (res < 2) throw Error("resolution must be at least 2");
    const double h = 1.0 / static_cast<double>(res - 1);
    ScalarGrid g = ScalarGrid::filled(Index3(res, res, res), Vec3::Zero(), Vec3(h, h, h), 0.0);
    auto values = g.values();
    parallel_chunks(values.size(), static_cast<std::size_t>(res), threads,
                    [&](std::size_t, std::size_t b, std::size_t e) {
                        for (std::size_t n = b; n < e; ++n) {
                            const double v = f(g.node_position(n));
                            if (!std::isfinite(v)) throw Error("field evaluation is not finite");
                            values[n] = v;
                        }
                    });
    return g;
}

DeformableGrid with_random_displacement(const ScalarGrid& grid, double fraction, std::uint64_t seed) {
    DeformableGrid out(grid);
    out.displacement.resize(grid.node_count());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-fraction, fraction);
    const Vec3 h = grid.spacing();
    for (auto& d : out.displacement) {
        const double x = U(rng), y = U(rng), z = U(rng);
        d = Vec3(x * h.x(), y * h.y(), z * h.z());
    }
    return clamp_displacements(out);
}

}  // namespace dmc
