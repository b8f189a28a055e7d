#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffmc/field.hpp"

namespace dmc {

/// Field from a JSON object such as
///   {"kind": "sphere", "center": [0.5, 0.5, 0.5], "radius": 0.35}
///   {"kind": "box", "center": [...], "half_extents": [...]}
///   {"kind": "torus", "center": [...], "major_radius": 0.3, "minor_radius": 0.12}
///   {"kind": "plane", "normal": [0, 0, 1], "offset": 0.5}
///   {"kind": "union", "parts": [...]}
/// An optional "warp" key applies exp(s) - 1 - warp.
AnalyticField field_from_json(const nlohmann::json& j);

/// Built-in names (sphere, box, torus, plane, union) or a path to a JSON file.
AnalyticField parse_field(const std::string& name_or_path);
std::vector<std::string> builtin_field_names();

using FieldFn = std::function<double(const Vec3&)>;

struct Fixture {
    std::string name;
    FieldFn eval;
};

/// Seeded shapes cycling through sphere, box, torus, union and a smooth
/// random blob field, all inside the unit cube.
std::vector<Fixture> certification_fixtures(std::size_t count, std::uint64_t seed);

/// Unit-cube sampling of an arbitrary function, `res` nodes per axis.
ScalarGrid sample_function(const FieldFn& f, int res, int threads = 0);

/// Displacements uniform in [-fraction, fraction] * spacing per component,
/// then clamped below half a cell.
DeformableGrid with_random_displacement(const ScalarGrid& grid, double fraction, std::uint64_t seed);

}  // namespace dmc
