#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "diffmc/diffmc.hpp"
#include "diffmc/field.hpp"
#include "diffmc/mesh.hpp"
#include "diffmc/stats.hpp"

namespace dmc {

/// Tetrahedral decomposition of one cube: each face is split along the
/// diagonal through its even-parity corners and coned to the cell center.
/// Local ids 0..7 are cube corners, 8 is the center. Tets are positively
/// oriented in the reference cube.
struct TetSplit {
    std::array<std::array<int, 4>, 12> tets;
};

/// Split for a cell whose lower corner has parity (i + j + k) & 1.
const TetSplit& tet_split(int parity);

struct MtOptions {
    bool closed = true;
};

/// Center position of every cell (mean of its displaced corners), x-fastest
/// over the (nx-1)(ny-1)(nz-1) cells.
std::vector<Vec3> cell_centers(const DeformableGrid& grid);

/// Field sampled at cell_centers(grid).
std::vector<double> sample_cell_centers(const AnalyticField& field, const DeformableGrid& grid);

/// Marching tetrahedra over the 12-tet split. `center_values` holds one
/// value per cell; when empty, each center takes the mean of its corners.
/// Same iso convention, boundary closing, exact-iso perturbation and edge
/// clamp as extract(). Provenance ids >= node_count refer to cell centers
/// (node_count + cell index).
IndexedMesh extract_mt(const DeformableGrid& grid, double iso, std::span<const double> center_values = {},
                       const MtOptions& options = {});

// 2D contouring demonstrator.

using Vec2 = Eigen::Vector2d;

/// Line n.x = offset or circle, optionally warped by exp(s) - 1 - shift.
struct Field2D {
    enum class Kind { Line, Circle };
    Kind kind = Kind::Line;
    Vec2 normal{1.0, 0.0};
    double offset = 0.0;
    Vec2 center{0.5, 0.5};
    double radius = 0.25;
    bool warp = false;
    double shift = 0.0;

    static Field2D line(const Vec2& normal, double offset);
    static Field2D circle(const Vec2& center, double radius);
    Field2D warped(double shift) const;

    double sdf(const Vec2& p) const;
    double operator()(const Vec2& p) const;
};

enum class Demo2dMode { Squares, Triangles };
Demo2dMode demo2d_mode_from_string(const std::string& s);
std::string to_string(Demo2dMode mode);

struct Demo2dResult {
    std::vector<std::vector<Vec2>> polylines;  ///< closed loops repeat their first point
    std::vector<Vec2> vertices;
    std::vector<double> deviation;  ///< signed distance of each vertex to the true zero set
    DeviationStats stats;
};

/// Contours `field` at `iso` on a res x res node lattice over the unit
/// square. Triangles mode splits each square into four triangles around a
/// center sampled from the field.
Demo2dResult demo_2d(const Field2D& field, Demo2dMode mode, int res, double iso = 0.0);

void write_svg(const Demo2dResult& result, const std::filesystem::path& path, int res);
void write_deviation_csv(const Demo2dResult& result, const std::filesystem::path& path);

}  // namespace dmc
