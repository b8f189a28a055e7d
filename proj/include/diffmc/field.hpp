#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffmc/types.hpp"

namespace dmc {

/// What the scalars stored in a grid mean. Only affects IO and validation.
enum class ValueSemantics { Sdf, Density, OpacityMinusThreshold };

std::string_view to_string(ValueSemantics s);
ValueSemantics semantics_from_string(std::string_view s);

/// Node-centred regular lattice of scalars. Node (i, j, k) sits at
/// origin + (i, j, k) * spacing and is stored at i + nx * (j + ny * k).
class ScalarGrid {
public:
    ScalarGrid() = default;
    ScalarGrid(Index3 dims, Vec3 origin, Vec3 spacing, std::vector<double> values,
               ValueSemantics semantics = ValueSemantics::Sdf);

    /// Grid of constant value.
    static ScalarGrid filled(Index3 dims, Vec3 origin, Vec3 spacing, double value);

    const Index3& dims() const { return dims_; }
    const Vec3& origin() const { return origin_; }
    const Vec3& spacing() const { return spacing_; }
    ValueSemantics semantics() const { return semantics_; }
    void set_semantics(ValueSemantics s) { semantics_ = s; }

    std::size_t node_count() const { return values_.size(); }
    std::size_t cell_count() const {
        return static_cast<std::size_t>((dims_.x() - 1) * (dims_.y() - 1) * (dims_.z() - 1));
    }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return static_cast<std::size_t>(i + dims_.x() * (j + dims_.y() * k));
    }
    Index3 coords(std::size_t node) const;
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const { return values_[index(i, j, k)]; }
    Vec3 node_position(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return origin_ + Vec3(static_cast<double>(i) * spacing_.x(), static_cast<double>(j) * spacing_.y(),
                              static_cast<double>(k) * spacing_.z());
    }
    Vec3 node_position(std::size_t node) const {
        const Index3 c = coords(node);
        return node_position(c.x(), c.y(), c.z());
    }
    bool on_boundary(std::size_t node) const;

    /// Throws when any value is NaN or infinite.
    void check_finite() const;

private:
    Index3 dims_ = Index3::Zero();
    Vec3 origin_ = Vec3::Zero();
    Vec3 spacing_ = Vec3::Ones();
    std::vector<double> values_;
    ValueSemantics semantics_ = ValueSemantics::Sdf;
};

/// Scalar grid plus a free per-node displacement. An empty displacement
/// vector stands for all zeros.
struct DeformableGrid {
    ScalarGrid base;
    std::vector<Vec3> displacement;

    DeformableGrid() = default;
    explicit DeformableGrid(ScalarGrid g) : base(std::move(g)) {}
    DeformableGrid(ScalarGrid g, std::vector<Vec3> d);

    bool has_displacement() const { return !displacement.empty(); }
    Vec3 displacement_at(std::size_t node) const {
        return displacement.empty() ? Vec3::Zero() : displacement[node];
    }
    Vec3 position(std::size_t node) const { return base.node_position(node) + displacement_at(node); }

    /// Throws unless every displacement component is strictly below half a cell.
    void check_displacements() const;
};

/// Exact analytic scalar fields used as fixtures and ground truth.
class AnalyticField {
public:
    enum class Kind { Sphere, Box, Torus, Plane, Union };

    static AnalyticField sphere(const Vec3& center, double radius);
    static AnalyticField box(const Vec3& center, const Vec3& half_extents);
    /// Torus around the z axis through `center`.
    static AnalyticField torus(const Vec3& center, double major_radius, double minor_radius);
    /// Signed distance dot(n, x) - offset with n normalized.
    static AnalyticField plane(const Vec3& normal, double offset);
    static AnalyticField union_of(std::vector<AnalyticField> parts);

    Kind kind() const { return kind_; }
    /// Returns a copy whose values pass through exp(s) - 1 - shift.
    AnalyticField warped(double shift) const;
    bool is_warped() const { return warped_; }
    double warp_shift() const { return shift_; }
    /// True when values are exact signed distances.
    bool is_sdf() const { return !warped_; }

    double sdf(const Vec3& p) const;
    double operator()(const Vec3& p) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Sphere;
    Vec3 a_ = Vec3::Zero();
    Vec3 b_ = Vec3::Zero();
    double r0_ = 0.0;
    double r1_ = 0.0;
    std::vector<AnalyticField> parts_;
    bool warped_ = false;
    double shift_ = 0.0;
};

/// Largest value produced by the exponential warp; larger results saturate here.
double warp_cap();

/// exp(s) - 1 - shift with saturation at warp_cap(). Sets *saturated when capped.
double warp_value(double s, double shift, bool* saturated = nullptr);

/// Samples `field` at every node. Throws on a non-finite evaluation.
ScalarGrid sample_field_to_grid(const AnalyticField& field, Index3 dims, Vec3 origin, Vec3 spacing,
                                int threads = 0);

/// Unit-cube grid with `res` nodes per axis: origin 0, spacing 1 / (res - 1).
ScalarGrid sample_unit_cube(const AnalyticField& field, int res, int threads = 0);

/// Iso level whose linear interpolant between the two node layers bracketing
/// `coordinate` along `axis` crosses exactly at `coordinate`. Intended for
/// fields that vary only along `axis`; reads the node column through the
/// grid origin.
double layer_crossing_iso(const ScalarGrid& grid, int axis, double coordinate);

struct WarpResult {
    ScalarGrid grid;
    std::size_t saturated_nodes = 0;
};

WarpResult apply_nonlinear_warp(const ScalarGrid& grid, double shift);

/// Maps densities to alpha - t with alpha = 1 - exp(-sigma * step).
ScalarGrid density_to_opacity(const ScalarGrid& densities, double step, double threshold);

struct RaySample {
    double sigma = 0.0;
    double delta = 0.0;
    Vec3 color = Vec3::Zero();
};

struct RayResult {
    Vec3 color = Vec3::Zero();
    double transmittance = 1.0;  ///< transmittance left after the last sample
    std::vector<double> weights;  ///< T_i * (1 - exp(-sigma_i delta_i))
};

/// Front-to-back emission-absorption quadrature along one ray.
RayResult volume_render_ray(std::span<const RaySample> samples);

}  // namespace dmc
