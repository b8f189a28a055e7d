#include "diffmc/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "diffmc/parallel.hpp"

namespace dmc {

std::string_view to_string(ValueSemantics s) {
    switch (s) {
    case ValueSemantics::Sdf: return "sdf";
    case ValueSemantics::Density: return "density";
    case ValueSemantics::OpacityMinusThreshold: return "opacity-minus-threshold";
    }
    return "sdf";
}

ValueSemantics semantics_from_string(std::string_view s) {
    if (s == "sdf") return ValueSemantics::Sdf;
    if (s == "density") return ValueSemantics::Density;
    if (s == "opacity-minus-threshold") return ValueSemantics::OpacityMinusThreshold;
    throw Error("unknown value semantics '" + std::string(s) + "'");
}

ScalarGrid::ScalarGrid(Index3 dims, Vec3 origin, Vec3 spacing, std::vector<double> values,
                       ValueSemantics semantics)
    : dims_(dims), origin_(origin), spacing_(spacing), values_(std::move(values)), semantics_(semantics) {
    if (dims.minCoeff() < 2) throw Error("grid dims must be >= 2 on every axis");
    if (!(spacing.minCoeff() > 0.0) || !spacing.allFinite()) throw Error("grid spacing must be positive");
    if (!origin.allFinite()) throw Error("grid origin must be finite");
    const auto expected = static_cast<std::size_t>(dims.x() * dims.y() * dims.z());
    if (values_.size() != expected) {
        std::ostringstream msg;
        msg << "grid expects " << expected << " values, got " << values_.size();
        throw Error(msg.str());
    }
}

ScalarGrid ScalarGrid::filled(Index3 dims, Vec3 origin, Vec3 spacing, double value) {
    if (dims.minCoeff() < 2) throw Error("grid dims must be >= 2 on every axis");
    return ScalarGrid(dims, origin, spacing,
                      std::vector<double>(static_cast<std::size_t>(dims.prod()), value));
}

Index3 ScalarGrid::coords(std::size_t node) const {
    const auto n = static_cast<std::int64_t>(node);
    return Index3(n % dims_.x(), (n / dims_.x()) % dims_.y(), n / (dims_.x() * dims_.y()));
}

bool ScalarGrid::on_boundary(std::size_t node) const {
    const Index3 c = coords(node);
    for (int a = 0; a < 3; ++a)
        if (c[a] == 0 || c[a] == dims_[a] - 1) return true;
    return false;
}

void ScalarGrid::check_finite() const {
    for (std::size_t n = 0; n < values_.size(); ++n) {
        if (!std::isfinite(values_[n])) {
            const Index3 c = coords(n);
            std::ostringstream msg;
            msg << "non-finite grid value at node (" << c.x() << ", " << c.y() << ", " << c.z() << ")";
            throw Error(msg.str());
        }
    }
}

DeformableGrid::DeformableGrid(ScalarGrid g, std::vector<Vec3> d) : base(std::move(g)), displacement(std::move(d)) {
    if (!displacement.empty() && displacement.size() != base.node_count())
        throw Error("displacement count does not match grid node count");
}

void DeformableGrid::check_displacements() const {
    if (displacement.empty()) return;
    if (displacement.size() != base.node_count()) throw Error("displacement count does not match grid node count");
    const Vec3 limit = 0.5 * base.spacing();
    for (std::size_t n = 0; n < displacement.size(); ++n) {
        for (int a = 0; a < 3; ++a) {
            const double d = displacement[n][a];
            if (!std::isfinite(d) || std::abs(d) >= limit[a]) {
                std::ostringstream msg;
                msg << "displacement of node " << n << " exceeds half a cell on axis " << a;
                throw Error(msg.str());
            }
        }
    }
}

// --- analytic fields -------------------------------------------------------

AnalyticField AnalyticField::sphere(const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw Error("sphere radius must be positive");
    AnalyticField f;
    f.kind_ = Kind::Sphere;
    f.a_ = center;
    f.r0_ = radius;
    return f;
}

AnalyticField AnalyticField::box(const Vec3& center, const Vec3& half_extents) {
    if (!(half_extents.minCoeff() > 0.0)) throw Error("box half extents must be positive");
    AnalyticField f;
    f.kind_ = Kind::Box;
    f.a_ = center;
    f.b_ = half_extents;
    return f;
}

AnalyticField AnalyticField::torus(const Vec3& center, double major_radius, double minor_radius) {
    if (!(minor_radius > 0.0) || !(major_radius > minor_radius)) throw Error("torus needs major > minor > 0");
    AnalyticField f;
    f.kind_ = Kind::Torus;
    f.a_ = center;
    f.r0_ = major_radius;
    f.r1_ = minor_radius;
    return f;
}

AnalyticField AnalyticField::plane(const Vec3& normal, double offset) {
    const double len = normal.norm();
    if (!(len > 0.0)) throw Error("plane normal must be nonzero");
    AnalyticField f;
    f.kind_ = Kind::Plane;
    f.a_ = normal / len;
    f.r0_ = offset;
    return f;
}

AnalyticField AnalyticField::union_of(std::vector<AnalyticField> parts) {
    if (parts.empty()) throw Error("union needs at least one part");
    for (const auto& p : parts)
        if (p.warped_) throw Error("union parts must be unwarped");
    AnalyticField f;
    f.kind_ = Kind::Union;
    f.parts_ = std::move(parts);
    return f;
}

AnalyticField AnalyticField::warped(double shift) const {
    if (warped_) throw Error("field is already warped");
    AnalyticField f = *this;
    f.warped_ = true;
    f.shift_ = shift;
    return f;
}

double AnalyticField::sdf(const Vec3& p) const {
    switch (kind_) {
    case Kind::Sphere: return (p - a_).norm() - r0_;
    case Kind::Box: {
        const Vec3 q = (p - a_).cwiseAbs() - b_;
        return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case Kind::Torus: {
        const Vec3 d = p - a_;
        const double ring = std::hypot(d.x(), d.y()) - r0_;
        return std::hypot(ring, d.z()) - r1_;
    }
    case Kind::Plane: return a_.dot(p) - r0_;
    case Kind::Union: {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& part : parts_) v = std::min(v, part.sdf(p));
        return v;
    }
    }
    return 0.0;
}

double AnalyticField::operator()(const Vec3& p) const {
    const double s = sdf(p);
    return warped_ ? warp_value(s, shift_) : s;
}

std::string AnalyticField::describe() const {
    std::ostringstream out;
    switch (kind_) {
    case Kind::Sphere: out << "sphere(c=" << a_.transpose() << ", r=" << r0_ << ")"; break;
    case Kind::Box: out << "box(c=" << a_.transpose() << ", h=" << b_.transpose() << ")"; break;
    case Kind::Torus: out << "torus(c=" << a_.transpose() << ", R=" << r0_ << ", r=" << r1_ << ")"; break;
    case Kind::Plane: out << "plane(n=" << a_.transpose() << ", d=" << r0_ << ")"; break;
    case Kind::Union:
        out << "union(";
        for (std::size_t i = 0; i < parts_.size(); ++i) out << (i ? ", " : "") << parts_[i].describe();
        out << ")";
        break;
    }
    if (warped_) out << " warped(" << shift_ << ")";
    return out.str();
}

// --- transforms ------------------------------------------------------------

double warp_cap() { return std::numeric_limits<double>::max() / 2.0; }

double warp_value(double s, double shift, bool* saturated) {
    const double cap = warp_cap();
    // exp(s) is finite up to ~709.78; anything past log(cap) saturates.
    static const double log_cap = std::log(cap);
    double v;
    bool sat = false;
    if (s >= log_cap) {
        v = cap;
        sat = true;
    } else {
        v = std::expm1(s) - shift;
        if (v > cap) {
            v = cap;
            sat = true;
        }
    }
    if (saturated) *saturated = sat;
    return v;
}

ScalarGrid sample_field_to_grid(const AnalyticField& field, Index3 dims, Vec3 origin, Vec3 spacing,
                                int threads) {
    ScalarGrid grid = ScalarGrid::filled(dims, origin, spacing, 0.0);
    grid.set_semantics(field.is_sdf() ? ValueSemantics::Sdf : ValueSemantics::OpacityMinusThreshold);
    auto values = grid.values();
    const auto slabs = static_cast<std::size_t>(dims.z());
    parallel_chunks(slabs, slabs, threads, [&](std::size_t, std::size_t k0, std::size_t k1) {
        for (auto k = static_cast<std::int64_t>(k0); k < static_cast<std::int64_t>(k1); ++k)
            for (std::int64_t j = 0; j < dims.y(); ++j)
                for (std::int64_t i = 0; i < dims.x(); ++i)
                    values[grid.index(i, j, k)] = field(grid.node_position(i, j, k));
    });
    for (std::size_t n = 0; n < values.size(); ++n) {
        if (!std::isfinite(values[n])) {
            std::ostringstream msg;
            msg << "field " << field.describe() << " is non-finite at " << grid.node_position(n).transpose();
            throw Error(msg.str());
        }
    }
    return grid;
}

ScalarGrid sample_unit_cube(const AnalyticField& field, int res, int threads) {
    if (res < 2) throw Error("resolution must be >= 2");
    const double h = 1.0 / static_cast<double>(res - 1);
    return sample_field_to_grid(field, Index3::Constant(res), Vec3::Zero(), Vec3::Constant(h), threads);
}

double layer_crossing_iso(const ScalarGrid& grid, int axis, double coordinate) {
    if (axis < 0 || axis > 2) throw Error("axis must be 0, 1 or 2");
    const double t = (coordinate - grid.origin()[axis]) / grid.spacing()[axis];
    const auto last = grid.dims()[axis] - 1;
    if (!(t >= 0.0 && t <= static_cast<double>(last))) throw Error("coordinate lies outside the grid");
    const auto k = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(t)), last - 1);
    const double frac = t - static_cast<double>(k);
    Index3 lo = Index3::Zero(), hi = Index3::Zero();
    lo[axis] = k;
    hi[axis] = k + 1;
    const double a = grid.at(lo.x(), lo.y(), lo.z()), b = grid.at(hi.x(), hi.y(), hi.z());
    return (1.0 - frac) * a + frac * b;
}

WarpResult apply_nonlinear_warp(const ScalarGrid& grid, double shift) {
    WarpResult out{grid, 0};
    for (double& v : out.grid.values()) {
        bool sat = false;
        v = warp_value(v, shift, &sat);
        out.saturated_nodes += sat ? 1 : 0;
    }
    out.grid.set_semantics(ValueSemantics::OpacityMinusThreshold);
    return out;
}

ScalarGrid density_to_opacity(const ScalarGrid& densities, double step, double threshold) {
    if (!(step > 0.0)) throw Error("opacity step size must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("opacity threshold must lie in (0, 1)");
    ScalarGrid out = densities;
    auto values = out.values();
    for (std::size_t n = 0; n < values.size(); ++n) {
        const double sigma = values[n];
        if (!(sigma >= 0.0)) {
            const Index3 c = densities.coords(n);
            std::ostringstream msg;
            msg << "negative or invalid density " << sigma << " at node (" << c.x() << ", " << c.y() << ", "
                << c.z() << ")";
            throw Error(msg.str());
        }
        values[n] = -std::expm1(-sigma * step) - threshold;
    }
    out.set_semantics(ValueSemantics::OpacityMinusThreshold);
    return out;
}

RayResult volume_render_ray(std::span<const RaySample> samples) {
    RayResult out;
    out.weights.reserve(samples.size());
    double optical_depth = 0.0;
    for (const auto& s : samples) {
        if (!(s.sigma >= 0.0) || !(s.delta > 0.0)) throw Error("ray sample needs sigma >= 0 and delta > 0");
        if (!(s.color.minCoeff() >= 0.0 && s.color.maxCoeff() <= 1.0)) throw Error("ray sample color outside [0,1]");
        const double tau = s.sigma * s.delta;
        const double transmittance = std::exp(-optical_depth);
        const double w = transmittance * -std::expm1(-tau);
        out.weights.push_back(w);
        out.color += w * s.color;
        optical_depth += tau;
    }
    out.transmittance = std::exp(-optical_depth);
    return out;
}

}  // namespace dmc
