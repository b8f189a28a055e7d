#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "diffmc/field.hpp"
#include "diffmc/mesh.hpp"
#include "diffmc/stats.hpp"

namespace dmc {

/// Pinhole camera. World points map to camera space by x_c = R x_w + t;
/// the camera looks along +z with image x to the right and y down. Pixel
/// (u, v) has its center at (u + 0.5, v + 0.5) in image coordinates.
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    /// Throws unless fx, fy > 0, the image is non-empty and R is
    /// orthonormal with det +1 to 1e-10.
    void validate() const;

    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }

    /// Camera at `eye` looking at `target`, vertical field of view in degrees.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                          double fov_y_degrees);
};

nlohmann::json to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);

/// Camera-space depth per pixel, row-major from the top-left. Invisible
/// pixels hold depth 0 and triangle -1.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> visible;
    std::vector<std::int64_t> triangle;  ///< hit triangle, empty for loaded maps

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

/// Z-buffer rasterization sampled at pixel centers. The nearest hit with
/// positive depth wins; equal depths go to the smaller triangle id.
DepthMap render_depth(const IndexedMesh& mesh, const Camera& cam, int threads = 0);

/// Ray through the center of pixel (u, v), in camera space, with z = 1.
Vec3 pixel_ray(const Camera& cam, int u, int v);

/// Barycentric coordinates of the hit of `ray` (camera space, z = 1) with
/// triangle `t`, and the partial derivatives of the hit depth with respect to
/// the triangle's world-space vertex positions.
struct DepthHitDerivative {
    std::array<double, 3> barycentric{};
    std::array<Vec3, 3> d_depth{};
};
DepthHitDerivative depth_hit_derivative(const IndexedMesh& mesh, const Camera& cam, std::uint32_t t,
                                        const Vec3& ray);

/// Raw little-endian float32 depths plus a JSON sidecar `<path>.json`
/// holding width, height and the camera.
void write_depth_map(const DepthMap& map, const Camera& cam, const std::filesystem::path& path);
DepthMap read_depth_map(const std::filesystem::path& path, Camera* cam = nullptr);

/// Visible surface agreement: fraction of pixels in the union of both masks
/// that are visible in both and agree in depth to within tau. An empty
/// union gives 1.
double vsa(const DepthMap& a, const DepthMap& b, double tau);

/// Nearest-neighbour queries over a fixed point set through a uniform grid.
class PointIndex {
public:
    explicit PointIndex(std::span<const Vec3> points);

    struct Hit {
        std::uint32_t index = 0;
        double distance_squared = 0.0;
    };
    /// Nearest point; ties go to the smaller index.
    Hit nearest(const Vec3& q) const;
    std::size_t size() const { return points_.size(); }

private:
    std::vector<Vec3> points_;
    Vec3 lo_ = Vec3::Zero();
    double cell_ = 1.0;
    Index3 dims_ = Index3::Ones();
    std::vector<std::uint32_t> start_;
    std::vector<std::uint32_t> items_;
};

/// mean_a min_b |a - b|^2 + mean_b min_a |b - a|^2.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
double chamfer_brute_force(std::span<const Vec3> a, std::span<const Vec3> b);

/// Signed distance of every vertex to the zero set of an unwarped field,
/// minus `offset`.
DeviationStats surface_deviation(const IndexedMesh& mesh, const AnalyticField& field, double offset = 0.0);

}  // namespace dmc
