#include "diffmc/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "diffmc/binary_io.hpp"
#include "diffmc/parallel.hpp"

namespace dmc {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error("camera image size must be positive");
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) || !std::isfinite(cy))
        throw Error("camera parameters must be finite");
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-10 || rotation.determinant() < 0.0)
        throw Error("camera rotation is not a proper orthonormal matrix (deviation " + std::to_string(ortho) + ")");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_y_degrees) {
    if (!(fov_y_degrees > 0.0 && fov_y_degrees < 180.0)) throw Error("field of view must lie in (0, 180) degrees");
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up);
    if (!(right.norm() > 1e-12)) throw Error("look_at: up vector is parallel to the view direction");
    Camera cam;
    cam.rotation.row(0) = right.normalized();
    cam.rotation.row(2) = forward;
    cam.rotation.row(1) = forward.cross(cam.rotation.row(0).transpose());
    cam.translation = -(cam.rotation * eye);
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y_degrees * std::numbers::pi / 180.0);
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.validate();
    return cam;
}

nlohmann::json to_json(const Camera& cam) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    auto rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2)});
    j["rotation"] = rows;
    j["translation"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};
    return j;
}

Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    try {
        if (j.contains("eye")) {
            const auto v = [&](const char* key) {
                const auto& a = j.at(key);
                return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
            };
            return Camera::look_at(v("eye"), v("target"), j.contains("up") ? v("up") : Vec3(0, 1, 0),
                                   j.at("width").get<int>(), j.at("height").get<int>(),
                                   j.value("fov_y_degrees", 45.0));
        }
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cam.rotation(r, c) = j.at("rotation").at(r).at(c).get<double>();
        for (int c = 0; c < 3; ++c) cam.translation[c] = j.at("translation").at(c).get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid camera description: ") + e.what());
    }
    cam.validate();
    return cam;
}

Vec3 pixel_ray(const Camera& cam, int u, int v) {
    return Vec3((u + 0.5 - cam.cx) / cam.fx, (v + 0.5 - cam.cy) / cam.fy, 1.0);
}

namespace {

constexpr int kBandRows = 16;

struct CamTriangle {
    Vec3 p[3];
    Vec3 normal;
    double plane = 0.0;  // normal . p0
};

// Hit depth of `ray` (z = 1) with the triangle, or NaN when the line misses
// it or the hit lies behind the camera. Edge-on triangles never hit.
double hit_depth(const CamTriangle& t, const Vec3& ray) {
    const double e0 = t.p[1].cross(t.p[2]).dot(ray);
    const double e1 = t.p[2].cross(t.p[0]).dot(ray);
    const double e2 = t.p[0].cross(t.p[1]).dot(ray);
    const bool nonneg = e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0;
    const bool nonpos = e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0;
    if (!nonneg && !nonpos) return std::numeric_limits<double>::quiet_NaN();
    const double denom = t.normal.dot(ray);
    if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double z = t.plane / denom;
    return z > 0.0 ? z : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

DepthMap render_depth(const IndexedMesh& mesh, const Camera& cam, int threads) {
    cam.validate();
    mesh.check_indices();
    DepthMap map;
    map.width = cam.width;
    map.height = cam.height;
    map.depth.assign(map.pixel_count(), 0.0);
    map.visible.assign(map.pixel_count(), 0);
    map.triangle.assign(map.pixel_count(), -1);

    std::vector<Vec3> vc(mesh.vertices.size());
    for (std::size_t v = 0; v < vc.size(); ++v) vc[v] = cam.to_camera(mesh.vertices[v]);

    const int bands = (cam.height + kBandRows - 1) / kBandRows;
    std::vector<CamTriangle> tris(mesh.triangles.size());
    struct Extent {
        int u0, u1, v0, v1;
    };
    std::vector<Extent> extent(mesh.triangles.size(), {0, -1, 0, -1});
    std::vector<std::vector<std::uint32_t>> band_tris(static_cast<std::size_t>(bands));
    for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
        CamTriangle& ct = tris[t];
        for (int k = 0; k < 3; ++k) ct.p[k] = vc[mesh.triangles[t][k]];
        ct.normal = (ct.p[1] - ct.p[0]).cross(ct.p[2] - ct.p[0]);
        ct.plane = ct.normal.dot(ct.p[0]);
        const double zmin = std::min({ct.p[0].z(), ct.p[1].z(), ct.p[2].z()});
        const double zmax = std::max({ct.p[0].z(), ct.p[1].z(), ct.p[2].z()});
        if (!(zmax > 0.0)) continue;
        Extent e{0, cam.width - 1, 0, cam.height - 1};
        if (zmin > 0.0) {
            double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
            for (const auto& p : ct.p) {
                const double x = cam.fx * p.x() / p.z() + cam.cx, y = cam.fy * p.y() / p.z() + cam.cy;
                xlo = std::min(xlo, x);
                xhi = std::max(xhi, x);
                ylo = std::min(ylo, y);
                yhi = std::max(yhi, y);
            }
            // Pixel centers at u + 0.5; widen by one pixel against rounding.
            const auto clamp_to = [](double x, int hi) {
                return static_cast<int>(std::clamp(x, -1.0, static_cast<double>(hi) + 1.0));
            };
            e.u0 = std::max(0, clamp_to(std::floor(xlo - 0.5), cam.width) - 1);
            e.u1 = std::min(cam.width - 1, clamp_to(std::ceil(xhi - 0.5), cam.width) + 1);
            e.v0 = std::max(0, clamp_to(std::floor(ylo - 0.5), cam.height) - 1);
            e.v1 = std::min(cam.height - 1, clamp_to(std::ceil(yhi - 0.5), cam.height) + 1);
            if (e.u0 > e.u1 || e.v0 > e.v1) continue;
        }
        extent[t] = e;
        for (int b = e.v0 / kBandRows; b <= e.v1 / kBandRows; ++b) band_tris[static_cast<std::size_t>(b)].push_back(t);
    }

    parallel_chunks(static_cast<std::size_t>(bands), static_cast<std::size_t>(bands), threads,
                    [&](std::size_t b, std::size_t, std::size_t) {
        const int row0 = static_cast<int>(b) * kBandRows;
        const int row1 = std::min(cam.height, row0 + kBandRows);
        for (std::uint32_t t : band_tris[b]) {
            const Extent& e = extent[t];
            for (int v = std::max(row0, e.v0); v < std::min(row1, e.v1 + 1); ++v) {
                for (int u = e.u0; u <= e.u1; ++u) {
                    const double z = hit_depth(tris[t], pixel_ray(cam, u, v));
                    if (std::isnan(z)) continue;
                    const std::size_t px = static_cast<std::size_t>(v) * static_cast<std::size_t>(cam.width) +
                                           static_cast<std::size_t>(u);
                    if (!map.visible[px] || z < map.depth[px] || (z == map.depth[px] && t < map.triangle[px])) {
                        map.visible[px] = 1;
                        map.depth[px] = z;
                        map.triangle[px] = t;
                    }
                }
            }
        }
    });
    return map;
}

DepthHitDerivative depth_hit_derivative(const IndexedMesh& mesh, const Camera& cam, std::uint32_t t,
                                        const Vec3& ray) {
    std::array<Vec3, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = cam.to_camera(mesh.vertices[mesh.triangles.at(t)[k]]);
    const Vec3 n = (p[1] - p[0]).cross(p[2] - p[0]);
    const double denom = n.dot(ray);
    if (denom == 0.0) throw Error("depth derivative of an edge-on triangle");
    std::array<double, 3> w{p[1].cross(p[2]).dot(ray), p[2].cross(p[0]).dot(ray), p[0].cross(p[1]).dot(ray)};
    const double sum = w[0] + w[1] + w[2];
    DepthHitDerivative d;
    for (int k = 0; k < 3; ++k) {
        d.barycentric[k] = w[k] / sum;
        d.d_depth[k] = cam.rotation.transpose() * (d.barycentric[k] / denom * n);
    }
    return d;
}

void write_depth_map(const DepthMap& map, const Camera& cam, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (std::size_t p = 0; p < map.pixel_count(); ++p)
        write_le(out, static_cast<float>(map.visible[p] ? map.depth[p] : 0.0));
    if (!out) throw Error("failed writing " + path.string());
    nlohmann::json j;
    j["format"] = "diffmc-depth";
    j["version"] = 1;
    j["width"] = map.width;
    j["height"] = map.height;
    j["precision"] = "float32";
    j["endianness"] = "little";
    j["layout"] = "row-major, top row first";
    j["invisible"] = 0.0;
    j["depth"] = "camera-space z";
    j["data"] = path.filename().string();
    j["camera"] = to_json(cam);
    std::ofstream side(path.string() + ".json");
    if (!side) throw Error("cannot open " + path.string() + ".json for writing");
    side << j.dump(2) << '\n';
}

DepthMap read_depth_map(const std::filesystem::path& path, Camera* cam) {
    std::ifstream side(path.string() + ".json");
    if (!side) throw Error("missing depth sidecar " + path.string() + ".json");
    nlohmann::json j;
    try {
        side >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid depth sidecar: " + std::string(e.what()));
    }
    DepthMap map;
    map.width = j.at("width").get<int>();
    map.height = j.at("height").get<int>();
    if (map.width <= 0 || map.height <= 0) throw Error("depth map dimensions must be positive");
    if (cam && j.contains("camera")) *cam = camera_from_json(j.at("camera"));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const auto size = std::filesystem::file_size(path);
    if (size != map.pixel_count() * sizeof(float))
        throw Error("depth file " + path.string() + " has " + std::to_string(size) + " bytes, expected " +
                    std::to_string(map.pixel_count() * sizeof(float)));
    map.depth.resize(map.pixel_count());
    map.visible.resize(map.pixel_count());
    for (std::size_t p = 0; p < map.pixel_count(); ++p) {
        const float z = read_le<float>(in);
        map.depth[p] = z;
        map.visible[p] = z > 0.0f ? 1 : 0;
    }
    return map;
}

double vsa(const DepthMap& a, const DepthMap& b, double tau) {
    if (a.width != b.width || a.height != b.height)
        throw Error("vsa: depth maps differ in size (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("vsa: tau must be positive and finite");
    std::size_t uni = 0, agree = 0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        const bool va = a.visible[p], vb = b.visible[p];
        if (!va && !vb) continue;
        ++uni;
        if (va && vb && std::abs(a.depth[p] - b.depth[p]) < tau) ++agree;
    }
    return uni == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(uni);
}

PointIndex::PointIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw Error("point index needs at least one point");
    if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) throw Error("too many points");
    Vec3 hi = points_[0];
    lo_ = points_[0];
    for (const auto& p : points_) {
        if (!p.allFinite()) throw Error("point index: non-finite point");
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = hi - lo_;
    const double largest = ext.maxCoeff();
    const auto n = static_cast<double>(points_.size());
    if (largest > 0.0) {
        double volume = 1.0;
        int used = 0;
        for (int a = 0; a < 3; ++a)
            if (ext[a] > 1e-9 * largest) {
                volume *= ext[a];
                ++used;
            }
        cell_ = std::pow(volume / n, 1.0 / used);
        cell_ = std::max(cell_, largest / 256.0);
    }
    for (int a = 0; a < 3; ++a) dims_[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(ext[a] / cell_)) + 1);

    const auto cell_of = [&](const Vec3& p) {
        Index3 c;
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
        return static_cast<std::size_t>(c.x() + dims_.x() * (c.y() + dims_.y() * c.z()));
    };
    const auto cells = static_cast<std::size_t>(dims_.prod());
    start_.assign(cells + 1, 0);
    std::vector<std::size_t> owner(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        owner[i] = cell_of(points_[i]);
        ++start_[owner[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    items_.resize(points_.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) items_[fill[owner[i]]++] = static_cast<std::uint32_t>(i);
}

PointIndex::Hit PointIndex::nearest(const Vec3& q) const {
    Index3 c;
    for (int a = 0; a < 3; ++a)
        c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((q[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    Hit best{0, std::numeric_limits<double>::infinity()};
    const std::int64_t max_ring = dims_.maxCoeff();
    for (std::int64_t r = 0; r <= max_ring; ++r) {
        for (std::int64_t k = c.z() - r; k <= c.z() + r; ++k) {
            if (k < 0 || k >= dims_.z()) continue;
            for (std::int64_t j = c.y() - r; j <= c.y() + r; ++j) {
                if (j < 0 || j >= dims_.y()) continue;
                const bool shell = std::abs(k - c.z()) == r || std::abs(j - c.y()) == r;
                for (std::int64_t i = c.x() - r; i <= c.x() + r; ++i) {
                    if (i < 0 || i >= dims_.x()) continue;
                    if (!shell && std::abs(i - c.x()) != r) continue;
                    const auto cell = static_cast<std::size_t>(i + dims_.x() * (j + dims_.y() * k));
                    for (std::uint32_t s = start_[cell]; s < start_[cell + 1]; ++s) {
                        const std::uint32_t idx = items_[s];
                        const double d2 = (points_[idx] - q).squaredNorm();
                        if (d2 < best.distance_squared || (d2 == best.distance_squared && idx < best.index))
                            best = {idx, d2};
                    }
                }
            }
        }
        // Unvisited cells are at least r whole cells away along some axis.
        const double reach = static_cast<double>(r) * cell_;
        if (best.distance_squared < reach * reach) break;
    }
    return best;
}

namespace {

double mean_nearest(const PointIndex& index, std::span<const Vec3> queries) {
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (queries.size() + kChunk - 1) / kChunk;
    std::vector<double> partial(chunks, 0.0);
    parallel_chunks(queries.size(), chunks, 0, [&](std::size_t c, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) partial[c] += index.nearest(queries[i]).distance_squared;
    });
    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum / static_cast<double>(queries.size());
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw Error("chamfer: point sets must be non-empty");
    const PointIndex ia(a), ib(b);
    return mean_nearest(ib, a) + mean_nearest(ia, b);
}

double chamfer_brute_force(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw Error("chamfer: point sets must be non-empty");
    const auto one_way = [](std::span<const Vec3> from, std::span<const Vec3> to) {
        double sum = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    return one_way(a, b) + one_way(b, a);
}

DeviationStats surface_deviation(const IndexedMesh& mesh, const AnalyticField& field, double offset) {
    if (field.is_warped()) throw Error("surface_deviation needs an unwarped distance field");
    std::vector<double> d(mesh.vertices.size());
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = field.sdf(mesh.vertices[v]) - offset;
    return deviation_stats(d);
}

}  // namespace dmc
