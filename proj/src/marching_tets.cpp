#include "diffmc/marching_tets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "diffmc/mc_table.hpp"
#include "diffmc/parallel.hpp"
#include "prepare.hpp"

namespace dmc {
namespace {

constexpr int kCenter = 8;

Vec3 reference_position(int local) {
    return local == kCenter ? Vec3(0.5, 0.5, 0.5) : mc::corner_offset(local);
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).cross(c - a).dot(d - a);
}

TetSplit make_split(int parity) {
    TetSplit split{};
    std::size_t n = 0;
    for (const auto& face : mc::faces()) {
        const auto& c = face.corners;
        const bool even02 = ((parity + std::popcount(static_cast<unsigned>(c[0]))) & 1) == 0;
        const std::array<std::array<int, 3>, 2> tris =
            even02 ? std::array<std::array<int, 3>, 2>{{{c[0], c[1], c[2]}, {c[0], c[2], c[3]}}}
                   : std::array<std::array<int, 3>, 2>{{{c[1], c[2], c[3]}, {c[1], c[3], c[0]}}};
        for (const auto& t : tris) {
            std::array<int, 4> tet{t[0], t[1], t[2], kCenter};
            if (signed_volume(reference_position(tet[0]), reference_position(tet[1]), reference_position(tet[2]),
                              reference_position(tet[3])) < 0.0)
                std::swap(tet[0], tet[1]);
            split.tets[n++] = tet;
        }
    }
    return split;
}

// Triangles of a positively oriented tet per inside-configuration, as pairs
// of tet-local vertices per triangle corner, wound toward the outside.
struct TetCase {
    int count = 0;
    std::array<std::array<std::array<int, 2>, 3>, 2> tris{};
};

std::array<TetCase, 16> make_tet_cases() {
    const std::array<Vec3, 4> ref{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    std::array<TetCase, 16> cases{};
    for (int config = 1; config < 15; ++config) {
        std::vector<int> in, out;
        for (int v = 0; v < 4; ++v) ((config >> v) & 1 ? in : out).push_back(v);
        std::vector<std::array<int, 2>> loop;
        if (in.size() == 1) {
            for (int o : out) loop.push_back({in[0], o});
        } else if (out.size() == 1) {
            for (int i : in) loop.push_back({i, out[0]});
        } else {
            loop = {{in[0], out[0]}, {in[0], out[1]}, {in[1], out[1]}, {in[1], out[0]}};
        }
        Vec3 in_centroid = Vec3::Zero(), out_centroid = Vec3::Zero();
        for (int i : in) in_centroid += ref[static_cast<std::size_t>(i)] / static_cast<double>(in.size());
        for (int o : out) out_centroid += ref[static_cast<std::size_t>(o)] / static_cast<double>(out.size());
        const auto mid = [&](const std::array<int, 2>& e) {
            return 0.5 * (ref[static_cast<std::size_t>(e[0])] + ref[static_cast<std::size_t>(e[1])]);
        };
        const Vec3 normal = (mid(loop[1]) - mid(loop[0])).cross(mid(loop[2]) - mid(loop[0]));
        if (normal.dot(out_centroid - in_centroid) < 0.0) std::reverse(loop.begin(), loop.end());
        TetCase& tc = cases[static_cast<std::size_t>(config)];
        tc.tris[0] = {loop[0], loop[1], loop[2]};
        tc.count = 1;
        if (loop.size() == 4) {
            tc.tris[1] = {loop[0], loop[2], loop[3]};
            tc.count = 2;
        }
    }
    return cases;
}

const std::array<TetCase, 16>& tet_cases() {
    static const auto cases = make_tet_cases();
    return cases;
}

std::uint64_t edge_key(std::uint64_t a, std::uint64_t b) {
    if (a > b) std::swap(a, b);
    return (a << 32) | b;
}

/// Edge parameter from unperturbed end values. A crossing edge never has
/// equal raw values, since equal values are nudged alike.
double lattice_crossing(double ra, double rb, double iso) {
    return std::clamp((ra - iso) / (ra - rb), 0.0, 1.0);
}

}  // namespace

const TetSplit& tet_split(int parity) {
    static const std::array<TetSplit, 2> splits{make_split(0), make_split(1)};
    return splits[static_cast<std::size_t>(parity & 1)];
}

std::vector<Vec3> cell_centers(const DeformableGrid& grid) {
    const ScalarGrid& g = grid.base;
    const Index3 d = g.dims();
    std::vector<Vec3> out;
    out.reserve(g.cell_count());
    for (std::int64_t k = 0; k + 1 < d.z(); ++k)
        for (std::int64_t j = 0; j + 1 < d.y(); ++j)
            for (std::int64_t i = 0; i + 1 < d.x(); ++i) {
                Vec3 c = Vec3::Zero();
                for (int corner = 0; corner < 8; ++corner)
                    c += grid.position(g.index(i + mc::corner_bit(corner, 0), j + mc::corner_bit(corner, 1),
                                               k + mc::corner_bit(corner, 2)));
                out.push_back(c / 8.0);
            }
    return out;
}

std::vector<double> sample_cell_centers(const AnalyticField& field, const DeformableGrid& grid) {
    const auto centers = cell_centers(grid);
    std::vector<double> values(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c) {
        values[c] = field(centers[c]);
        if (!std::isfinite(values[c])) throw Error("non-finite field value at cell center " + std::to_string(c));
    }
    return values;
}

IndexedMesh extract_mt(const DeformableGrid& grid, double iso, std::span<const double> center_values,
                       const MtOptions& options) {
    const ScalarGrid& g = grid.base;
    grid.check_displacements();
    detail::PreparedValues prep = detail::prepare_values(g, iso, options.closed);

    const Index3 dims = g.dims();
    const std::int64_t nx = dims.x(), ny = dims.y(), nz = dims.z();
    const std::size_t node_count = g.node_count();
    const std::size_t cell_count = g.cell_count();
    if (!center_values.empty() && center_values.size() != cell_count)
        throw Error("extract_mt: " + std::to_string(center_values.size()) + " center values for " +
                    std::to_string(cell_count) + " cells");
    if (node_count + cell_count >= (std::uint64_t{1} << 32)) throw Error("extract_mt: grid too large");

    // Lattice values: nodes, then cell centers.
    std::vector<double> s = std::move(prep.values);
    s.resize(node_count + cell_count);
    std::array<std::int64_t, 8> corner_offset{};
    for (int c = 0; c < 8; ++c)
        corner_offset[c] = mc::corner_bit(c, 0) + mc::corner_bit(c, 1) * nx + mc::corner_bit(c, 2) * nx * ny;
    {
        std::size_t cell = 0;
        for (std::int64_t k = 0; k + 1 < nz; ++k)
            for (std::int64_t j = 0; j + 1 < ny; ++j)
                for (std::int64_t i = 0; i + 1 < nx; ++i, ++cell) {
                    double v;
                    if (center_values.empty()) {
                        v = 0.0;
                        const auto base = static_cast<std::int64_t>(g.index(i, j, k));
                        for (int c = 0; c < 8; ++c) v += s[static_cast<std::size_t>(base + corner_offset[c])];
                        v /= 8.0;
                    } else {
                        v = center_values[cell];
                        if (!std::isfinite(v)) throw Error("non-finite center value at cell " + std::to_string(cell));
                    }
                    s[node_count + cell] = v;
                }
    }
    // Signs use the nudged values; positions use the unperturbed ones, so a
    // lattice point at iso keeps its vertex exactly.
    std::vector<double> raw = s;
    for (std::size_t n = 0; n < node_count; ++n)
        if (g.values()[n] == iso) raw[n] = iso;
    detail::perturb_exact_iso(std::span<double>(s).subspan(node_count), iso, prep.scale);
    const auto centers = cell_centers(grid);
    const auto position = [&](std::uint64_t id) {
        return id < node_count ? grid.position(id) : centers[id - node_count];
    };

    // Triangles as edge keys, per z-slab of cells.
    const auto& cases = tet_cases();
    const auto cell_slabs = static_cast<std::size_t>(nz - 1);
    std::vector<std::vector<std::array<std::uint64_t, 3>>> slab_tris(cell_slabs);
    parallel_chunks(cell_slabs, cell_slabs, 0, [&](std::size_t k, std::size_t, std::size_t) {
        auto& tris = slab_tris[k];
        const auto kk = static_cast<std::int64_t>(k);
        for (std::int64_t j = 0; j + 1 < ny; ++j) {
            for (std::int64_t i = 0; i + 1 < nx; ++i) {
                const auto base = static_cast<std::int64_t>(g.index(i, j, kk));
                const auto cell = static_cast<std::uint64_t>(i + (nx - 1) * (j + (ny - 1) * kk));
                std::array<std::uint64_t, 9> id{};
                for (int c = 0; c < 8; ++c) id[c] = static_cast<std::uint64_t>(base + corner_offset[c]);
                id[kCenter] = node_count + cell;
                for (const auto& tet : tet_split(static_cast<int>((i + j + kk) & 1)).tets) {
                    int config = 0;
                    for (int v = 0; v < 4; ++v)
                        if (s[id[static_cast<std::size_t>(tet[v])]] < iso) config |= 1 << v;
                    const TetCase& tc = cases[static_cast<std::size_t>(config)];
                    for (int t = 0; t < tc.count; ++t) {
                        std::array<std::uint64_t, 3> tri{};
                        for (int m = 0; m < 3; ++m) {
                            const auto& e = tc.tris[t][m];
                            tri[m] = edge_key(id[static_cast<std::size_t>(tet[e[0]])], id[static_cast<std::size_t>(tet[e[1]])]);
                        }
                        tris.push_back(tri);
                    }
                }
            }
        }
    });

    IndexedMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> vertex_of;
    for (const auto& st : slab_tris) {
        for (const auto& tk : st) {
            Triangle tri;
            for (int m = 0; m < 3; ++m) {
                auto [it, inserted] = vertex_of.try_emplace(tk[m], static_cast<std::uint32_t>(mesh.vertices.size()));
                if (inserted) {
                    const std::uint64_t a = tk[m] >> 32, b = tk[m] & 0xffffffffu;
                    const double u = lattice_crossing(raw[a], raw[b], iso);
                    const Vec3 pa = position(a);
                    mesh.vertices.push_back(pa + u * (position(b) - pa));
                    mesh.provenance.push_back({a, b});
                }
                tri[m] = it->second;
            }
            mesh.triangles.push_back(tri);
        }
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// 2D demonstrator

Field2D Field2D::line(const Vec2& normal, double offset) {
    const double len = normal.norm();
    if (!(len > 0.0)) throw Error("line normal must be nonzero");
    Field2D f;
    f.kind = Kind::Line;
    f.normal = normal / len;
    f.offset = offset / len;
    return f;
}

Field2D Field2D::circle(const Vec2& center, double radius) {
    if (!(radius > 0.0)) throw Error("circle radius must be positive");
    Field2D f;
    f.kind = Kind::Circle;
    f.center = center;
    f.radius = radius;
    return f;
}

Field2D Field2D::warped(double shift) const {
    Field2D f = *this;
    f.warp = true;
    f.shift = shift;
    return f;
}

double Field2D::sdf(const Vec2& p) const {
    return kind == Kind::Line ? normal.dot(p) - offset : (p - center).norm() - radius;
}

double Field2D::operator()(const Vec2& p) const {
    const double s = sdf(p);
    return warp ? std::expm1(s) - shift : s;
}

Demo2dMode demo2d_mode_from_string(const std::string& s) {
    if (s == "squares") return Demo2dMode::Squares;
    if (s == "triangles") return Demo2dMode::Triangles;
    throw Error("unknown demo2d mode '" + s + "' (expected squares or triangles)");
}

std::string to_string(Demo2dMode mode) { return mode == Demo2dMode::Squares ? "squares" : "triangles"; }

namespace {

// Segments of one convex cell polygon (square or triangle). The polygon is
// counter-clockwise; segments keep inside on the left. Saddle squares
// separate the inside corners.
void contour_polygon(std::span<const std::uint64_t> ids, std::span<const double> vals, double iso,
                     std::vector<std::array<std::uint64_t, 2>>& segs) {
    const std::size_t n = ids.size();
    const auto in = [&](std::size_t k) { return vals[k % n] < iso; };
    // Crossings entering (outside -> inside) and leaving, in polygon order.
    std::vector<std::size_t> enter, leave;
    for (std::size_t k = 0; k < n; ++k) {
        if (in(k) == in(k + 1)) continue;
        (in(k + 1) ? enter : leave).push_back(k);
    }
    const auto key = [&](std::size_t k) { return edge_key(ids[k], ids[(k + 1) % n]); };
    for (std::size_t e : enter) {
        // Walk forward from the entering edge to the next leaving edge.
        std::size_t best = leave.front();
        std::size_t best_dist = n;
        for (std::size_t l : leave) {
            const std::size_t dist = (l + n - e) % n;
            if (dist < best_dist) {
                best_dist = dist;
                best = l;
            }
        }
        segs.push_back({key(best), key(e)});
    }
}

}  // namespace

Demo2dResult demo_2d(const Field2D& field, Demo2dMode mode, int res, double iso) {
    if (res < 2) throw Error("demo2d: res must be >= 2");
    const auto n = static_cast<std::uint64_t>(res);
    const double h = 1.0 / static_cast<double>(res - 1);
    const std::uint64_t nodes = n * n;
    std::vector<Vec2> pos(nodes + (n - 1) * (n - 1));
    std::vector<double> val(pos.size());
    for (std::uint64_t j = 0; j < n; ++j)
        for (std::uint64_t i = 0; i < n; ++i) pos[i + n * j] = Vec2(static_cast<double>(i) * h, static_cast<double>(j) * h);
    for (std::uint64_t j = 0; j + 1 < n; ++j)
        for (std::uint64_t i = 0; i + 1 < n; ++i)
            pos[nodes + i + (n - 1) * j] = Vec2((static_cast<double>(i) + 0.5) * h, (static_cast<double>(j) + 0.5) * h);
    for (std::size_t p = 0; p < pos.size(); ++p) val[p] = field(pos[p]);
    const std::vector<double> raw = val;
    const double scale = detail::value_scale(val, iso);
    detail::perturb_exact_iso(val, iso, scale);

    std::vector<std::array<std::uint64_t, 2>> segs;
    for (std::uint64_t j = 0; j + 1 < n; ++j) {
        for (std::uint64_t i = 0; i + 1 < n; ++i) {
            const std::array<std::uint64_t, 4> sq{i + n * j, i + 1 + n * j, i + 1 + n * (j + 1), i + n * (j + 1)};
            if (mode == Demo2dMode::Squares) {
                std::array<double, 4> v{};
                for (int k = 0; k < 4; ++k) v[k] = val[sq[k]];
                contour_polygon(sq, v, iso, segs);
            } else {
                const std::uint64_t c = nodes + i + (n - 1) * j;
                for (int k = 0; k < 4; ++k) {
                    const std::array<std::uint64_t, 3> tri{sq[k], sq[(k + 1) % 4], c};
                    const std::array<double, 3> v{val[tri[0]], val[tri[1]], val[tri[2]]};
                    contour_polygon(tri, v, iso, segs);
                }
            }
        }
    }

    Demo2dResult out;
    std::unordered_map<std::uint64_t, std::uint32_t> vertex_of;
    std::vector<std::array<std::uint32_t, 2>> edges;
    for (const auto& sg : segs) {
        std::array<std::uint32_t, 2> e{};
        for (int m = 0; m < 2; ++m) {
            auto [it, inserted] = vertex_of.try_emplace(sg[m], static_cast<std::uint32_t>(out.vertices.size()));
            if (inserted) {
                const std::uint64_t a = sg[m] >> 32, b = sg[m] & 0xffffffffu;
                const double u = lattice_crossing(raw[a], raw[b], iso);
                out.vertices.push_back(pos[a] + u * (pos[b] - pos[a]));
            }
            e[m] = it->second;
        }
        edges.push_back(e);
    }

    // Chain segments into polylines following their direction.
    const std::size_t nv = out.vertices.size();
    std::vector<std::int64_t> next(nv, -1), prev(nv, -1);
    for (const auto& e : edges) {
        next[e[0]] = e[1];
        prev[e[1]] = e[0];
    }
    std::vector<bool> seen(nv, false);
    const auto trace = [&](std::uint32_t start) {
        std::vector<Vec2> line{out.vertices[start]};
        seen[start] = true;
        std::int64_t v = next[start];
        while (v >= 0) {
            line.push_back(out.vertices[static_cast<std::size_t>(v)]);
            if (seen[static_cast<std::size_t>(v)]) break;
            seen[static_cast<std::size_t>(v)] = true;
            v = next[static_cast<std::size_t>(v)];
        }
        out.polylines.push_back(std::move(line));
    };
    for (std::uint32_t v = 0; v < nv; ++v)
        if (prev[v] < 0 && !seen[v]) trace(v);
    for (std::uint32_t v = 0; v < nv; ++v)
        if (!seen[v]) trace(v);

    out.deviation.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) out.deviation[v] = field.sdf(out.vertices[v]);
    out.stats = deviation_stats(out.deviation);
    return out;
}

void write_svg(const Demo2dResult& result, const std::filesystem::path& path, int res) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    constexpr double size = 512.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 1 1\">\n<g transform=\"translate(0,1) scale(1,-1)\">\n";
    if (res >= 2) {
        const double h = 1.0 / (res - 1);
        out << "<g stroke=\"#ccc\" stroke-width=\"0.001\">\n";
        for (int i = 0; i < res; ++i) {
            out << "<line x1=\"" << i * h << "\" y1=\"0\" x2=\"" << i * h << "\" y2=\"1\"/>\n";
            out << "<line x1=\"0\" y1=\"" << i * h << "\" x2=\"1\" y2=\"" << i * h << "\"/>\n";
        }
        out << "</g>\n";
    }
    out.precision(12);
    for (const auto& line : result.polylines) {
        out << "<polyline fill=\"none\" stroke=\"#c00\" stroke-width=\"0.003\" points=\"";
        for (const auto& p : line) out << p.x() << ',' << p.y() << ' ';
        out << "\"/>\n";
    }
    out << "</g>\n</svg>\n";
}

void write_deviation_csv(const Demo2dResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "vertex,x,y,signed_deviation\n";
    for (std::size_t v = 0; v < result.vertices.size(); ++v)
        out << v << ',' << result.vertices[v].x() << ',' << result.vertices[v].y() << ',' << result.deviation[v] << '\n';
}

}  // namespace dmc
