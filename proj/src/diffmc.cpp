#include "diffmc/diffmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "diffmc/mc_table.hpp"
#include "diffmc/parallel.hpp"
#include "prepare.hpp"

namespace dmc {

Extraction extract(const DeformableGrid& grid, double iso, const ExtractOptions& options) {
    const ScalarGrid& g = grid.base;
    grid.check_displacements();
    detail::PreparedValues prep = detail::prepare_values(g, iso, options.closed);
    const auto& s = prep.values;

    const Index3 dims = g.dims();
    const std::int64_t nx = dims.x(), ny = dims.y(), nz = dims.z();
    const std::array<std::int64_t, 3> stride{1, nx, nx * ny};
    const auto slabs = static_cast<std::size_t>(nz);
    const auto inside = [&](std::size_t n) { return s[n] < iso; };

    // Crossing edges, keyed node * 3 + axis, in increasing key order.
    std::vector<std::vector<std::uint64_t>> slab_keys(slabs);
    parallel_chunks(slabs, slabs, options.threads, [&](std::size_t k, std::size_t, std::size_t) {
        auto& keys = slab_keys[k];
        const auto kk = static_cast<std::int64_t>(k);
        for (std::int64_t j = 0; j < ny; ++j) {
            for (std::int64_t i = 0; i < nx; ++i) {
                const std::size_t n = g.index(i, j, kk);
                const bool in = inside(n);
                if (i + 1 < nx && inside(n + 1) != in) keys.push_back(n * 3 + 0);
                if (j + 1 < ny && inside(n + static_cast<std::size_t>(stride[1])) != in) keys.push_back(n * 3 + 1);
                if (kk + 1 < nz && inside(n + static_cast<std::size_t>(stride[2])) != in) keys.push_back(n * 3 + 2);
            }
        }
    });
    std::vector<std::uint64_t> keys;
    for (auto& sk : slab_keys) keys.insert(keys.end(), sk.begin(), sk.end());
    slab_keys.clear();

    Extraction out;
    out.info = prep.info;
    auto& mesh = out.mesh;
    const std::size_t nv = keys.size();
    mesh.vertices.resize(nv);
    mesh.provenance.resize(nv);
    out.jacobian.node_count = g.node_count();
    out.jacobian.vertices.resize(nv);

    std::vector<unsigned char> clamped(nv, 0);
    parallel_chunks(nv, std::max<std::size_t>(1, nv / 4096), options.threads,
                    [&](std::size_t, std::size_t v0, std::size_t v1) {
        for (std::size_t v = v0; v < v1; ++v) {
            const std::uint64_t a = keys[v] / 3;
            const int axis = static_cast<int>(keys[v] % 3);
            const std::uint64_t b = a + static_cast<std::uint64_t>(stride[axis]);
            const double sa = s[a], sb = s[b];
            const double denom = sa - sb;
            double u = (sa - iso) / denom;
            double du_da = -(sb - iso) / (denom * denom);
            double du_db = (sa - iso) / (denom * denom);
            if (u < kEdgeClamp || u > 1.0 - kEdgeClamp) {
                u = std::clamp(u, kEdgeClamp, 1.0 - kEdgeClamp);
                du_da = du_db = 0.0;
                clamped[v] = 1;
            }
            const Vec3 pa = grid.position(a);
            const Vec3 pb = grid.position(b);
            const Vec3 e = pb - pa;
            mesh.vertices[v] = pa + u * e;
            mesh.provenance[v] = {a, b};
            auto& d = out.jacobian.vertices[v];
            d.node_a = a;
            d.node_b = b;
            const double sign_a = prep.sign.empty() ? 1.0 : prep.sign[a];
            const double sign_b = prep.sign.empty() ? 1.0 : prep.sign[b];
            d.d_value_a = (sign_a * du_da) * e;
            d.d_value_b = (sign_b * du_db) * e;
            d.weight_a = 1.0 - u;
            d.weight_b = u;
        }
    });
    for (auto c : clamped) out.info.clamped_vertices += c;

    const auto vertex_of = [&](std::uint64_t key) {
        const auto it = std::lower_bound(keys.begin(), keys.end(), key);
        return static_cast<std::uint32_t>(it - keys.begin());
    };

    const auto& tab = mc::table();
    std::array<std::int64_t, 8> corner_offset{};
    for (int c = 0; c < 8; ++c)
        corner_offset[c] = mc::corner_bit(c, 0) * stride[0] + mc::corner_bit(c, 1) * stride[1] + mc::corner_bit(c, 2) * stride[2];

    const auto cell_slabs = static_cast<std::size_t>(nz - 1);
    std::vector<std::vector<Triangle>> slab_tris(cell_slabs);
    parallel_chunks(cell_slabs, cell_slabs, options.threads, [&](std::size_t k, std::size_t, std::size_t) {
        auto& tris = slab_tris[k];
        const auto kk = static_cast<std::int64_t>(k);
        for (std::int64_t j = 0; j + 1 < ny; ++j) {
            for (std::int64_t i = 0; i + 1 < nx; ++i) {
                const auto base = static_cast<std::int64_t>(g.index(i, j, kk));
                int config = 0;
                for (int c = 0; c < 8; ++c)
                    if (inside(static_cast<std::size_t>(base + corner_offset[c]))) config |= 1 << c;
                const mc::Case& cs = tab[config];
                for (int t = 0; t < cs.triangle_count; ++t) {
                    Triangle tri;
                    for (int m = 0; m < 3; ++m) {
                        const int e = cs.triangles[t][m];
                        const auto node = static_cast<std::uint64_t>(base + corner_offset[mc::kEdgeCorners[e][0]]);
                        tri[m] = vertex_of(node * 3 + static_cast<std::uint64_t>(mc::kEdgeAxis[e]));
                    }
                    tris.push_back(tri);
                }
            }
        }
    });
    for (auto& st : slab_tris) mesh.triangles.insert(mesh.triangles.end(), st.begin(), st.end());
    return out;
}

GridGradient chain_gradient(const VertexJacobian& jac, std::span<const Vec3> dl_dv) {
    if (dl_dv.size() != jac.vertices.size())
        throw Error("chain_gradient: " + std::to_string(dl_dv.size()) + " cotangents for " +
                    std::to_string(jac.vertices.size()) + " vertices");
    GridGradient g;
    g.values.assign(jac.node_count, 0.0);
    g.displacement.assign(jac.node_count, Vec3::Zero());
    // Serial scatter in vertex order: every node accumulates its terms in a
    // fixed order, independent of how extraction was scheduled.
    for (std::size_t v = 0; v < jac.vertices.size(); ++v) {
        const auto& d = jac.vertices[v];
        const Vec3& c = dl_dv[v];
        g.values[d.node_a] += c.dot(d.d_value_a);
        g.values[d.node_b] += c.dot(d.d_value_b);
        g.displacement[d.node_a] += d.weight_a * c;
        g.displacement[d.node_b] += d.weight_b * c;
    }
    return g;
}

DeformableGrid clamp_displacements(const DeformableGrid& grid) {
    DeformableGrid out = grid;
    const Vec3 limit = (0.5 - kDisplacementMargin) * grid.base.spacing();
    for (auto& d : out.displacement)
        for (int a = 0; a < 3; ++a) d[a] = std::clamp(d[a], -limit[a], limit[a]);
    return out;
}

void write_jacobian_triplets(const VertexJacobian& jac, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "# vertex component node param value\n";
    for (std::size_t v = 0; v < jac.vertices.size(); ++v) {
        const auto& d = jac.vertices[v];
        for (int c = 0; c < 3; ++c) {
            out << v << ' ' << c << ' ' << d.node_a << " s " << d.d_value_a[c] << '\n';
            out << v << ' ' << c << ' ' << d.node_b << " s " << d.d_value_b[c] << '\n';
            out << v << ' ' << c << ' ' << d.node_a << " d " << d.weight_a << '\n';
            out << v << ' ' << c << ' ' << d.node_b << " d " << d.weight_b << '\n';
        }
    }
}

}  // namespace dmc
