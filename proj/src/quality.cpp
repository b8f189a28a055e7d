#include "diffmc/quality.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "diffmc/parallel.hpp"
#include "diffmc/predicates.hpp"

namespace dmc {
namespace {

using EdgeKey = std::pair<std::uint32_t, std::uint32_t>;

void add_offender(QualityReport& r, std::string kind, std::vector<std::uint64_t> ids) {
    const auto same = std::count_if(r.offending_elements.begin(), r.offending_elements.end(),
                                    [&](const Offender& o) { return o.kind == kind; });
    if (static_cast<std::size_t>(same) < kMaxOffendersPerKind) r.offending_elements.push_back({std::move(kind), std::move(ids)});
}

bool degenerate(const Triangle& t) { return t[0] == t[1] || t[1] == t[2] || t[0] == t[2]; }

struct Box {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    void grow(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const Box& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    bool overlaps(const Box& b) const {
        return (lo.array() <= b.hi.array()).all() && (b.lo.array() <= hi.array()).all();
    }
};

class BoxTree {
public:
    explicit BoxTree(std::vector<Box> boxes) : boxes_(std::move(boxes)), order_(boxes_.size()) {
        std::iota(order_.begin(), order_.end(), 0u);
        if (!boxes_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
    }

    template <class Fn>
    void query(const Box& q, Fn&& fn) const {
        if (nodes_.empty()) return;
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const Node& n = nodes_[stack.back()];
            stack.pop_back();
            if (!n.box.overlaps(q)) continue;
            if (n.left < 0) {
                for (std::uint32_t i = n.begin; i < n.end; ++i)
                    if (boxes_[order_[i]].overlaps(q)) fn(order_[i]);
            } else {
                stack.push_back(static_cast<std::uint32_t>(n.left));
                stack.push_back(static_cast<std::uint32_t>(n.right));
            }
        }
    }

private:
    struct Node {
        Box box;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({});
        Box box;
        for (std::uint32_t i = begin; i < end; ++i) box.grow(boxes_[order_[i]]);
        nodes_[id].box = box;
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        if (end - begin <= 4) return id;
        int axis = 0;
        const Vec3 ext = box.hi - box.lo;
        if (ext.y() > ext[axis]) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        const std::uint32_t mid = begin + (end - begin) / 2;
        const auto center = [&](std::uint32_t t) { return boxes_[t].lo[axis] + boxes_[t].hi[axis]; };
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double ca = center(a), cb = center(b);
                             return ca < cb || (ca == cb && a < b);
                         });
        const auto l = build(begin, mid);
        const auto r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::vector<Box> boxes_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

bool share_vertex(const Triangle& a, const Triangle& b) {
    for (auto x : a)
        for (auto y : b)
            if (x == y) return true;
    return false;
}

bool pair_intersects(const IndexedMesh& m, std::uint32_t i, std::uint32_t j) {
    const auto& a = m.triangles[i];
    const auto& b = m.triangles[j];
    if (share_vertex(a, b)) return false;
    const auto& v = m.vertices;
    return exact::triangles_intersect(v[a[0]], v[a[1]], v[a[2]], v[b[0]], v[b[1]], v[b[2]]);
}

}  // namespace

QualityReport check_watertight(const IndexedMesh& mesh) {
    mesh.check_indices();
    QualityReport r;
    std::vector<EdgeKey> edges;
    edges.reserve(mesh.triangles.size() * 3);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        if (degenerate(tri)) {
            ++r.degenerate_triangle_count;
            add_offender(r, "degenerate-triangle", {t});
        }
        for (int k = 0; k < 3; ++k) {
            const auto a = tri[k], b = tri[(k + 1) % 3];
            if (a == b) {
                ++r.nonmanifold_edge_count;
                continue;
            }
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && edges[j] == edges[i]) ++j;
        const std::size_t count = j - i;
        ++r.edge_count;
        if (count == 1) {
            ++r.boundary_edge_count;
            add_offender(r, "boundary-edge", {edges[i].first, edges[i].second});
        } else if (count > 2) {
            ++r.nonmanifold_edge_count;
            add_offender(r, "nonmanifold-edge", {edges[i].first, edges[i].second});
        }
        i = j;
    }
    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& t : mesh.triangles)
        for (auto v : t) used[v] = true;
    r.vertex_count = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
    r.face_count = mesh.triangles.size();
    r.euler_characteristic = static_cast<std::int64_t>(r.vertex_count) - static_cast<std::int64_t>(r.edge_count) +
                             static_cast<std::int64_t>(r.face_count);
    r.watertight = r.boundary_edge_count == 0 && r.nonmanifold_edge_count == 0;
    return r;
}

QualityReport check_manifold(const IndexedMesh& mesh, const ManifoldOptions& options) {
    QualityReport r = check_watertight(mesh);

    // Vertex -> incident triangles (CSR).
    const std::size_t nv = mesh.vertices.size();
    std::vector<std::uint32_t> start(nv + 1, 0);
    for (const auto& t : mesh.triangles)
        for (auto v : t) ++start[v + 1];
    std::partial_sum(start.begin(), start.end(), start.begin());
    std::vector<std::uint32_t> incident(start.back());
    {
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t)
            for (auto v : mesh.triangles[t]) incident[fill[v]++] = t;
    }

    // A vertex is a single fan when its incident triangles are connected
    // through edges that contain the vertex.
    std::vector<std::uint32_t> parent;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> spokes;  // (other vertex, local triangle)
    for (std::uint32_t v = 0; v < nv; ++v) {
        const std::uint32_t b = start[v], e = start[v + 1];
        if (b == e) continue;
        const std::uint32_t n = e - b;
        parent.resize(n);
        std::iota(parent.begin(), parent.end(), 0u);
        const auto find = [&](std::uint32_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        spokes.clear();
        bool degenerate_here = false;
        for (std::uint32_t k = 0; k < n; ++k) {
            const auto& t = mesh.triangles[incident[b + k]];
            if (degenerate(t)) {
                degenerate_here = true;
                continue;
            }
            for (auto w : t)
                if (w != v) spokes.emplace_back(w, k);
        }
        std::sort(spokes.begin(), spokes.end());
        for (std::size_t i = 1; i < spokes.size(); ++i)
            if (spokes[i].first == spokes[i - 1].first) parent[find(spokes[i].second)] = find(spokes[i - 1].second);
        std::uint32_t components = 0;
        for (std::uint32_t k = 0; k < n; ++k)
            if (find(k) == k) ++components;
        if (components > 1 || degenerate_here) {
            ++r.nonmanifold_vertex_count;
            add_offender(r, "nonmanifold-vertex", {v});
        }
    }
    r.manifold_connectivity =
        r.nonmanifold_edge_count == 0 && r.nonmanifold_vertex_count == 0 && r.degenerate_triangle_count == 0;

    if (options.self_intersection) {
        const auto pairs = intersecting_pairs(mesh, options.threads);
        r.self_intersection_checked = true;
        r.intersecting_pair_count = pairs.size();
        r.self_intersection_free = pairs.empty();
        for (const auto& [i, j] : pairs) add_offender(r, "intersecting-pair", {i, j});
    }
    return r;
}

QualityReport certify(const IndexedMesh& mesh, const ManifoldOptions& options) {
    return check_manifold(mesh, options);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> intersecting_pairs(const IndexedMesh& mesh, int threads) {
    mesh.check_indices();
    const auto nt = mesh.triangles.size();
    std::vector<Box> boxes(nt);
    for (std::size_t t = 0; t < nt; ++t)
        for (auto v : mesh.triangles[t]) boxes[t].grow(mesh.vertices[v]);
    const BoxTree tree(boxes);
    const std::size_t chunks = std::max<std::size_t>(1, nt / 2048);
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> found(chunks);
    parallel_chunks(nt, chunks, threads, [&](std::size_t c, std::size_t t0, std::size_t t1) {
        for (auto i = static_cast<std::uint32_t>(t0); i < t1; ++i) {
            tree.query(boxes[i], [&](std::uint32_t j) {
                if (j > i && pair_intersects(mesh, i, j)) found[c].emplace_back(i, j);
            });
        }
    });
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (auto& f : found) out.insert(out.end(), f.begin(), f.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> intersecting_pairs_brute_force(const IndexedMesh& mesh) {
    mesh.check_indices();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    const auto nt = static_cast<std::uint32_t>(mesh.triangles.size());
    for (std::uint32_t i = 0; i < nt; ++i)
        for (std::uint32_t j = i + 1; j < nt; ++j)
            if (pair_intersects(mesh, i, j)) out.emplace_back(i, j);
    return out;
}

nlohmann::json to_json(const QualityReport& r) {
    nlohmann::json j;
    j["watertight"] = r.watertight;
    j["manifold_connectivity"] = r.manifold_connectivity;
    j["self_intersection_free"] = r.self_intersection_free;
    j["self_intersection_checked"] = r.self_intersection_checked;
    j["manifold"] = r.manifold();
    j["euler_characteristic"] = r.euler_characteristic;
    j["vertex_count"] = r.vertex_count;
    j["edge_count"] = r.edge_count;
    j["face_count"] = r.face_count;
    j["boundary_edge_count"] = r.boundary_edge_count;
    j["nonmanifold_edge_count"] = r.nonmanifold_edge_count;
    j["nonmanifold_vertex_count"] = r.nonmanifold_vertex_count;
    j["degenerate_triangle_count"] = r.degenerate_triangle_count;
    j["intersecting_pair_count"] = r.intersecting_pair_count;
    auto& off = j["offending_elements"] = nlohmann::json::array();
    for (const auto& o : r.offending_elements) off.push_back({{"kind", o.kind}, {"ids", o.ids}});
    return j;
}

}  // namespace dmc
