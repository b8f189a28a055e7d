#include "diffmc/mc_table.hpp"

#include <algorithm>
#include <vector>

namespace dmc::mc {
namespace {

int edge_between(int c0, int c1) {
    for (int e = 0; e < 12; ++e) {
        const auto& ec = kEdgeCorners[e];
        if ((ec[0] == c0 && ec[1] == c1) || (ec[0] == c1 && ec[1] == c0)) return e;
    }
    return -1;
}

std::array<Face, 6> build_faces() {
    std::array<Face, 6> out{};
    for (int f = 0; f < 6; ++f) {
        const int axis = f / 2;
        const int side = f % 2;
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        const int base = side << axis;
        // Walk (0,0) -> (1,0) -> (1,1) -> (0,1) in the (u, v) plane.
        const std::array<int, 4> cyc{base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)};
        Face face{axis, side, cyc, {}};
        for (int k = 0; k < 4; ++k) face.edges[k] = edge_between(cyc[k], cyc[(k + 1) % 4]);
        out[f] = face;
    }
    return out;
}

Vec3 edge_midpoint(int e) {
    const auto& ec = kEdgeCorners[e];
    return 0.5 * (corner_offset(ec[0]) + corner_offset(ec[1]));
}

bool edges_share_face(int e0, int e1) {
    for (const Face& f : faces()) {
        const bool has0 = std::find(f.edges.begin(), f.edges.end(), e0) != f.edges.end();
        const bool has1 = std::find(f.edges.begin(), f.edges.end(), e1) != f.edges.end();
        if (has0 && has1) return true;
    }
    return false;
}

Case build_case(int config) {
    const auto inside = [config](int c) { return ((config >> c) & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    int crossings = 0;
    for (int e = 0; e < 12; ++e) {
        const auto& ec = kEdgeCorners[e];
        crossings += inside(ec[0]) != inside(ec[1]) ? 1 : 0;
    }

    for (const Face& f : faces()) {
        const Vec3 normal = Vec3::Unit(f.axis) * (f.side ? 1.0 : -1.0);
        std::vector<int> cut;  // crossing edges in cyclic face order
        for (int k = 0; k < 4; ++k) {
            const int c0 = f.corners[k];
            const int c1 = f.corners[(k + 1) % 4];
            if (inside(c0) != inside(c1)) cut.push_back(k);
        }
        // Segments as pairs of face-edge slots plus the corner used to orient them.
        std::vector<std::array<int, 3>> segments;
        if (cut.size() == 2) {
            const int k0 = cut[0], k1 = cut[1];
            // Adjacent slots share corner k1, or corner 0 for slots (0, 3).
            const int ref = k1 == k0 + 1 ? f.corners[k1] : f.corners[0];
            segments.push_back({k0, k1, ref});
        } else if (cut.size() == 4) {
            for (int k = 0; k < 4; ++k) {
                const int c = f.corners[k];
                if (inside(c)) segments.push_back({(k + 3) % 4, k, c});
            }
        }
        for (const auto& s : segments) {
            int p = f.edges[s[0]];
            int q = f.edges[s[1]];
            const Vec3 pm = edge_midpoint(p);
            const Vec3 side = normal.cross(edge_midpoint(q) - pm);
            const double d = side.dot(corner_offset(s[2]) - pm);
            // Outside (positive) corners must end up on the left of p -> q.
            const bool ref_outside = !inside(s[2]);
            if ((d > 0.0) != ref_outside) std::swap(p, q);
            if (next[p] != -1) throw Error("marching cubes table: edge has two successors");
            next[p] = q;
        }
    }

    Case out;
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
        if (next[start] == -1 || visited[start]) continue;
        std::vector<int> cycle;
        for (int e = start; !visited[e]; e = next[e]) {
            visited[e] = true;
            cycle.push_back(e);
            if (next[e] == -1) throw Error("marching cubes table: open polygon");
        }
        if (cycle.size() < 3) throw Error("marching cubes table: degenerate polygon");
        const std::size_t n = cycle.size();
        // Prefer a fan apex whose diagonals never run inside a cell face.
        std::size_t apex = 0;
        for (std::size_t a = 0; a < n; ++a) {
            bool clean = true;
            for (std::size_t k = 2; k + 1 < n && clean; ++k)
                clean = !edges_share_face(cycle[a], cycle[(a + k) % n]);
            if (clean) {
                apex = a;
                break;
            }
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            out.triangles[out.triangle_count++] = {static_cast<std::uint8_t>(cycle[apex]),
                                                   static_cast<std::uint8_t>(cycle[(apex + k) % n]),
                                                   static_cast<std::uint8_t>(cycle[(apex + k + 1) % n])};
        }
    }
    int used = 0;
    for (bool v : visited) used += v ? 1 : 0;
    if (used != crossings) throw Error("marching cubes table: crossing edge left unconnected");
    return out;
}

}  // namespace

const std::array<Face, 6>& faces() {
    static const std::array<Face, 6> f = build_faces();
    return f;
}

McTable::McTable() {
    for (int c = 0; c < 256; ++c) cases_[c] = build_case(c);
}

const McTable& table() {
    static const McTable t;
    return t;
}

}  // namespace dmc::mc
