#include "diffmc/predicates.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <gmpxx.h>

namespace dmc::exact {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;
// Error bounds for the naive determinant evaluation (Shewchuk's stage-A bounds).
constexpr double kO3dBound = (7.0 + 56.0 * kEps) * kEps;
constexpr double kO2dBound = (3.0 + 16.0 * kEps) * kEps;

int sign_of(const mpq_class& q) { return sgn(q); }

int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const mpq_class ax(a.x()), ay(a.y()), az(a.z());
    const mpq_class bx = mpq_class(b.x()) - ax, by = mpq_class(b.y()) - ay, bz = mpq_class(b.z()) - az;
    const mpq_class cx = mpq_class(c.x()) - ax, cy = mpq_class(c.y()) - ay, cz = mpq_class(c.z()) - az;
    const mpq_class dx = mpq_class(d.x()) - ax, dy = mpq_class(d.y()) - ay, dz = mpq_class(d.z()) - az;
    const mpq_class det = bx * (cy * dz - cz * dy) - by * (cx * dz - cz * dx) + bz * (cx * dy - cy * dx);
    return sign_of(det);
}

int orient2d_exact(double ax, double ay, double bx, double by, double cx, double cy) {
    const mpq_class det = (mpq_class(bx) - ax) * (mpq_class(cy) - ay) - (mpq_class(by) - ay) * (mpq_class(cx) - ax);
    return sign_of(det);
}

}  // namespace

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const double adx = a.x() - d.x(), bdx = b.x() - d.x(), cdx = c.x() - d.x();
    const double ady = a.y() - d.y(), bdy = b.y() - d.y(), cdy = c.y() - d.y();
    const double adz = a.z() - d.z(), bdz = b.z() - d.z(), cdz = c.z() - d.z();
    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    // det[a-d, b-d, c-d] equals -det[b-a, c-a, d-a].
    const double det = adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * std::abs(adz) +
                             (std::abs(cdxady) + std::abs(adxcdy)) * std::abs(bdz) +
                             (std::abs(adxbdy) + std::abs(bdxady)) * std::abs(cdz);
    const double bound = kO3dBound * permanent;
    if (det > bound) return -1;
    if (-det > bound) return 1;
    return orient3d_exact(a, b, c, d);
}

int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
    const double l = (bx - ax) * (cy - ay);
    const double r = (by - ay) * (cx - ax);
    const double det = l - r;
    const double bound = kO2dBound * (std::abs(l) + std::abs(r));
    if (det > bound) return 1;
    if (-det > bound) return -1;
    return orient2d_exact(ax, ay, bx, by, cx, cy);
}

namespace {

struct P2 {
    double x, y;
};

int o2(const P2& a, const P2& b, const P2& c) { return orient2d(a.x, a.y, b.x, b.y, c.x, c.y); }

bool on_segment(const P2& a, const P2& b, const P2& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect_2d(const P2& a, const P2& b, const P2& c, const P2& d) {
    const int d1 = o2(c, d, a), d2 = o2(c, d, b), d3 = o2(a, b, c), d4 = o2(a, b, d);
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

bool point_in_triangle_2d(const P2& p, const P2& a, const P2& b, const P2& c) {
    const int s1 = o2(a, b, p), s2 = o2(b, c, p), s3 = o2(c, a, p);
    const bool has_neg = s1 < 0 || s2 < 0 || s3 < 0;
    const bool has_pos = s1 > 0 || s2 > 0 || s3 > 0;
    return !(has_neg && has_pos);
}

int drop_axis(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const Vec3 n = (p1 - p0).cross(p2 - p0).cwiseAbs();
    int axis = 0;
    if (n.y() > n[axis]) axis = 1;
    if (n.z() > n[axis]) axis = 2;
    return axis;
}

P2 project(const Vec3& p, int drop) {
    const int u = (drop + 1) % 3, v = (drop + 2) % 3;
    return {p[u], p[v]};
}

bool segment_triangle_2d(const P2& s0, const P2& s1, const P2& a, const P2& b, const P2& c) {
    if (point_in_triangle_2d(s0, a, b, c) || point_in_triangle_2d(s1, a, b, c)) return true;
    return segments_intersect_2d(s0, s1, a, b) || segments_intersect_2d(s0, s1, b, c) ||
           segments_intersect_2d(s0, s1, c, a);
}

bool coplanar_triangles(const std::array<Vec3, 3>& p, const std::array<Vec3, 3>& q) {
    const int drop = drop_axis(p[0], p[1], p[2]);
    std::array<P2, 3> a, b;
    for (int i = 0; i < 3; ++i) {
        a[i] = project(p[i], drop);
        b[i] = project(q[i], drop);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (segments_intersect_2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
    return point_in_triangle_2d(a[0], b[0], b[1], b[2]) || point_in_triangle_2d(b[0], a[0], a[1], a[2]);
}

// Segment s0-s1 against triangle t, given the segment endpoints' orientations
// relative to the triangle's plane.
bool segment_hits_triangle(const Vec3& s0, const Vec3& s1, int o0, int o1, const std::array<Vec3, 3>& t) {
    if (o0 == 0 && o1 == 0) {
        const int drop = drop_axis(t[0], t[1], t[2]);
        return segment_triangle_2d(project(s0, drop), project(s1, drop), project(t[0], drop), project(t[1], drop),
                                   project(t[2], drop));
    }
    if (o0 * o1 > 0) return false;
    const int a = orient3d(s0, s1, t[0], t[1]);
    const int b = orient3d(s0, s1, t[1], t[2]);
    const int c = orient3d(s0, s1, t[2], t[0]);
    const bool has_neg = a < 0 || b < 0 || c < 0;
    const bool has_pos = a > 0 || b > 0 || c > 0;
    return !(has_neg && has_pos);
}

}  // namespace

bool triangles_intersect(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& q0, const Vec3& q1,
                         const Vec3& q2) {
    const std::array<Vec3, 3> p{p0, p1, p2}, q{q0, q1, q2};
    std::array<int, 3> oq, op;
    for (int i = 0; i < 3; ++i) oq[i] = orient3d(p0, p1, p2, q[i]);
    if ((oq[0] > 0 && oq[1] > 0 && oq[2] > 0) || (oq[0] < 0 && oq[1] < 0 && oq[2] < 0)) return false;
    for (int i = 0; i < 3; ++i) op[i] = orient3d(q0, q1, q2, p[i]);
    if ((op[0] > 0 && op[1] > 0 && op[2] > 0) || (op[0] < 0 && op[1] < 0 && op[2] < 0)) return false;
    if (oq[0] == 0 && oq[1] == 0 && oq[2] == 0) return coplanar_triangles(p, q);
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3;
        if (segment_hits_triangle(p[i], p[j], op[i], op[j], q)) return true;
        if (segment_hits_triangle(q[i], q[j], oq[i], oq[j], p)) return true;
    }
    return false;
}

}  // namespace dmc::exact
