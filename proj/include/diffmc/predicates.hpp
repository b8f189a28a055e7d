#pragma once

#include "diffmc/types.hpp"

namespace dmc::exact {

/// Sign of det[b - a, c - a, d - a]: +1, 0 or -1, exact for all finite
/// double inputs. A floating-point filter answers most queries; the rest
/// fall back to rational arithmetic.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Sign of the 2D determinant det[b - a, c - a], exact.
int orient2d(double ax, double ay, double bx, double by, double cx, double cy);

/// Closed triangles (boundary included) share at least one point.
bool triangles_intersect(const Vec3& p0, const Vec3& p1, const Vec3& p2,
                         const Vec3& q0, const Vec3& q1, const Vec3& q2);

}  // namespace dmc::exact
