#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "diffmc/neural_texture.hpp"

namespace dmc::test {

// Materializes each factor pair as a dense R^3 grid (x, y, z order) and
// samples it trilinearly at the box-normalized point.
inline std::vector<double> dense_features(const VmTexture& t, const Vec3& x) {
    const int C = t.channels, R = t.resolution;
    const auto at = [&](const std::vector<double>& m, int c, int i, int j) { return m[(c * R + i) * R + j]; };
    const auto line = [&](const std::vector<double>& l, int c, int i) { return l[c * R + i]; };
    std::vector<double> dense(static_cast<std::size_t>(3 * C * R * R * R));
    const auto cell = [&](int k, int c, int ix, int iy, int iz) -> double& {
        return dense[((((k * C + c) * R + ix) * R + iy) * R) + iz];
    };
    for (int c = 0; c < C; ++c)
        for (int ix = 0; ix < R; ++ix)
            for (int iy = 0; iy < R; ++iy)
                for (int iz = 0; iz < R; ++iz) {
                    cell(0, c, ix, iy, iz) = at(t.planes[0], c, ix, iy) * line(t.lines[0], c, iz);
                    cell(1, c, ix, iy, iz) = at(t.planes[1], c, iy, iz) * line(t.lines[1], c, ix);
                    cell(2, c, ix, iy, iz) = at(t.planes[2], c, iz, ix) * line(t.lines[2], c, iy);
                }
    const Vec3 q = (x - t.box_min).cwiseQuotient(t.box_max - t.box_min).cwiseMax(0.0).cwiseMin(1.0) * (R - 1);
    std::array<int, 3> base{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
        base[a] = std::min(static_cast<int>(q[a]), R - 2);
        frac[a] = q[a] - base[a];
    }
    std::vector<double> raw(static_cast<std::size_t>(3 * C), 0.0);
    for (int k = 0; k < 3; ++k)
        for (int c = 0; c < C; ++c)
            for (int corner = 0; corner < 8; ++corner) {
                double w = 1.0;
                std::array<int, 3> idx{};
                for (int a = 0; a < 3; ++a) {
                    const int bit = (corner >> a) & 1;
                    idx[a] = base[a] + bit;
                    w *= bit ? frac[a] : 1.0 - frac[a];
                }
                raw[k * C + c] += w * cell(k, c, idx[0], idx[1], idx[2]);
            }
    std::vector<double> f(static_cast<std::size_t>(t.features), 0.0);
    for (int i = 0; i < t.features; ++i)
        for (int j = 0; j < 3 * C; ++j) f[i] += t.basis[i * 3 * C + j] * raw[j];
    return f;
}

// Real SH written from the normalization constants.
inline std::array<double, 9> reference_sh(const Vec3& d) {
    const double pi = std::numbers::pi;
    const double c0 = 0.5 / std::sqrt(pi), c1 = std::sqrt(3.0 / (4 * pi)), c2 = std::sqrt(15.0 / (4 * pi)),
                 c3 = std::sqrt(5.0 / (16 * pi)), c4 = std::sqrt(15.0 / (16 * pi));
    const double x = d.x(), y = d.y(), z = d.z();
    return {c0, c1 * y, c1 * z, c1 * x, c2 * x * y, c2 * y * z, c3 * (3 * z * z - 1), c2 * x * z, c4 * (x * x - y * y)};
}

}  // namespace dmc::test
