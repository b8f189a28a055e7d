#pragma once

// Input conditioning shared by the cube and tetrahedron extractors.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "diffmc/diffmc.hpp"

namespace dmc::detail {

/// Largest |value - iso|, or 1 for a constant grid.
inline double value_scale(std::span<const double> values, double iso) {
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v - iso));
    return scale == 0.0 ? 1.0 : scale;
}

/// Nudges values exactly at iso upward by kIsoPerturbation * scale, doubling
/// the nudge while it is lost to rounding. Returns the number nudged.
inline std::size_t perturb_exact_iso(std::span<double> values, double iso, double scale) {
    std::size_t count = 0;
    for (double& v : values) {
        if (v != iso) continue;
        double nudge = kIsoPerturbation * scale;
        for (int attempt = 0; iso + nudge == iso && attempt < 64; ++attempt) nudge *= 2.0;
        if (iso + nudge == iso) throw Error("node value equals iso and cannot be perturbed at this magnitude");
        v = iso + nudge;
        ++count;
    }
    return count;
}

struct PreparedValues {
    std::vector<double> values;
    std::vector<signed char> sign;  // d(prepared)/d(input); empty when all +1
    ExtractionInfo info;
    double scale = 1.0;
};

inline PreparedValues prepare_values(const ScalarGrid& grid, double iso, bool closed) {
    if (!std::isfinite(iso)) throw Error("iso value must be finite");
    grid.check_finite();
    PreparedValues p;
    p.values.assign(grid.values().begin(), grid.values().end());

    if (closed) {
        for (std::size_t n = 0; n < p.values.size(); ++n) {
            if (p.values[n] < iso && grid.on_boundary(n)) {
                if (p.sign.empty()) p.sign.assign(p.values.size(), 1);
                p.values[n] = iso + (iso - p.values[n]);
                p.sign[n] = -1;
                ++p.info.closed_nodes;
            }
        }
    }

    p.scale = value_scale(p.values, iso);
    p.info.perturbed_nodes = perturb_exact_iso(p.values, iso, p.scale);
    return p;
}

}  // namespace dmc::detail
