#pragma once

#include <cstddef>
#include <span>

namespace dmc {

struct DeviationStats {
    std::size_t count = 0;
    double rms = 0.0;
    double max_abs = 0.0;
    double mean_signed = 0.0;
    double stddev = 0.0;  ///< of the signed deviation about its mean
};

DeviationStats deviation_stats(std::span<const double> signed_deviation);

}  // namespace dmc
