#include "diffmc/stats.hpp"

#include <algorithm>
#include <cmath>

namespace dmc {

DeviationStats deviation_stats(std::span<const double> d) {
    DeviationStats st;
    st.count = d.size();
    if (d.empty()) return st;
    double sum = 0.0, sq = 0.0;
    for (double x : d) {
        sum += x;
        sq += x * x;
        st.max_abs = std::max(st.max_abs, std::abs(x));
    }
    const auto n = static_cast<double>(d.size());
    st.mean_signed = sum / n;
    st.rms = std::sqrt(sq / n);
    double var = 0.0;
    for (double x : d) var += (x - st.mean_signed) * (x - st.mean_signed);
    st.stddev = std::sqrt(var / n);
    return st;
}

}  // namespace dmc
