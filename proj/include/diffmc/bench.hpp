#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffmc/field.hpp"

namespace dmc {

struct BenchOptions {
    int res = 32;
    int reps = 1000;
    int runs = 3;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct TimingSummary {
    std::string name;
    std::vector<double> run_medians;  ///< seconds, one per run
    std::vector<double> run_means;
    double median_of_medians = 0.0;
    double median_spread = 0.0;  ///< (max - min) / mean of the run medians
};

struct BenchReport {
    int res = 0;
    int mt_res = 0;  ///< baseline resolution with the closest triangle count
    std::size_t diffmc_triangles = 0;
    std::size_t mt_triangles = 0;
    int reps = 0;
    int runs = 0;
    /// diffmc_forward, diffmc_backward, diffmc_forward_backward, mt_forward.
    std::vector<TimingSummary> timings;
    double mt_over_diffmc_forward = 0.0;  ///< ratio of median forward times
};

/// Wall-clock timings of DiffMC extraction, its backward pass (chain rule
/// with seeded random vertex cotangents) and the tetrahedral baseline at a
/// matched triangle count. Each run performs one untimed warm-up.
BenchReport run_bench(const AnalyticField& field, const BenchOptions& options);

nlohmann::json to_json(const BenchReport& report);

}  // namespace dmc
