#include "diffmc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "diffmc/diffmc.hpp"
#include "diffmc/marching_tets.hpp"

namespace dmc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchReport run_bench(const AnalyticField& field, const BenchOptions& o) {
    if (o.res < 4 || o.reps < 1 || o.runs < 1) throw Error("bench needs res >= 4, reps >= 1 and runs >= 1");
    BenchReport r;
    r.res = o.res;
    r.reps = o.reps;
    r.runs = o.runs;
    const DeformableGrid grid(sample_unit_cube(field, o.res, o.threads));
    const ExtractOptions eo{true, o.threads};
    const Extraction ref = extract(grid, 0.0, eo);
    if (ref.mesh.empty()) throw Error("bench field has an empty surface at this resolution");
    r.diffmc_triangles = ref.mesh.triangles.size();

    // The 12-tet split makes more triangles per cell, so the baseline runs coarser.
    long best_gap = -1;
    DeformableGrid mt_grid;
    std::vector<double> mt_centers;
    for (int res = 4; res <= o.res; ++res) {
        DeformableGrid g(sample_unit_cube(field, res, o.threads));
        auto centers = sample_cell_centers(field, g);
        const std::size_t n = extract_mt(g, 0.0, centers).triangles.size();
        const long gap = std::labs(static_cast<long>(n) - static_cast<long>(r.diffmc_triangles));
        if (best_gap < 0 || gap < best_gap) {
            best_gap = gap;
            r.mt_res = res;
            r.mt_triangles = n;
            mt_grid = std::move(g);
            mt_centers = std::move(centers);
        }
    }

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<Vec3> cotangent(ref.mesh.vertices.size());
    for (auto& c : cotangent) c = Vec3(N(rng), N(rng), N(rng));

    const std::array<const char*, 4> names{"diffmc_forward", "diffmc_backward", "diffmc_forward_backward", "mt_forward"};
    std::array<TimingSummary, 4> sums;
    for (int k = 0; k < 4; ++k) sums[k].name = names[k];
    double sink = 0.0;
    for (int run = 0; run < o.runs; ++run) {
        std::array<std::vector<double>, 4> t;
        for (auto& v : t) v.reserve(static_cast<std::size_t>(o.reps));
        for (int rep = -1; rep < o.reps; ++rep) {
            auto t0 = Clock::now();
            const Extraction ex = extract(grid, 0.0, eo);
            const double fwd = seconds_since(t0);
            t0 = Clock::now();
            const GridGradient gg = chain_gradient(ex.jacobian, cotangent);
            const double bwd = seconds_since(t0);
            t0 = Clock::now();
            const IndexedMesh mt = extract_mt(mt_grid, 0.0, mt_centers);
            const double mt_fwd = seconds_since(t0);
            sink += gg.values.empty() ? 0.0 : gg.values.front();
            sink += static_cast<double>(mt.triangles.size());
            if (rep < 0) continue;
            t[0].push_back(fwd);
            t[1].push_back(bwd);
            t[2].push_back(fwd + bwd);
            t[3].push_back(mt_fwd);
        }
        for (int k = 0; k < 4; ++k) {
            sums[k].run_medians.push_back(median(t[k]));
            sums[k].run_means.push_back(std::accumulate(t[k].begin(), t[k].end(), 0.0) / static_cast<double>(o.reps));
        }
    }
    if (!std::isfinite(sink)) throw Error("bench produced a non-finite checksum");
    for (auto& s : sums) {
        const auto [lo, hi] = std::minmax_element(s.run_medians.begin(), s.run_medians.end());
        const double mean = std::accumulate(s.run_medians.begin(), s.run_medians.end(), 0.0) /
                            static_cast<double>(s.run_medians.size());
        s.median_of_medians = median(s.run_medians);
        s.median_spread = mean > 0.0 ? (*hi - *lo) / mean : 0.0;
        r.timings.push_back(s);
    }
    r.mt_over_diffmc_forward = r.timings[3].median_of_medians / r.timings[0].median_of_medians;
    return r;
}

nlohmann::json to_json(const BenchReport& r) {
    nlohmann::json j{{"res", r.res},
                     {"mt_res", r.mt_res},
                     {"diffmc_triangles", r.diffmc_triangles},
                     {"mt_triangles", r.mt_triangles},
                     {"reps", r.reps},
                     {"runs", r.runs},
                     {"mt_over_diffmc_forward", r.mt_over_diffmc_forward}};
    auto& t = j["timings"] = nlohmann::json::object();
    for (const auto& s : r.timings)
        t[s.name] = {{"run_medians_s", s.run_medians},
                     {"run_means_s", s.run_means},
                     {"median_s", s.median_of_medians},
                     {"median_spread", s.median_spread}};
    return j;
}

}  // namespace dmc
