#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>

#include "cli.hpp"
#include "diffmc/bench.hpp"
#include "diffmc/fixtures.hpp"

namespace dmc::cli {

void add_bench_verb(CLI::App& app, Context& ctx) {
    struct Opts {
        std::string field = "sphere", name = "bench";
        int res = 32, reps = 1000, runs = 3;
        double max_variance = 0.05;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = app.add_subcommand("bench", description("bench"));
    sub->add_option("--field", o->field, "Field to extract")->capture_default_str();
    sub->add_option("--res", o->res, "DiffMC grid nodes per axis")->check(CLI::Range(4, 512))->capture_default_str();
    sub->add_option("--reps", o->reps, "Repetitions per run")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--runs", o->runs, "Independent runs compared for stability")->check(CLI::Range(2, 100))->capture_default_str();
    sub->add_option("--max-variance", o->max_variance, "Check (max - min) / mean of run medians below this")
        ->capture_default_str();
    sub->add_option("--name", o->name, "Output JSON stem")->capture_default_str();
    sub->callback([o, &ctx] {
        BenchOptions opt;
        opt.res = o->res;
        opt.reps = o->reps;
        opt.runs = o->runs;
        opt.seed = ctx.g.seed;
        opt.threads = ctx.g.threads;
        const BenchReport r = run_bench(parse_field(o->field), opt);
        write_json(to_json(r), ctx.output(o->name + ".json"));
        ctx.log() << "bench: DiffMC res " << r.res << " (" << r.diffmc_triangles << " triangles), MT res " << r.mt_res
                  << " (" << r.mt_triangles << " triangles), " << o->reps << " reps x " << o->runs << " runs\n";
        for (const auto& t : r.timings)
            ctx.log() << "  " << t.name << ": median " << t.median_of_medians * 1e3 << " ms, spread "
                      << t.median_spread * 100.0 << "%\n";
        for (const auto& t : r.timings)
            ctx.check(t.median_spread < o->max_variance, t.name + " run-to-run median spread < " +
                                                             std::to_string(o->max_variance));
    });
}

}  // namespace dmc::cli
