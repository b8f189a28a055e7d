#include <fstream>
#include <memory>

#include "cli.hpp"
#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/optimize.hpp"
#include "diffmc/quality.hpp"

namespace dmc::cli {

namespace {

/// Target options shared by optimize, finetune and gradcheck.
struct TargetSource {
    std::string points;
    std::string field = "torus";
    std::size_t count = 4096;
    std::string loss = "chamfer";
    int views = 4;
    int size = 64;
    int mesh_res = 128;

    void add(CLI::App* sub, bool with_depth) {
        sub->add_option("--target", points, "Target points (x y z lines) or mesh (OBJ/PLY)");
        sub->add_option("--target-field", field, "Field whose surface is sampled when --target is absent")
            ->capture_default_str();
        sub->add_option("--target-count", count, "Sampled target points")->check(CLI::PositiveNumber)->capture_default_str();
        if (with_depth) {
            sub->add_option("--loss", loss, "Data term")->check(CLI::IsMember({"chamfer", "depth"}))->capture_default_str();
            sub->add_option("--views", views, "Depth views on an orbit")->check(CLI::PositiveNumber)->capture_default_str();
            sub->add_option("--size", size, "Depth image size")->check(CLI::PositiveNumber)->capture_default_str();
        }
    }

    TargetSpec load(const Context& ctx) const {
        TargetSpec t;
        if (loss == "chamfer") {
            t.points = points.empty() ? sample_surface_points(parse_field(field), count, ctx.g.seed) : read_points(points);
            return t;
        }
        const IndexedMesh mesh =
            points.empty() ? extract(DeformableGrid(sample_unit_cube(parse_field(field), mesh_res, ctx.g.threads)), 0.0,
                                     {true, ctx.g.threads})
                                 .mesh
                           : read_mesh(points);
        for (const auto& cam : orbit_cameras(views, size)) t.views.push_back({cam, render_depth(mesh, cam, ctx.g.threads)});
        return t;
    }
};

/// Optimizer settings: an optional JSON file, then individual overrides.
struct ConfigSource {
    std::string path;
    int iterations = -1;
    double lr_values = -1.0, lr_displacement = -1.0, lr_vertices = -1.0, area_weight = -1.0, truncation = -1.0;
    std::string optimizer;
    bool values_only = false;

    void add(CLI::App* sub) {
        sub->add_option("--config", path, "Optimizer JSON; flags below override it")->check(CLI::ExistingFile);
        sub->add_option("--iterations", iterations, "Gradient steps");
        sub->add_option("--lr-values", lr_values, "Learning rate of grid values");
        sub->add_option("--lr-displacement", lr_displacement, "Learning rate of displacements");
        sub->add_option("--lr-vertices", lr_vertices, "Learning rate of vertex positions (finetune)");
        sub->add_option("--area-weight", area_weight, "Weight of the total surface area term");
        sub->add_option("--truncation", truncation, "Value band around iso in grid spacings (0 disables)");
        sub->add_option("--optimizer", optimizer, "plain, momentum or adam")
            ->check(CLI::IsMember({"plain", "momentum", "adam"}));
        sub->add_flag("--values-only", values_only, "Keep displacements fixed");
    }

    OptimizeConfig load(const Context& ctx) const {
        OptimizeConfig c = path.empty() ? OptimizeConfig{} : load_config(path);
        if (iterations >= 0) c.iterations = iterations;
        if (lr_values > 0.0) c.lr_values = lr_values;
        if (lr_displacement > 0.0) c.lr_displacement = lr_displacement;
        if (lr_vertices > 0.0) c.lr_vertices = lr_vertices;
        if (area_weight >= 0.0) c.area_weight = area_weight;
        if (truncation >= 0.0) c.truncation = truncation;
        if (!optimizer.empty()) c.optimizer = optimizer_from_string(optimizer);
        if (values_only) c.optimize_displacement = false;
        c.seed = ctx.g.seed;
        c.threads = ctx.g.threads;
        c.validate();
        return c;
    }
};

}  // namespace

void add_optimize_verbs(CLI::App& app, Context& ctx) {
    {
        struct Opts {
            TargetSource target;
            ConfigSource config;
            std::string init = "sphere", init_grid, name = "fit";
            int res = 32;
            double max_ratio = -1.0;
            long long expect_euler = 0;
            bool check_euler = false;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("optimize", description("optimize"));
        sub->add_option("--init", o->init, "Initial field")->capture_default_str();
        sub->add_option("--init-grid", o->init_grid, "Initial grid header (overrides --init)")->check(CLI::ExistingFile);
        sub->add_option("--res", o->res, "Grid nodes per axis")->check(CLI::Range(2, 1024))->capture_default_str();
        o->target.add(sub, true);
        o->config.add(sub);
        sub->add_option("--max-ratio", o->max_ratio, "Check final loss <= ratio * initial loss");
        sub->add_option_function<long long>(
            "--expect-euler", [o](long long k) { o->expect_euler = k, o->check_euler = true; },
            "Check the final Euler characteristic");
        sub->add_option("--name", o->name, "Output file stem")->capture_default_str();
        sub->callback([o, &ctx] {
            OptimizeConfig cfg = o->config.load(ctx);
            cfg.loss = loss_from_string(o->target.loss);
            const TargetSpec target = o->target.load(ctx);
            const DeformableGrid init = o->init_grid.empty()
                                            ? DeformableGrid(sample_unit_cube(parse_field(o->init), o->res, ctx.g.threads))
                                            : read_grid(o->init_grid);
            const FitResult r = fit_grid(init, target, cfg, [&](const IterationLog& e) {
                ctx.log() << "iter " << e.iteration << " loss " << e.loss << " triangles " << e.triangles << " euler "
                          << e.euler_characteristic << '\n';
            });
            write_mesh(r.mesh, ctx.output(o->name + ".obj"));
            write_grid(r.grid, ctx.output(o->name + ".grid.json"), ctx.precision());
            write_trace_csv(r.trace, ctx.output(o->name + ".trace.csv"));
            nlohmann::json report = to_json(r.report);
            report["config"] = to_json(cfg);
            report["initial_loss"] = r.trace.front().loss;
            report["final_loss"] = r.trace.back().loss;
            report["rollbacks"] = r.rollbacks;
            write_json(report, ctx.output(o->name + ".report.json"));
            const double ratio = r.trace.back().loss / r.trace.front().loss;
            ctx.log() << "optimize: loss " << r.trace.front().loss << " -> " << r.trace.back().loss << " (ratio "
                      << ratio << "), euler " << r.report.euler_characteristic << '\n';
            ctx.check(r.report.watertight && r.report.manifold(), "final mesh certified");
            if (o->max_ratio >= 0.0) ctx.check(ratio <= o->max_ratio, "loss ratio <= " + std::to_string(o->max_ratio));
            if (o->check_euler)
                ctx.check(r.report.euler_characteristic == o->expect_euler,
                          "euler characteristic == " + std::to_string(o->expect_euler));
        });
    }
    {
        struct Opts {
            TargetSource target;
            ConfigSource config;
            std::string mesh, name = "finetuned";
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("finetune", description("finetune"));
        sub->add_option("mesh", o->mesh, "Input mesh")->required()->check(CLI::ExistingFile);
        o->target.add(sub, true);
        o->config.add(sub);
        sub->add_option("--name", o->name, "Output file stem")->capture_default_str();
        sub->callback([o, &ctx] {
            const OptimizeConfig cfg = o->config.load(ctx);
            const TargetSpec target = o->target.load(ctx);
            const IndexedMesh mesh = read_mesh(o->mesh);
            const FinetuneResult r = finetune_vertices(mesh, target, cfg);
            write_mesh(r.mesh, ctx.output(o->name + ".obj"));
            std::ofstream trace(ctx.output(o->name + ".trace.csv"));
            trace.precision(17);
            trace << "iteration,loss\n";
            for (std::size_t i = 0; i < r.loss_trace.size(); ++i) trace << i << ',' << r.loss_trace[i] << '\n';
            const QualityReport q = check_watertight(r.mesh);
            if (!r.loss_trace.empty())
                ctx.log() << "finetune: loss " << r.loss_trace.front() << " -> " << r.loss_trace.back() << '\n';
            ctx.check(r.mesh.triangles == mesh.triangles, "triangle index buffer unchanged");
            ctx.check(q.watertight, "watertight");
        });
    }
    {
        struct Opts {
            TargetSource target;
            std::string field = "sphere", name = "gradcheck";
            int res = 16;
            double iso = 0.0, displacement = 0.0, tol = 1e-4, step = 1e-6;
            std::size_t samples = 64;
            bool values = true, displacements = true;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("gradcheck", description("gradcheck"));
        sub->add_option("--field", o->field, "Grid field")->capture_default_str();
        sub->add_option("--res", o->res, "Grid nodes per axis")->check(CLI::Range(2, 512))->capture_default_str();
        sub->add_option("--iso", o->iso, "Iso level")->capture_default_str();
        sub->add_option("--displace", o->displacement, "Random displacement fraction of the spacing")
            ->check(CLI::Range(0.0, 0.5));
        o->target.add(sub, true);
        sub->add_option("--samples", o->samples, "Parameters checked")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--step", o->step, "Step as a fraction of the spacing")->capture_default_str();
        sub->add_option("--tol", o->tol, "Check max relative error below this")->capture_default_str();
        sub->add_flag("!--no-values", o->values, "Skip grid values");
        sub->add_flag("!--no-displacement", o->displacements, "Skip displacements");
        sub->add_option("--name", o->name, "Output JSON stem")->capture_default_str();
        sub->callback([o, &ctx] {
            const ScalarGrid g = sample_unit_cube(parse_field(o->field), o->res, ctx.g.threads);
            const DeformableGrid grid =
                o->displacement > 0.0 ? with_random_displacement(g, o->displacement, ctx.g.seed) : DeformableGrid(g);
            GradcheckOptions opt;
            opt.iso = o->iso;
            opt.samples = o->samples;
            opt.seed = ctx.g.seed;
            opt.values = o->values;
            opt.displacement = o->displacements;
            opt.step_scale = o->step;
            opt.threads = ctx.g.threads;
            const GradcheckReport r = gradcheck(grid, o->target.load(ctx), opt);
            write_json(to_json(r), ctx.output(o->name + ".json"));
            ctx.log() << "gradcheck: " << r.checked.size() << " checked, " << r.excluded.size()
                      << " excluded, max rel error " << r.max_rel_error << '\n';
            ctx.check(!r.checked.empty() && r.max_rel_error < o->tol, "max relative error < " + std::to_string(o->tol));
        });
    }
}

}  // namespace dmc::cli
