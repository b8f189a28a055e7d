#include <memory>

#include "cli.hpp"
#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/marching_tets.hpp"
#include "diffmc/quality.hpp"

namespace dmc::cli {

namespace {

/// Grid input shared by the extraction verbs.
struct GridSource {
    std::string field = "sphere";
    std::string grid_path;
    int res = 32;
    double warp = 0.0;
    bool warp_set = false;
    double displacement = 0.0;

    void add(CLI::App* sub) {
        sub->add_option("--field", field, "Built-in field (sphere, box, torus, plane, union) or field JSON file")
            ->capture_default_str();
        sub->add_option("--grid", grid_path, "Grid header written by a previous run (overrides --field)");
        sub->add_option("--res", res, "Nodes per axis over the unit cube")->check(CLI::Range(2, 2048))->capture_default_str();
        sub->add_option_function<double>(
               "--warp", [this](double s) { warp = s, warp_set = true; }, "Apply exp(s) - 1 - SHIFT to the field");
        sub->add_option("--displace", displacement,
                        "Random node displacements up to this fraction of the spacing (seeded)")
            ->check(CLI::Range(0.0, 0.5));
    }

    bool from_field() const { return grid_path.empty(); }

    AnalyticField analytic() const {
        AnalyticField f = parse_field(field);
        return warp_set ? f.warped(warp) : f;
    }

    DeformableGrid load(const Context& ctx) const {
        DeformableGrid g;
        if (!from_field()) {
            g = read_grid(grid_path);
        } else {
            g = DeformableGrid(sample_unit_cube(analytic(), res, ctx.g.threads));
        }
        if (displacement > 0.0) {
            auto d = with_random_displacement(g.base, displacement, ctx.g.seed);
            if (g.has_displacement())
                for (std::size_t n = 0; n < d.displacement.size(); ++n) d.displacement[n] += g.displacement[n];
            g = clamp_displacements(d);
        }
        return g;
    }
};

std::string mesh_name(const std::string& stem, const std::string& format) {
    if (format != "obj" && format != "ply") throw Error("mesh format must be obj or ply");
    return stem + "." + format;
}

}  // namespace

void add_extract_verbs(CLI::App& app, Context& ctx) {
    {
        struct Opts {
            GridSource src;
            double iso = 0.0;
            bool open = false;
            bool no_self_intersection = false;
            bool jacobian = false;
            std::string name = "mesh";
            std::string format = "obj";
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("extract", description("extract"));
        o->src.add(sub);
        sub->add_option("--iso", o->iso, "Iso level; inside is below it")->capture_default_str();
        sub->add_flag("--open", o->open, "Do not close the surface at the grid boundary");
        sub->add_flag("--no-self-intersection", o->no_self_intersection, "Skip the self-intersection test");
        sub->add_flag("--jacobian", o->jacobian, "Also write the vertex Jacobian as triplets");
        sub->add_option("--name", o->name, "Output file stem")->capture_default_str();
        sub->add_option("--format", o->format, "Mesh format")->check(CLI::IsMember({"obj", "ply"}))->capture_default_str();
        sub->callback([o, &ctx] {
            const DeformableGrid grid = o->src.load(ctx);
            const Extraction ex = extract(grid, o->iso, {!o->open, ctx.g.threads});
            const QualityReport q = certify(ex.mesh, {!o->no_self_intersection, ctx.g.threads});
            const auto mesh_path = ctx.output(mesh_name(o->name, o->format));
            write_mesh(ex.mesh, mesh_path);
            nlohmann::json report = to_json(q);
            report["perturbed_nodes"] = ex.info.perturbed_nodes;
            report["closed_nodes"] = ex.info.closed_nodes;
            report["clamped_vertices"] = ex.info.clamped_vertices;
            report["mesh"] = mesh_path.filename().string();
            write_json(report, ctx.output(o->name + ".report.json"));
            if (o->jacobian) write_jacobian_triplets(ex.jacobian, ctx.output(o->name + ".jacobian.txt"));
            ctx.log() << "extract: " << ex.mesh.vertices.size() << " vertices, " << ex.mesh.triangles.size()
                      << " triangles, euler " << q.euler_characteristic << " -> " << mesh_path.string() << '\n';
            ctx.check(q.watertight, "watertight");
            ctx.check(q.manifold(), o->no_self_intersection ? "manifold connectivity" : "manifold");
        });
    }
    {
        struct Opts {
            GridSource src;
            double iso = 0.0;
            bool open = false;
            std::string centers = "field";
            std::string name = "mesh_mt";
            std::string format = "obj";
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("extract-mt", description("extract-mt"));
        o->src.add(sub);
        sub->add_option("--iso", o->iso, "Iso level; inside is below it")->capture_default_str();
        sub->add_flag("--open", o->open, "Do not close the surface at the grid boundary");
        sub->add_option("--centers", o->centers, "Cell-center values: sampled from the field or mean of corners")
            ->check(CLI::IsMember({"field", "mean"}))
            ->capture_default_str();
        sub->add_option("--name", o->name, "Output file stem")->capture_default_str();
        sub->add_option("--format", o->format, "Mesh format")->check(CLI::IsMember({"obj", "ply"}))->capture_default_str();
        sub->callback([o, &ctx] {
            const DeformableGrid grid = o->src.load(ctx);
            std::vector<double> centers;
            if (o->centers == "field") {
                if (!o->src.from_field()) throw Error("--centers field needs --field; use --centers mean with --grid");
                centers = sample_cell_centers(o->src.analytic(), grid);
            }
            const IndexedMesh mesh = extract_mt(grid, o->iso, centers, {!o->open});
            const QualityReport q = check_watertight(mesh);
            const auto mesh_path = ctx.output(mesh_name(o->name, o->format));
            write_mesh(mesh, mesh_path);
            nlohmann::json report = to_json(q);
            report["mesh"] = mesh_path.filename().string();
            write_json(report, ctx.output(o->name + ".report.json"));
            ctx.log() << "extract-mt: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
                      << " triangles, euler " << q.euler_characteristic << " -> " << mesh_path.string() << '\n';
            ctx.check(q.watertight, "watertight");
        });
    }
    {
        struct Opts {
            std::string shape = "line";
            std::string mode = "both";
            int res = 16;
            double shift = 0.1;
            bool no_warp = false;
            double offset = 0.5;
            double radius = 0.3;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("demo2d", description("demo2d"));
        sub->add_option("--shape", o->shape, "Zero set")->check(CLI::IsMember({"line", "circle"}))->capture_default_str();
        sub->add_option("--mode", o->mode, "Cell type")->check(CLI::IsMember({"squares", "triangles", "both"}))->capture_default_str();
        sub->add_option("--res", o->res, "Nodes per axis")->check(CLI::Range(2, 4096))->capture_default_str();
        sub->add_option("--shift", o->shift, "Warp shift t in exp(s) - 1 - t")->capture_default_str();
        sub->add_flag("--no-warp", o->no_warp, "Contour the plain signed distance");
        sub->add_option("--offset", o->offset, "Line x = offset of the unwarped distance")->capture_default_str();
        sub->add_option("--radius", o->radius, "Circle radius")->capture_default_str();
        sub->callback([o, &ctx] {
            Field2D f = o->shape == "line" ? Field2D::line({1.0, 0.0}, o->offset) : Field2D::circle({0.5, 0.5}, o->radius);
            if (!o->no_warp) f = f.warped(o->shift);
            nlohmann::json summary;
            std::vector<Demo2dMode> modes;
            if (o->mode != "triangles") modes.push_back(Demo2dMode::Squares);
            if (o->mode != "squares") modes.push_back(Demo2dMode::Triangles);
            for (Demo2dMode m : modes) {
                const Demo2dResult r = demo_2d(f, m, o->res);
                const std::string stem = "demo2d_" + to_string(m);
                write_svg(r, ctx.output(stem + ".svg"), o->res);
                write_deviation_csv(r, ctx.output(stem + ".csv"));
                summary[to_string(m)] = {{"vertices", r.stats.count},
                                         {"rms", r.stats.rms},
                                         {"max_abs", r.stats.max_abs},
                                         {"mean_signed", r.stats.mean_signed},
                                         {"stddev", r.stats.stddev}};
                ctx.log() << "demo2d " << to_string(m) << ": " << r.stats.count << " vertices, mean offset "
                          << r.stats.mean_signed << ", stddev " << r.stats.stddev << '\n';
            }
            write_json(summary, ctx.output("demo2d.json"));
        });
    }
    {
        struct Opts {
            std::string mesh;
            bool no_self_intersection = false;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("validate", description("validate"));
        sub->add_option("mesh", o->mesh, "OBJ or PLY mesh")->required()->check(CLI::ExistingFile);
        sub->add_flag("--no-self-intersection", o->no_self_intersection, "Skip the self-intersection test");
        sub->callback([o, &ctx] {
            const IndexedMesh mesh = read_mesh(o->mesh);
            const QualityReport q = certify(mesh, {!o->no_self_intersection, ctx.g.threads});
            ctx.log() << to_json(q).dump(2) << '\n';
            // validate always reports failure through its exit code.
            if (!q.watertight || !q.manifold()) ctx.status = kCheckFailed;
        });
    }
}

}  // namespace dmc::cli
