#include <fstream>
#include <memory>

#include "cli.hpp"
#include "diffmc/diffmc.hpp"
#include "diffmc/fixtures.hpp"
#include "diffmc/optimize.hpp"
#include "diffmc/quality.hpp"

namespace dmc::cli {

namespace {

/// Depth maps from several views stacked into one map, so that a single
/// vsa() call pools the pixels of every view.
DepthMap stacked_depth(const IndexedMesh& mesh, const std::vector<Camera>& cams, int threads) {
    DepthMap out;
    for (const auto& cam : cams) {
        const DepthMap m = render_depth(mesh, cam, threads);
        if (out.width == 0) out.width = m.width;
        if (m.width != out.width) throw Error("all cameras must share one image width");
        out.height += m.height;
        out.depth.insert(out.depth.end(), m.depth.begin(), m.depth.end());
        out.visible.insert(out.visible.end(), m.visible.begin(), m.visible.end());
        out.triangle.insert(out.triangle.end(), m.triangle.begin(), m.triangle.end());
    }
    return out;
}

std::vector<Camera> load_cameras(const std::string& path, int views, int size) {
    if (path.empty()) return orbit_cameras(views, size);
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    std::vector<Camera> cams;
    if (j.is_array())
        for (const auto& c : j) cams.push_back(camera_from_json(c));
    else
        cams.push_back(camera_from_json(j));
    return cams;
}

}  // namespace

void add_metric_verbs(CLI::App& app, Context& ctx) {
    {
        struct Opts {
            std::string a, b, cameras, tau = "0.001..0.1", name = "vsa";
            int steps = 16, views = 4, size = 128;
            double min_vsa = -1.0;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("vsa", description("vsa"));
        sub->add_option("mesh_a", o->a, "First mesh")->required()->check(CLI::ExistingFile);
        sub->add_option("mesh_b", o->b, "Second mesh")->required()->check(CLI::ExistingFile);
        sub->add_option("--tau", o->tau, "Depth tolerances: a comma list or a log-spaced range a..b")->capture_default_str();
        sub->add_option("--steps", o->steps, "Values in a tau range")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--cameras", o->cameras, "Camera JSON (object or array); default is an orbit");
        sub->add_option("--views", o->views, "Orbit views")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--size", o->size, "Orbit image size in pixels")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_option("--min", o->min_vsa, "Check that every value is at least this");
        sub->add_option("--name", o->name, "Output CSV stem")->capture_default_str();
        sub->callback([o, &ctx] {
            const auto cams = load_cameras(o->cameras, o->views, o->size);
            const DepthMap da = stacked_depth(read_mesh(o->a), cams, ctx.g.threads);
            const DepthMap db = stacked_depth(read_mesh(o->b), cams, ctx.g.threads);
            const auto path = ctx.output(o->name + ".csv");
            std::ofstream out(path);
            if (!out) throw Error("cannot write " + path.string());
            out.precision(17);
            out << "tau,vsa\n";
            double lowest = 1.0;
            for (double tau : parse_tau_list(o->tau, o->steps)) {
                const double v = vsa(da, db, tau);
                lowest = std::min(lowest, v);
                out << tau << ',' << v << '\n';
            }
            ctx.log() << "vsa: " << cams.size() << " views, lowest " << lowest << " -> " << path.string() << '\n';
            if (o->min_vsa >= 0.0) ctx.check(lowest >= o->min_vsa, "vsa >= " + std::to_string(o->min_vsa));
        });
    }
    {
        struct Opts {
            std::string a, b;
            double max = -1.0;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("chamfer", description("chamfer"));
        sub->add_option("a", o->a, "Points (x y z lines) or mesh vertices (OBJ/PLY)")->required()->check(CLI::ExistingFile);
        sub->add_option("b", o->b, "Points or mesh")->required()->check(CLI::ExistingFile);
        sub->add_option("--max", o->max, "Check that the distance is at most this");
        sub->callback([o, &ctx] {
            const auto a = read_points(o->a), b = read_points(o->b);
            const double d = chamfer(a, b);
            ctx.log().precision(17);
            ctx.log() << d << '\n';
            if (o->max >= 0.0) ctx.check(d <= o->max, "chamfer <= " + std::to_string(o->max));
        });
    }
    {
        struct Opts {
            std::string field = "sphere", res = "32,64,128,256", name = "reso_sweep";
            bool self_intersection = false;
        };
        auto o = std::make_shared<Opts>();
        auto* sub = app.add_subcommand("reso-sweep", description("reso-sweep"));
        sub->add_option("--field", o->field, "Unwarped built-in field or field JSON")->capture_default_str();
        sub->add_option("--res", o->res, "Comma-separated resolutions")->capture_default_str();
        sub->add_flag("--self-intersection", o->self_intersection, "Include the self-intersection test");
        sub->add_option("--name", o->name, "Output stem")->capture_default_str();
        sub->callback([o, &ctx] {
            const AnalyticField f = parse_field(o->field);
            const auto path = ctx.output(o->name + ".csv");
            std::ofstream out(path);
            if (!out) throw Error("cannot write " + path.string());
            out.precision(17);
            out << "res,vertices,triangles,euler,watertight,manifold,rms,max_abs,mean_signed\n";
            double prev = std::numeric_limits<double>::infinity();
            bool monotone = true, certified = true;
            for (int res : parse_int_list(o->res)) {
                const Extraction ex = extract(DeformableGrid(sample_unit_cube(f, res, ctx.g.threads)), 0.0,
                                              {true, ctx.g.threads});
                const QualityReport q = certify(ex.mesh, {o->self_intersection, ctx.g.threads});
                const DeviationStats s = surface_deviation(ex.mesh, f);
                out << res << ',' << ex.mesh.vertices.size() << ',' << ex.mesh.triangles.size() << ','
                    << q.euler_characteristic << ',' << q.watertight << ',' << q.manifold() << ',' << s.rms << ','
                    << s.max_abs << ',' << s.mean_signed << '\n';
                ctx.log() << "res " << res << ": " << ex.mesh.triangles.size() << " triangles, rms " << s.rms << '\n';
                monotone = monotone && s.rms <= prev;
                certified = certified && q.watertight && q.manifold();
                prev = s.rms;
            }
            ctx.check(monotone, "deviation rms non-increasing with resolution");
            ctx.check(certified, "every mesh certified");
        });
    }
}

}  // namespace dmc::cli
