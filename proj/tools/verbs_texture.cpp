#include <fstream>
#include <memory>

#include "cli.hpp"
#include "diffmc/neural_texture.hpp"

namespace dmc::cli {

void add_texture_verbs(CLI::App& app, Context& ctx) {
    struct Opts {
        std::string mesh, texture, decoder = "fast", weights, view = "0,0,1", point, ray_origin, ray_dir,
                                   name = "shaded";
        int ray_samples = 16;
        double ray_far = 1.0;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = app.add_subcommand("shade", description("shade"));
    sub->add_option("--texture", o->texture, "Texture manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--decoder", o->decoder, "hq (MLP) or fast (SH)")->check(CLI::IsMember({"hq", "fast"}))->capture_default_str();
    sub->add_option("--weights", o->weights, "HQ decoder weight manifest")->check(CLI::ExistingFile);
    sub->add_option("--view", o->view, "Viewing direction x,y,z")->capture_default_str();
    sub->add_option("--mesh", o->mesh, "Bake colors onto this mesh and write a colored PLY")->check(CLI::ExistingFile);
    sub->add_option("--point", o->point, "Print the color at one point x,y,z");
    sub->add_option("--ray-origin", o->ray_origin, "Print colors at samples along a ray from here");
    sub->add_option("--ray-dir", o->ray_dir, "Ray direction; also the viewing direction of its samples");
    sub->add_option("--ray-samples", o->ray_samples, "Samples along the ray")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--ray-far", o->ray_far, "Ray length")->capture_default_str();
    sub->add_option("--name", o->name, "Output file stem")->capture_default_str();
    sub->callback([o, &ctx] {
        const VmTexture tex = load_texture(o->texture);
        Decoder dec;
        dec.kind = o->decoder == "hq" ? DecoderKind::Hq : DecoderKind::Fast;
        if (dec.kind == DecoderKind::Hq) {
            if (o->weights.empty()) throw Error("--decoder hq needs --weights");
            dec.hq = load_hq_decoder(o->weights);
        }
        const Vec3 view = parse_vec3(o->view);
        const auto color_at = [&](const Vec3& p, const Vec3& d) {
            const FeatureSample f = eval_features(tex, p);
            return decode_color(dec, f.features, d);
        };
        ctx.log().precision(12);
        bool did_something = false;
        if (!o->point.empty()) {
            const Vec3 p = parse_vec3(o->point);
            ctx.log() << "color " << color_at(p, view).transpose() << '\n';
            did_something = true;
        }
        if (!o->ray_origin.empty() || !o->ray_dir.empty()) {
            if (o->ray_origin.empty() || o->ray_dir.empty()) throw Error("--ray-origin and --ray-dir go together");
            const Vec3 origin = parse_vec3(o->ray_origin), dir = parse_vec3(o->ray_dir);
            if (!(dir.norm() > 0.0)) throw Error("ray direction must be non-zero");
            const Vec3 d = dir.normalized();
            for (int i = 0; i < o->ray_samples; ++i) {
                const double t = o->ray_samples == 1 ? 0.0 : o->ray_far * i / (o->ray_samples - 1);
                ctx.log() << "t " << t << " color " << color_at(origin + t * d, d).transpose() << '\n';
            }
            did_something = true;
        }
        if (!o->mesh.empty()) {
            const IndexedMesh mesh = read_mesh(o->mesh);
            const IndexedMesh colored = bake_vertex_colors(mesh, tex, dec, view, ctx.g.threads);
            const auto path = ctx.output(o->name + ".ply");
            write_ply(colored, path);
            ctx.log() << "shade: " << colored.vertices.size() << " vertices -> " << path.string() << '\n';
            did_something = true;
        }
        if (!did_something) throw Error("shade needs --mesh, --point or --ray-origin/--ray-dir");
    });
}

}  // namespace dmc::cli
