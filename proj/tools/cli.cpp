#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace dmc::cli {

const std::vector<VerbInfo>& verbs() {
    static const std::vector<VerbInfo> list{
        {"extract", "Extract a differentiable marching-cubes mesh and certify it"},
        {"extract-mt", "Extract a marching-tetrahedra baseline mesh"},
        {"demo2d", "2D contouring of a warped line or circle on squares vs triangles"},
        {"validate", "Check a mesh for watertightness, manifoldness and self-intersections"},
        {"vsa", "Visible surface agreement curve of two meshes over a tau list"},
        {"chamfer", "Symmetric chamfer distance between two point sets or meshes"},
        {"optimize", "Fit a grid to a target through differentiable extraction"},
        {"finetune", "Move mesh vertices toward a target, keeping triangles fixed"},
        {"gradcheck", "Compare analytic grid gradients with central differences"},
        {"shade", "Bake appearance colors onto mesh vertices or evaluate one point"},
        {"bench", "Time extraction forward/backward against the tetrahedral baseline"},
        {"reso-sweep", "Surface deviation statistics across grid resolutions"},
    };
    return list;
}

std::string description(const std::string& verb) {
    for (const auto& v : verbs())
        if (v.name == verb) return v.description;
    throw Error("no verb " + verb);
}

std::filesystem::path Context::output(const std::string& name) const {
    std::filesystem::create_directories(g.out_dir);
    return g.out_dir / name;
}

void Context::check(bool ok, const std::string& what) {
    log() << (ok ? "check passed: " : "check FAILED: ") << what << '\n';
    if (!ok && g.assert_checks) status = kCheckFailed;
}

Vec3 parse_vec3(const std::string& s) {
    const auto v = parse_double_list(s);
    if (v.size() != 3) throw Error("expected three comma-separated numbers, got '" + s + "'");
    return {v[0], v[1], v[2]};
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error("'" + item + "' is not a number");
        }
    }
    if (out.empty()) throw Error("empty number list");
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (double v : parse_double_list(s)) {
        if (v != std::floor(v)) throw Error("expected integers in '" + s + "'");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<double> parse_tau_list(const std::string& s, int steps) {
    const auto dots = s.find("..");
    if (dots == std::string::npos) return parse_double_list(s);
    const double a = parse_double_list(s.substr(0, dots)).at(0);
    const double b = parse_double_list(s.substr(dots + 2)).at(0);
    if (!(a > 0.0 && b >= a)) throw Error("tau range needs 0 < a <= b");
    if (steps < 1) throw Error("tau range needs at least one step");
    std::vector<double> out;
    for (int i = 0; i < steps; ++i) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        out.push_back(i == steps - 1 ? b : a * std::pow(b / a, t));
    }
    return out;
}

std::vector<Camera> orbit_cameras(int count, int size) {
    std::vector<Camera> cams;
    const Vec3 center(0.5, 0.5, 0.5);
    for (int i = 0; i < count; ++i) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
        const double elev = i % 2 == 0 ? 0.35 : -0.35;
        const Vec3 eye = center + 2.0 * Vec3(std::cos(phi) * std::cos(elev), std::sin(phi) * std::cos(elev),
                                             std::sin(elev));
        cams.push_back(Camera::look_at(eye, center, Vec3(0, 0, 1), size, size, 40.0));
    }
    return cams;
}

void write_points(const std::vector<Vec3>& points, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    for (const auto& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Context ctx;
    ctx.out = &out;
    CLI::App app{"Differentiable marching cubes toolkit"};
    app.name("diffmc");
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--threads", ctx.g.threads, "Worker threads (0 = all available)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", ctx.g.seed, "Seed for every randomized input");
    app.add_option("--precision", ctx.g.precision, "Floating-point width of binary outputs")
        ->check(CLI::IsMember({"float32", "float64"}));
    app.add_option("-o,--out", ctx.g.out_dir, "Output directory");
    app.add_flag("--assert", ctx.g.assert_checks, "Exit with code 1 when a reported check fails");

    add_extract_verbs(app, ctx);
    add_metric_verbs(app, ctx);
    add_optimize_verbs(app, ctx);
    add_texture_verbs(app, ctx);
    add_bench_verb(app, ctx);

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return ctx.status;
}

}  // namespace dmc::cli
