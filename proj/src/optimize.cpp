#include "diffmc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "diffmc/parallel.hpp"

namespace dmc {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Plain: return "plain";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::Adam: return "adam";
    }
    return "?";
}

std::string to_string(LossKind k) { return k == LossKind::Chamfer ? "chamfer" : "depth-l2"; }

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "plain" || s == "sgd") return OptimizerKind::Plain;
    if (s == "momentum") return OptimizerKind::Momentum;
    if (s == "adam") return OptimizerKind::Adam;
    throw Error("unknown optimizer '" + s + "' (expected plain, momentum or adam)");
}

LossKind loss_from_string(const std::string& s) {
    if (s == "chamfer") return LossKind::Chamfer;
    if (s == "depth-l2" || s == "depth") return LossKind::DepthL2;
    throw Error("unknown loss '" + s + "' (expected chamfer or depth-l2)");
}

void OptimizeConfig::validate() const {
    if (iterations < 0) throw Error("iterations must be >= 0");
    for (double lr : {lr_values, lr_displacement, lr_vertices})
        if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("learning rates must be positive and finite");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
    if (!std::isfinite(iso)) throw Error("iso must be finite");
    if (!(area_weight >= 0.0) || !std::isfinite(area_weight)) throw Error("area_weight must be >= 0");
    if (!(truncation >= 0.0) || !std::isfinite(truncation)) throw Error("truncation must be >= 0");
    if (smoothing_passes < 0) throw Error("smoothing_passes must be >= 0");
    if (log_every < 0) throw Error("log_every must be >= 0");
    if (max_retries < 0) throw Error("max_retries must be >= 0");
}

nlohmann::json to_json(const OptimizeConfig& c) {
    return {
        {"iterations", c.iterations},
        {"lr_values", c.lr_values},
        {"lr_displacement", c.lr_displacement},
        {"lr_vertices", c.lr_vertices},
        {"optimizer", to_string(c.optimizer)},
        {"momentum", c.momentum},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"epsilon", c.epsilon},
        {"loss", to_string(c.loss)},
        {"area_weight", c.area_weight},
        {"truncation", c.truncation},
        {"normal_projection", c.normal_projection},
        {"smoothing_passes", c.smoothing_passes},
        {"iso", c.iso},
        {"optimize_values", c.optimize_values},
        {"optimize_displacement", c.optimize_displacement},
        {"clamp_displacement", c.clamp_displacement},
        {"closed", c.closed},
        {"log_every", c.log_every},
        {"seed", c.seed},
        {"max_retries", c.max_retries},
        {"threads", c.threads},
    };
}

OptimizeConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("optimizer config must be a JSON object");
    OptimizeConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "iterations") c.iterations = value.get<int>();
            else if (key == "lr_values") c.lr_values = value.get<double>();
            else if (key == "lr_displacement") c.lr_displacement = value.get<double>();
            else if (key == "lr_vertices") c.lr_vertices = value.get<double>();
            else if (key == "optimizer") c.optimizer = optimizer_from_string(value.get<std::string>());
            else if (key == "momentum") c.momentum = value.get<double>();
            else if (key == "beta1") c.beta1 = value.get<double>();
            else if (key == "beta2") c.beta2 = value.get<double>();
            else if (key == "epsilon") c.epsilon = value.get<double>();
            else if (key == "loss") c.loss = loss_from_string(value.get<std::string>());
            else if (key == "area_weight") c.area_weight = value.get<double>();
            else if (key == "truncation") c.truncation = value.get<double>();
            else if (key == "normal_projection") c.normal_projection = value.get<bool>();
            else if (key == "smoothing_passes") c.smoothing_passes = value.get<int>();
            else if (key == "iso") c.iso = value.get<double>();
            else if (key == "optimize_values") c.optimize_values = value.get<bool>();
            else if (key == "optimize_displacement") c.optimize_displacement = value.get<bool>();
            else if (key == "clamp_displacement") c.clamp_displacement = value.get<bool>();
            else if (key == "closed") c.closed = value.get<bool>();
            else if (key == "log_every") c.log_every = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "max_retries") c.max_retries = value.get<int>();
            else if (key == "threads") c.threads = value.get<int>();
            else throw Error("unknown optimizer config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid optimizer config: ") + e.what());
    }
    c.validate();
    return c;
}

OptimizeConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

LossKind TargetSpec::kind() const {
    if (points.empty() && views.empty()) throw Error("target is empty");
    if (!points.empty() && !views.empty()) throw Error("target mixes points and depth views");
    return points.empty() ? LossKind::DepthL2 : LossKind::Chamfer;
}

std::vector<Vec3> sample_surface_points(const AnalyticField& field, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto grad = [&](const Vec3& p) {
        constexpr double e = 1e-6;
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 d = Vec3::Zero();
            d[a] = e;
            g[a] = (field(p + d) - field(p - d)) / (2 * e);
        }
        return g;
    };
    std::vector<Vec3> out;
    out.reserve(count);
    const std::size_t budget = 1000 * count + 1000;
    for (std::size_t attempt = 0; out.size() < count && attempt < budget; ++attempt) {
        Vec3 p(unit(rng), unit(rng), unit(rng));
        if (std::abs(field(p)) > 0.05) continue;
        for (int it = 0; it < 32; ++it) {
            const double f = field(p);
            if (std::abs(f) < 1e-12) break;
            const Vec3 g = grad(p);
            const double g2 = g.squaredNorm();
            if (!(g2 > 0.0)) break;
            p -= f / g2 * g;
        }
        if (std::abs(field(p)) < 1e-9 && (p.array() >= 0.0).all() && (p.array() <= 1.0).all()) out.push_back(p);
    }
    if (out.size() < count) throw Error("could not place " + std::to_string(count) + " points on the surface");
    return out;
}

std::vector<Vec3> read_points(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".obj" || ext == ".ply") return read_mesh(path).vertices;
    std::ifstream in(path);
    if (!in) throw Error("cannot open points file " + path.string());
    std::vector<Vec3> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Vec3 p;
        if (!(ss >> p.x() >> p.y() >> p.z()))
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected three numbers");
        pts.push_back(p);
    }
    if (pts.empty()) throw Error("points file " + path.string() + " is empty");
    return pts;
}

namespace {

LossResult chamfer_loss(const IndexedMesh& mesh, std::span<const Vec3> targets, int threads) {
    const auto& verts = mesh.vertices;
    const PointIndex target_index(targets), vertex_index(verts);
    const std::size_t nv = verts.size(), nt = targets.size();
    std::vector<PointIndex::Hit> v_to_t(nv), t_to_v(nt);
    parallel_chunks(nv, std::max<std::size_t>(1, nv / 2048), threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t v = b; v < e; ++v) v_to_t[v] = target_index.nearest(verts[v]);
    });
    parallel_chunks(nt, std::max<std::size_t>(1, nt / 2048), threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t t = b; t < e; ++t) t_to_v[t] = vertex_index.nearest(targets[t]);
    });
    LossResult r;
    r.grad.assign(nv, Vec3::Zero());
    r.signature.reserve(nv + nt);
    r.terms.reserve(nv + nt);
    double sum_v = 0.0, sum_t = 0.0;
    const double inv_v = 1.0 / static_cast<double>(nv), inv_t = 1.0 / static_cast<double>(nt);
    for (std::size_t v = 0; v < nv; ++v) {
        sum_v += v_to_t[v].distance_squared;
        r.terms.push_back(v_to_t[v].distance_squared * inv_v);
        r.grad[v] += (2.0 * inv_v) * (verts[v] - targets[v_to_t[v].index]);
        r.signature.push_back(v_to_t[v].index);
    }
    for (std::size_t t = 0; t < nt; ++t) {
        sum_t += t_to_v[t].distance_squared;
        r.terms.push_back(t_to_v[t].distance_squared * inv_t);
        r.grad[t_to_v[t].index] += (2.0 * inv_t) * (verts[t_to_v[t].index] - targets[t]);
        r.signature.push_back(t_to_v[t].index);
    }
    r.loss = sum_v * inv_v + sum_t * inv_t;
    return r;
}

LossResult depth_loss(const IndexedMesh& mesh, std::span<const DepthView> views, int threads) {
    LossResult r;
    r.grad.assign(mesh.vertices.size(), Vec3::Zero());
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& view : views) {
        const DepthMap map = render_depth(mesh, view.camera, threads);
        if (map.width != view.depth.width || map.height != view.depth.height)
            throw Error("target depth map size does not match its camera");
        r.signature.insert(r.signature.end(), map.triangle.begin(), map.triangle.end());
        for (int v = 0; v < map.height; ++v) {
            for (int u = 0; u < map.width; ++u) {
                const std::size_t px = static_cast<std::size_t>(v) * static_cast<std::size_t>(map.width) +
                                       static_cast<std::size_t>(u);
                if (!map.visible[px] || !view.depth.visible[px]) continue;
                const double res = map.depth[px] - view.depth.depth[px];
                sum += res * res;
                r.terms.push_back(res * res);
                ++count;
                const auto t = static_cast<std::uint32_t>(map.triangle[px]);
                const auto d = depth_hit_derivative(mesh, view.camera, t, pixel_ray(view.camera, u, v));
                for (int k = 0; k < 3; ++k) r.grad[mesh.triangles[t][k]] += 2.0 * res * d.d_depth[k];
            }
        }
    }
    if (count > 0) {
        r.loss = sum / static_cast<double>(count);
        for (auto& g : r.grad) g /= static_cast<double>(count);
        for (auto& t : r.terms) t /= static_cast<double>(count);
    }
    return r;
}

bool same_connectivity(const IndexedMesh& a, const IndexedMesh& b) {
    return a.triangles == b.triangles && a.provenance == b.provenance;
}

}  // namespace

LossResult loss_and_vertex_grad(const IndexedMesh& mesh, const TargetSpec& target, int threads) {
    const LossKind kind = target.kind();
    if (mesh.empty() || mesh.vertices.empty()) throw Error("surface vanished: the mesh has no triangles");
    mesh.check_indices();
    return kind == LossKind::Chamfer ? chamfer_loss(mesh, target.points, threads)
                                     : depth_loss(mesh, target.views, threads);
}

double mesh_area(const IndexedMesh& mesh, std::vector<Vec3>* grad, double weight) {
    if (grad && grad->size() != mesh.vertices.size()) throw Error("mesh_area: gradient size mismatch");
    double area = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const Vec3 n = (b - a).cross(c - a);
        const double len = n.norm();
        area += 0.5 * len;
        if (!grad || len == 0.0) continue;
        const Vec3 u = n / len;
        (*grad)[t[0]] += 0.5 * weight * (b - c).cross(u);
        (*grad)[t[1]] += 0.5 * weight * (c - a).cross(u);
        (*grad)[t[2]] += 0.5 * weight * (a - b).cross(u);
    }
    return area;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, const OptimizeConfig& cfg)
    : kind_(kind), lr_(lr), momentum_(cfg.momentum), beta1_(cfg.beta1), beta2_(cfg.beta2), epsilon_(cfg.epsilon) {}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size()) throw Error("optimizer: parameter and gradient sizes differ");
    const std::size_t n = params.size();
    switch (kind_) {
        case OptimizerKind::Plain:
            for (std::size_t i = 0; i < n; ++i) params[i] -= lr_ * grad[i];
            break;
        case OptimizerKind::Momentum:
            m_.resize(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                m_[i] = momentum_ * m_[i] + grad[i];
                params[i] -= lr_ * m_[i];
            }
            break;
        case OptimizerKind::Adam: {
            m_.resize(n, 0.0);
            v_.resize(n, 0.0);
            ++t_;
            const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
            for (std::size_t i = 0; i < n; ++i) {
                m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
                v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
                params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
            }
            break;
        }
    }
}

namespace {

std::span<double> flat(std::vector<Vec3>& v) { return {v.empty() ? nullptr : v.front().data(), v.size() * 3}; }
std::span<const double> flat(const std::vector<Vec3>& v) {
    return {v.empty() ? nullptr : v.front().data(), v.size() * 3};
}

IterationLog log_entry(int it, double loss, const IndexedMesh& mesh, const QualityReport& q) {
    return {it, loss, mesh_area(mesh), mesh.vertices.size(), mesh.triangles.size(), q.euler_characteristic};
}

}  // namespace

void project_to_normals(const IndexedMesh& mesh, std::vector<Vec3>& grad) {
    if (grad.size() != mesh.vertices.size()) throw Error("gradient size does not match the vertex count");
    std::vector<Vec3> normal(mesh.vertices.size(), Vec3::Zero());
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        for (auto i : t) normal[i] += n;
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double len = normal[i].norm();
        if (len > 0.0) {
            const Vec3 n = normal[i] / len;
            grad[i] = n * n.dot(grad[i]);
        } else {
            grad[i].setZero();
        }
    }
}

void smooth_node_gradient(const ScalarGrid& grid, std::vector<double>& grad, int passes) {
    if (grad.size() != grid.node_count()) throw Error("gradient size does not match the node count");
    const Index3 d = grid.dims();
    const std::array<std::ptrdiff_t, 3> stride{1, d.x(), static_cast<std::ptrdiff_t>(d.x()) * d.y()};
    std::vector<double> out(grad.size());
    for (int p = 0; p < passes; ++p) {
        for (int axis = 0; axis < 3; ++axis) {
            for (std::size_t n = 0; n < grad.size(); ++n) {
                const Index3 c = grid.coords(n);
                double acc = 2.0 * grad[n], w = 2.0;
                if (c[axis] > 0) acc += grad[n - stride[axis]], w += 1.0;
                if (c[axis] + 1 < d[axis]) acc += grad[n + stride[axis]], w += 1.0;
                out[n] = acc / w;
            }
            grad.swap(out);
        }
    }
}

FitResult fit_grid(const DeformableGrid& init, const TargetSpec& target, const OptimizeConfig& cfg, const LogFn& log) {
    cfg.validate();
    target.kind();
    FitResult out;
    DeformableGrid grid = init;
    if (cfg.optimize_displacement && grid.displacement.empty())
        grid.displacement.assign(grid.base.node_count(), Vec3::Zero());
    if (cfg.clamp_displacement) grid = clamp_displacements(grid);
    const double band = cfg.truncation * grid.base.spacing().minCoeff();
    const auto truncate = [&](DeformableGrid& g) {
        if (band > 0.0)
            for (double& v : g.base.values()) v = std::clamp(v, cfg.iso - band, cfg.iso + band);
    };
    truncate(grid);

    const ExtractOptions eo{cfg.closed, cfg.threads};
    const ManifoldOptions connectivity{false, cfg.threads};
    Extraction ex = extract(grid, cfg.iso, eo);
    if (ex.mesh.empty()) throw Error("initial grid yields an empty surface at iso " + std::to_string(cfg.iso));

    Optimizer opt_values(cfg.optimizer, cfg.lr_values, cfg);
    Optimizer opt_disp(cfg.optimizer, cfg.lr_displacement, cfg);
    const auto emit = [&](const IterationLog& e) {
        out.trace.push_back(e);
        if (log && cfg.log_every > 0 && (e.iteration % cfg.log_every == 0 || e.iteration == cfg.iterations)) log(e);
    };
    const auto certify_connectivity = [&](const IndexedMesh& m, int it) {
        QualityReport q = check_manifold(m, connectivity);
        if (!q.watertight || !q.manifold_connectivity)
            throw Error("iteration " + std::to_string(it) + " produced a mesh failing certification (" +
                        to_json(q).dump() + ")");
        return q;
    };

    for (int it = 0; it < cfg.iterations; ++it) {
        const QualityReport q = certify_connectivity(ex.mesh, it);
        LossResult lr = loss_and_vertex_grad(ex.mesh, target, cfg.threads);
        emit(log_entry(it, lr.loss, ex.mesh, q));
        if (cfg.area_weight > 0.0) mesh_area(ex.mesh, &lr.grad, cfg.area_weight);
        if (cfg.normal_projection) project_to_normals(ex.mesh, lr.grad);
        GridGradient gg = chain_gradient(ex.jacobian, lr.grad);
        smooth_node_gradient(grid.base, gg.values, cfg.smoothing_passes);

        for (;;) {
            DeformableGrid next = grid;
            Optimizer next_values = opt_values, next_disp = opt_disp;
            if (cfg.optimize_values) next_values.step(next.base.values(), gg.values);
            if (cfg.optimize_displacement) next_disp.step(flat(next.displacement), flat(gg.displacement));
            if (cfg.clamp_displacement) next = clamp_displacements(next);
            truncate(next);
            Extraction next_ex = extract(next, cfg.iso, eo);
            if (!next_ex.mesh.empty()) {
                grid = std::move(next);
                opt_values = std::move(next_values);
                opt_disp = std::move(next_disp);
                ex = std::move(next_ex);
                break;
            }
            if (out.rollbacks >= cfg.max_retries) {
                std::ostringstream msg;
                msg << "surface vanished at iteration " << it << " after " << out.rollbacks
                    << " rollbacks; loss trace:";
                for (const auto& e : out.trace) msg << ' ' << e.loss;
                throw Error(msg.str());
            }
            ++out.rollbacks;
            opt_values.set_learning_rate(0.5 * opt_values.learning_rate());
            opt_disp.set_learning_rate(0.5 * opt_disp.learning_rate());
        }
    }

    const QualityReport q = certify_connectivity(ex.mesh, cfg.iterations);
    emit(log_entry(cfg.iterations, loss_and_vertex_grad(ex.mesh, target, cfg.threads).loss, ex.mesh, q));
    out.report = certify(ex.mesh, {true, cfg.threads});
    out.grid = std::move(grid);
    out.mesh = std::move(ex.mesh);
    return out;
}

FinetuneResult finetune_vertices(const IndexedMesh& mesh, const TargetSpec& target, const OptimizeConfig& cfg,
                                 const LogFn& log) {
    cfg.validate();
    FinetuneResult out;
    out.mesh = mesh;
    Optimizer opt(cfg.optimizer, cfg.lr_vertices, cfg);
    for (int it = 0; it < cfg.iterations; ++it) {
        const LossResult lr = loss_and_vertex_grad(out.mesh, target, cfg.threads);
        out.loss_trace.push_back(lr.loss);
        if (log && cfg.log_every > 0 && it % cfg.log_every == 0)
            log({it, lr.loss, mesh_area(out.mesh), out.mesh.vertices.size(), out.mesh.triangles.size(), 0});
        opt.step(flat(out.mesh.vertices), flat(lr.grad));
    }
    if (cfg.iterations > 0) out.loss_trace.push_back(loss_and_vertex_grad(out.mesh, target, cfg.threads).loss);
    return out;
}

void write_trace_csv(const std::vector<IterationLog>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "iteration,loss,area,vertices,triangles,euler_characteristic\n";
    for (const auto& e : trace)
        out << e.iteration << ',' << e.loss << ',' << e.area << ',' << e.vertices << ',' << e.triangles << ','
            << e.euler_characteristic << '\n';
}

GradcheckReport gradcheck(const DeformableGrid& input, const TargetSpec& target, const GradcheckOptions& o) {
    DeformableGrid grid = input;
    if (o.displacement && grid.displacement.empty()) grid.displacement.assign(grid.base.node_count(), Vec3::Zero());
    const ExtractOptions eo{o.closed, o.threads};
    const Extraction base = extract(grid, o.iso, eo);
    if (base.mesh.empty()) throw Error("gradcheck: extraction is empty");
    const LossResult base_loss = loss_and_vertex_grad(base.mesh, target, o.threads);
    const GridGradient gg = chain_gradient(base.jacobian, base_loss.grad);

    std::set<std::size_t> active;
    for (const auto& d : base.jacobian.vertices) {
        active.insert(d.node_a);
        active.insert(d.node_b);
    }
    struct Param {
        std::size_t node;
        int component;  // -1 value, 0..2 displacement
    };
    std::vector<Param> params;
    for (std::size_t n : active) {
        if (o.values) params.push_back({n, -1});
        if (o.displacement)
            for (int c = 0; c < 3; ++c) params.push_back({n, c});
    }
    GradcheckReport report;
    report.active_parameters = params.size();
    std::mt19937_64 rng(o.seed);
    std::shuffle(params.begin(), params.end(), rng);

    double scale = 0.0;
    for (double g : gg.values) scale = std::max(scale, std::abs(g));
    for (const auto& g : gg.displacement) scale = std::max(scale, g.cwiseAbs().maxCoeff());
    const double floor = std::max(1e-8 * scale, std::numeric_limits<double>::min());
    const double h = o.step_scale * grid.base.spacing().minCoeff();

    double sum = 0.0;
    for (const Param& p : params) {
        if (report.checked.size() >= o.samples) break;
        GradcheckEntry e;
        e.node = p.node;
        e.parameter = p.component < 0 ? "value" : std::string("displacement.") + "xyz"[p.component];
        e.analytic = p.component < 0 ? gg.values[p.node] : gg.displacement[p.node][p.component];
        double& slot = p.component < 0 ? grid.base.values()[p.node] : grid.displacement[p.node][p.component];
        const double saved = slot;
        std::array<std::vector<double>, 2> terms;
        for (int side = 0; side < 2; ++side) {
            slot = saved + (side == 0 ? h : -h);
            const Extraction ex = extract(grid, o.iso, eo);
            if (!same_connectivity(ex.mesh, base.mesh)) {
                e.excluded = "configuration change";
                break;
            }
            const LossResult l = loss_and_vertex_grad(ex.mesh, target, o.threads);
            if (l.signature != base_loss.signature) {
                e.excluded = "nearest-neighbour change";
                break;
            }
            terms[side] = l.terms;
        }
        slot = saved;
        if (!e.excluded.empty()) {
            report.excluded.push_back(e);
            continue;
        }
        double diff = 0.0, carry = 0.0;
        for (std::size_t i = 0; i < terms[0].size(); ++i) {
            const double y = (terms[0][i] - terms[1][i]) - carry;
            const double t = diff + y;
            carry = (t - diff) - y;
            diff = t;
        }
        e.numeric = diff / (2.0 * h);
        e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        sum += e.rel_error;
        report.checked.push_back(e);
    }
    if (!report.checked.empty()) report.mean_rel_error = sum / static_cast<double>(report.checked.size());
    return report;
}

nlohmann::json to_json(const GradcheckReport& r) {
    const auto entry = [](const GradcheckEntry& e) {
        nlohmann::json j{{"parameter", e.parameter}, {"node", e.node}, {"analytic", e.analytic}};
        if (e.excluded.empty()) {
            j["numeric"] = e.numeric;
            j["rel_error"] = e.rel_error;
        } else {
            j["excluded"] = e.excluded;
        }
        return j;
    };
    nlohmann::json j;
    j["max_rel_error"] = r.max_rel_error;
    j["mean_rel_error"] = r.mean_rel_error;
    j["active_parameters"] = r.active_parameters;
    j["checked_count"] = r.checked.size();
    j["excluded_count"] = r.excluded.size();
    auto& checked = j["checked"] = nlohmann::json::array();
    for (const auto& e : r.checked) checked.push_back(entry(e));
    auto& excluded = j["excluded"] = nlohmann::json::array();
    for (const auto& e : r.excluded) excluded.push_back(entry(e));
    return j;
}

}  // namespace dmc
