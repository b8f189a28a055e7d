#include "diffmc/neural_texture.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/QR>
#include <json.hpp>

#include "diffmc/binary_io.hpp"
#include "diffmc/parallel.hpp"

namespace dmc {

namespace {

constexpr std::array<const char*, 3> kPlaneNames{"planes.xy", "planes.yz", "planes.zx"};
constexpr std::array<const char*, 3> kLineNames{"lines.z", "lines.x", "lines.y"};
// Coordinate axes read by each plane (first, second) and by its paired line.
constexpr std::array<std::array<int, 2>, 3> kPlaneAxes{{{0, 1}, {1, 2}, {2, 0}}};
constexpr std::array<int, 3> kLineAxis{2, 0, 1};

struct Lerp {
    int i0 = 0;
    double t = 0.0;
};

Lerp texel(double q, int r) {
    const double p = q * static_cast<double>(r - 1);
    int i0 = static_cast<int>(std::floor(p));
    i0 = std::clamp(i0, 0, r - 2);
    return {i0, p - static_cast<double>(i0)};
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

VmTexture VmTexture::zeros(int channels, int resolution, int features) {
    VmTexture t;
    t.channels = channels;
    t.resolution = resolution;
    t.features = features;
    const auto c = static_cast<std::size_t>(channels), r = static_cast<std::size_t>(resolution);
    for (auto& p : t.planes) p.assign(c * r * r, 0.0);
    for (auto& l : t.lines) l.assign(c * r, 0.0);
    t.basis.assign(static_cast<std::size_t>(features) * 3 * c, 0.0);
    return t;
}

void VmTexture::validate() const {
    if (channels < 1 || resolution < 2 || features < 1)
        throw Error("texture needs at least one channel, resolution >= 2 and one feature");
    const auto c = static_cast<std::size_t>(channels), r = static_cast<std::size_t>(resolution);
    for (int k = 0; k < 3; ++k) {
        if (planes[k].size() != c * r * r) throw Error(std::string(kPlaneNames[k]) + " has the wrong size");
        if (lines[k].size() != c * r) throw Error(std::string(kLineNames[k]) + " has the wrong size");
        if (!all_finite(planes[k]) || !all_finite(lines[k])) throw Error("texture factors must be finite");
    }
    if (basis.size() != static_cast<std::size_t>(features) * 3 * c) throw Error("basis must be F x 3C");
    if (!all_finite(basis)) throw Error("basis must be finite");
    if (!((box_max - box_min).array() > 0.0).all()) throw Error("texture box must have positive extent");
}

FeatureSample eval_features(const VmTexture& tex, const Vec3& x) {
    tex.validate();
    FeatureSample out;
    Vec3 q = (x - tex.box_min).cwiseQuotient(tex.box_max - tex.box_min);
    for (int a = 0; a < 3; ++a) {
        if (!(q[a] >= 0.0 && q[a] <= 1.0)) {
            out.clamped = true;
            q[a] = std::isnan(q[a]) ? 0.0 : std::clamp(q[a], 0.0, 1.0);
        }
    }
    const int C = tex.channels, R = tex.resolution;
    const std::array<Lerp, 3> s{texel(q[0], R), texel(q[1], R), texel(q[2], R)};
    std::vector<double> raw(static_cast<std::size_t>(3 * C));
    for (int k = 0; k < 3; ++k) {
        const Lerp& u = s[kPlaneAxes[k][0]];
        const Lerp& v = s[kPlaneAxes[k][1]];
        const Lerp& w = s[kLineAxis[k]];
        const auto& M = tex.planes[k];
        const auto& L = tex.lines[k];
        for (int c = 0; c < C; ++c) {
            const auto at = [&](int i, int j) { return M[(static_cast<std::size_t>(c) * R + i) * R + j]; };
            const double m = (1 - u.t) * ((1 - v.t) * at(u.i0, v.i0) + v.t * at(u.i0, v.i0 + 1)) +
                             u.t * ((1 - v.t) * at(u.i0 + 1, v.i0) + v.t * at(u.i0 + 1, v.i0 + 1));
            const std::size_t li = static_cast<std::size_t>(c) * R + w.i0;
            const double l = (1 - w.t) * L[li] + w.t * L[li + 1];
            raw[static_cast<std::size_t>(k * C + c)] = m * l;
        }
    }
    out.features.assign(static_cast<std::size_t>(tex.features), 0.0);
    for (int f = 0; f < tex.features; ++f) {
        double acc = 0.0;
        for (int j = 0; j < 3 * C; ++j) acc += tex.basis[static_cast<std::size_t>(f) * 3 * C + j] * raw[j];
        out.features[f] = acc;
    }
    return out;
}

Encoding encode_frequencies(std::span<const double> features, const Vec3& dir) {
    Encoding out;
    const double len = dir.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw Error("viewing direction must be non-zero and finite");
    Vec3 d = dir;
    if (std::abs(len - 1.0) > 1e-12) {
        d /= len;
        out.normalized = true;
    }
    out.values.reserve(static_cast<std::size_t>(encoded_width(static_cast<int>(features.size()))));
    const auto block = [&](std::span<const double> u, int octaves) {
        out.values.insert(out.values.end(), u.begin(), u.end());
        for (int k = 0; k < octaves; ++k) {
            const double f = std::ldexp(std::numbers::pi, k);
            for (double x : u) out.values.push_back(std::sin(f * x));
            for (double x : u) out.values.push_back(std::cos(f * x));
        }
    };
    block(features, kFeatureOctaves);
    block(std::span<const double>(d.data(), 3), kDirectionOctaves);
    return out;
}

std::array<double, 9> sh_basis(const Vec3& dir) {
    const Vec3 d = dir.normalized();
    const double x = d.x(), y = d.y(), z = d.z();
    return {0.28209479177387814,
            0.4886025119029199 * y,
            0.4886025119029199 * z,
            0.4886025119029199 * x,
            1.0925484305920792 * x * y,
            1.0925484305920792 * y * z,
            0.31539156525252005 * (3.0 * z * z - 1.0),
            1.0925484305920792 * x * z,
            0.5462742152960396 * (x * x - y * y)};
}

Vec3 sh_color(std::span<const double> coefficients, const Vec3& dir) {
    if (coefficients.size() != 27) throw Error("SH colour needs 27 coefficients");
    const auto y = sh_basis(dir);
    Vec3 rgb = Vec3::Zero();
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 9; ++k) rgb[c] += coefficients[static_cast<std::size_t>(c * 9 + k)] * y[k];
    return rgb;
}

HqDecoder HqDecoder::zeros() {
    HqDecoder d;
    const std::array<std::array<int, 2>, 3> shapes{{{encoded_width(kFeatures), 64}, {64, 64}, {64, 3}}};
    for (int l = 0; l < 3; ++l) {
        auto& layer = d.layers[l];
        layer.in = shapes[l][0];
        layer.out = shapes[l][1];
        layer.weight.assign(static_cast<std::size_t>(layer.in * layer.out), 0.0);
        layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
    }
    return d;
}

void HqDecoder::validate() const {
    const std::array<std::array<int, 2>, 3> shapes{{{encoded_width(kFeatures), 64}, {64, 64}, {64, 3}}};
    for (int l = 0; l < 3; ++l) {
        const auto& layer = layers[l];
        if (layer.in != shapes[l][0] || layer.out != shapes[l][1] ||
            layer.weight.size() != static_cast<std::size_t>(layer.in * layer.out) ||
            layer.bias.size() != static_cast<std::size_t>(layer.out))
            throw Error("HQ layer " + std::to_string(l) + " must be " + std::to_string(shapes[l][0]) + " -> " +
                        std::to_string(shapes[l][1]));
    }
}

Vec3 HqDecoder::forward(std::span<const double> input) const {
    validate();
    if (input.size() != static_cast<std::size_t>(layers[0].in))
        throw Error("HQ decoder expects " + std::to_string(layers[0].in) + " inputs, got " +
                    std::to_string(input.size()));
    std::vector<double> act(input.begin(), input.end()), next;
    for (int l = 0; l < 3; ++l) {
        const auto& layer = layers[l];
        next.assign(static_cast<std::size_t>(layer.out), 0.0);
        for (int o = 0; o < layer.out; ++o) {
            double acc = layer.bias[o];
            for (int i = 0; i < layer.in; ++i) acc += layer.weight[static_cast<std::size_t>(o * layer.in + i)] * act[i];
            next[o] = l < 2 ? std::max(acc, 0.0) : 1.0 / (1.0 + std::exp(-acc));
        }
        act.swap(next);
    }
    return {act[0], act[1], act[2]};
}

Vec3 decode_color(const Decoder& dec, std::span<const double> features, const Vec3& dir) {
    if (features.size() != static_cast<std::size_t>(dec.feature_count()))
        throw Error("decoder expects " + std::to_string(dec.feature_count()) + " features, got " +
                    std::to_string(features.size()));
    if (dec.kind == DecoderKind::Hq) return dec.hq.forward(encode_frequencies(features, dir).values);
    return sh_color(features, dir).cwiseMax(0.0).cwiseMin(1.0);
}

void write_tensors(const TensorMap& tensors, const std::filesystem::path& manifest, const std::string& dtype) {
    if (dtype != "float64" && dtype != "float32") throw Error("dtype must be float64 or float32");
    std::filesystem::path blob = manifest;
    blob.replace_extension(".bin");
    std::ofstream out(blob, std::ios::binary);
    if (!out) throw Error("cannot write " + blob.string());
    nlohmann::json j;
    j["format"] = "tensors";
    j["version"] = 1;
    j["dtype"] = dtype;
    j["order"] = "row-major";
    j["endianness"] = "little";
    j["data"] = blob.filename().string();
    auto& list = j["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        std::int64_t count = 1;
        for (auto s : t.shape) count *= s;
        if (count != static_cast<std::int64_t>(t.data.size()))
            throw Error("tensor " + name + " has " + std::to_string(t.data.size()) + " values for its shape");
        list.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        for (double v : t.data) {
            if (dtype == "float64") write_le(out, v);
            else write_le(out, static_cast<float>(v));
        }
        offset += static_cast<std::uint64_t>(count) * (dtype == "float64" ? 8 : 4);
    }
    if (!out) throw Error("failed writing " + blob.string());
    std::ofstream m(manifest);
    if (!m) throw Error("cannot write " + manifest.string());
    m << j.dump(2) << '\n';
}

TensorMap read_tensors(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error("cannot open " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(manifest.string() + ": " + e.what());
    }
    if (j.value("order", "row-major") != "row-major" || j.value("endianness", "little") != "little")
        throw Error(manifest.string() + ": only row-major little-endian tensors are supported");
    const std::string dtype = j.at("dtype").get<std::string>();
    if (dtype != "float64" && dtype != "float32") throw Error(manifest.string() + ": unsupported dtype " + dtype);
    const std::size_t width = dtype == "float64" ? 8 : 4;
    const auto blob = manifest.parent_path() / j.at("data").get<std::string>();
    std::ifstream data(blob, std::ios::binary);
    if (!data) throw Error("cannot open " + blob.string());
    TensorMap out;
    for (const auto& e : j.at("tensors")) {
        Tensor t;
        t.shape = e.at("shape").get<std::vector<std::int64_t>>();
        std::int64_t count = 1;
        for (auto s : t.shape) {
            if (s < 0) throw Error(manifest.string() + ": negative tensor dimension");
            count *= s;
        }
        data.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        t.data.resize(static_cast<std::size_t>(count));
        for (auto& v : t.data) v = width == 8 ? read_le<double>(data) : static_cast<double>(read_le<float>(data));
        out[e.at("name").get<std::string>()] = std::move(t);
    }
    return out;
}

namespace {

const Tensor& require(const TensorMap& m, const std::string& name, std::vector<std::int64_t> shape) {
    const auto it = m.find(name);
    if (it == m.end()) throw Error("missing tensor " + name);
    if (it->second.shape != shape) throw Error("tensor " + name + " has an unexpected shape");
    return it->second;
}

}  // namespace

HqDecoder load_hq_decoder(const std::filesystem::path& manifest) {
    const TensorMap m = read_tensors(manifest);
    HqDecoder d = HqDecoder::zeros();
    for (int l = 0; l < 3; ++l) {
        auto& layer = d.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        layer.weight = require(m, p + "weight", {layer.out, layer.in}).data;
        layer.bias = require(m, p + "bias", {layer.out}).data;
    }
    return d;
}

void save_hq_decoder(const HqDecoder& dec, const std::filesystem::path& manifest) {
    dec.validate();
    TensorMap m;
    for (int l = 0; l < 3; ++l) {
        const auto& layer = dec.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        m[p + "weight"] = {{layer.out, layer.in}, layer.weight};
        m[p + "bias"] = {{layer.out}, layer.bias};
    }
    write_tensors(m, manifest);
}

VmTexture load_texture(const std::filesystem::path& manifest) {
    const TensorMap m = read_tensors(manifest);
    const auto it = m.find(kPlaneNames[0]);
    if (it == m.end() || it->second.shape.size() != 3) throw Error("missing tensor planes.xy");
    const auto C = it->second.shape[0], R = it->second.shape[1];
    const auto b = m.find("basis");
    if (b == m.end() || b->second.shape.size() != 2) throw Error("missing tensor basis");
    VmTexture t;
    t.channels = static_cast<int>(C);
    t.resolution = static_cast<int>(R);
    t.features = static_cast<int>(b->second.shape[0]);
    for (int k = 0; k < 3; ++k) {
        t.planes[k] = require(m, kPlaneNames[k], {C, R, R}).data;
        t.lines[k] = require(m, kLineNames[k], {C, R}).data;
    }
    t.basis = require(m, "basis", {t.features, 3 * C}).data;
    const auto& box = require(m, "box", {2, 3}).data;
    t.box_min = Vec3(box[0], box[1], box[2]);
    t.box_max = Vec3(box[3], box[4], box[5]);
    t.validate();
    return t;
}

void save_texture(const VmTexture& tex, const std::filesystem::path& manifest) {
    tex.validate();
    const std::int64_t C = tex.channels, R = tex.resolution;
    TensorMap m;
    for (int k = 0; k < 3; ++k) {
        m[kPlaneNames[k]] = {{C, R, R}, tex.planes[k]};
        m[kLineNames[k]] = {{C, R}, tex.lines[k]};
    }
    m["basis"] = {{tex.features, 3 * C}, tex.basis};
    m["box"] = {{2, 3}, {tex.box_min.x(), tex.box_min.y(), tex.box_min.z(), tex.box_max.x(), tex.box_max.y(),
                         tex.box_max.z()}};
    write_tensors(m, manifest);
}

ShFit fit_sh(std::span<const ColorSample> samples) {
    // Group by exact point, keeping first-appearance order.
    std::vector<Vec3> points;
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::array<double, 3>, std::size_t> lookup;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Vec3& p = samples[i].point;
        const auto [it, inserted] = lookup.try_emplace({p.x(), p.y(), p.z()}, points.size());
        if (inserted) {
            points.push_back(p);
            groups.emplace_back();
        }
        groups[it->second].push_back(i);
    }
    ShFit out;
    double sq = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& idx = groups[g];
        Eigen::MatrixXd A(idx.size(), 9);
        Eigen::MatrixXd B(idx.size(), 3);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto y = sh_basis(samples[idx[r]].dir);
            for (int k = 0; k < 9; ++k) A(static_cast<Eigen::Index>(r), k) = y[k];
            B.row(static_cast<Eigen::Index>(r)) = samples[idx[r]].rgb.transpose();
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        qr.setThreshold(1e-10);
        if (qr.rank() < 9) {
            std::ostringstream msg;
            msg << "point (" << points[g].transpose() << ") has " << idx.size()
                << " samples whose directions span only " << qr.rank()
                << " of the 9 degree-2 SH functions; add samples with more varied directions";
            throw Error(msg.str());
        }
        const Eigen::MatrixXd X = qr.solve(B);
        ShPointFit fit;
        fit.point = points[g];
        fit.samples = idx.size();
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 9; ++k) fit.coefficients[static_cast<std::size_t>(c * 9 + k)] = X(k, c);
        const double r2 = (A * X - B).squaredNorm();
        fit.residual = std::sqrt(r2);
        sq += r2;
        out.points.push_back(fit);
    }
    if (!samples.empty()) out.rms = std::sqrt(sq / (3.0 * static_cast<double>(samples.size())));
    return out;
}

IndexedMesh bake_vertex_colors(const IndexedMesh& mesh, const VmTexture& tex, const Decoder& dec, const Vec3& view,
                               int threads) {
    tex.validate();
    if (dec.kind == DecoderKind::Hq) dec.hq.validate();
    if (tex.features != dec.feature_count())
        throw Error("texture has " + std::to_string(tex.features) + " features but the decoder expects " +
                    std::to_string(dec.feature_count()));
    IndexedMesh out = mesh;
    out.colors.assign(mesh.vertices.size(), Rgb8{0, 0, 0});
    const std::size_t n = mesh.vertices.size();
    parallel_chunks(n, std::max<std::size_t>(1, n / 1024), threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t v = b; v < e; ++v) {
            const Vec3 rgb = decode_color(dec, eval_features(tex, mesh.vertices[v]).features, view);
            for (int c = 0; c < 3; ++c)
                out.colors[v][c] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255.0));
        }
    });
    return out;
}

}  // namespace dmc
