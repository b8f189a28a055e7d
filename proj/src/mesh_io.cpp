#include "diffmc/mesh.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "diffmc/binary_io.hpp"

namespace dmc {

void IndexedMesh::check_indices() const {
    const auto n = vertices.size();
    for (std::size_t t = 0; t < triangles.size(); ++t)
        for (auto v : triangles[t])
            if (v >= n) throw Error("triangle " + std::to_string(t) + " references missing vertex " + std::to_string(v));
    if (!colors.empty() && colors.size() != n) throw Error("color count does not match vertex count");
}

void write_obj(const IndexedMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

IndexedMesh read_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    IndexedMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) throw Error(path.string() + ":" + std::to_string(lineno) + ": bad vertex");
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<std::int64_t> idx;
            std::string tok;
            while (ls >> tok) {
                const long long raw = std::stoll(tok.substr(0, tok.find('/')));
                idx.push_back(raw < 0 ? static_cast<long long>(mesh.vertices.size()) + raw : raw - 1);
            }
            if (idx.size() < 3) throw Error(path.string() + ":" + std::to_string(lineno) + ": face needs 3 indices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                mesh.triangles.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                                          static_cast<std::uint32_t>(idx[k + 1])});
        }
    }
    mesh.check_indices();
    return mesh;
}

void write_ply(const IndexedMesh& mesh, const std::filesystem::path& path) {
    mesh.check_indices();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    const bool rgb = !mesh.colors.empty();
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (rgb) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (int a = 0; a < 3; ++a) write_le(out, static_cast<float>(mesh.vertices[i][a]));
        if (rgb) out.write(reinterpret_cast<const char*>(mesh.colors[i].data()), 3);
    }
    for (const auto& t : mesh.triangles) {
        out.put(static_cast<char>(3));
        for (auto v : t) write_le(out, static_cast<std::int32_t>(v));
    }
    if (!out) throw Error("failed writing " + path.string());
}

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

double read_binary_scalar(std::istream& in, const std::string& t) {
    if (t == "char" || t == "int8") return read_le<std::int8_t>(in);
    if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(in);
    if (t == "short" || t == "int16") return read_le<std::int16_t>(in);
    if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(in);
    if (t == "int" || t == "int32") return read_le<std::int32_t>(in);
    if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(in);
    if (t == "float" || t == "float32") return read_le<float>(in);
    if (t == "double" || t == "float64") return read_le<double>(in);
    throw Error("unsupported PLY type " + t);
}

}  // namespace

IndexedMesh read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "ply") throw Error(path.string() + " is not a PLY file");
    std::string format;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            ls >> format;
        } else if (tag == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw Error("PLY property before element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }
    const bool ascii = format == "ascii";
    if (!ascii && format != "binary_little_endian") throw Error("unsupported PLY format '" + format + "'");

    const auto next_scalar = [&](const std::string& type) {
        if (!ascii) return read_binary_scalar(in, type);
        double v = 0.0;
        in >> v;
        return v;
    };

    IndexedMesh mesh;
    for (const auto& e : elements) {
        for (std::size_t r = 0; r < e.count; ++r) {
            Vec3 pos = Vec3::Zero();
            Rgb8 color{0, 0, 0};
            bool has_color = false;
            for (const auto& p : e.props) {
                if (p.is_list) {
                    const auto n = static_cast<std::size_t>(next_scalar(p.count_type));
                    std::vector<std::uint32_t> idx(n);
                    for (auto& v : idx) v = static_cast<std::uint32_t>(next_scalar(p.type));
                    if (e.name == "face" && n >= 3)
                        for (std::size_t k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
                    continue;
                }
                const double x = next_scalar(p.type);
                if (e.name != "vertex") continue;
                if (p.name == "x") pos.x() = x;
                else if (p.name == "y") pos.y() = x;
                else if (p.name == "z") pos.z() = x;
                else if (p.name == "red") { color[0] = static_cast<std::uint8_t>(x); has_color = true; }
                else if (p.name == "green") color[1] = static_cast<std::uint8_t>(x);
                else if (p.name == "blue") color[2] = static_cast<std::uint8_t>(x);
            }
            if (e.name == "vertex") {
                mesh.vertices.push_back(pos);
                if (has_color) mesh.colors.push_back(color);
            }
            if (!in) throw Error("truncated PLY body in " + path.string());
        }
    }
    mesh.check_indices();
    return mesh;
}

IndexedMesh read_mesh(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".obj" || ext == ".OBJ") return read_obj(path);
    if (ext == ".ply" || ext == ".PLY") return read_ply(path);
    throw Error("unknown mesh extension '" + ext + "'");
}

void write_mesh(const IndexedMesh& mesh, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".obj" || ext == ".OBJ") return write_obj(mesh, path);
    if (ext == ".ply" || ext == ".PLY") return write_ply(mesh, path);
    throw Error("unknown mesh extension '" + ext + "'");
}

}  // namespace dmc
