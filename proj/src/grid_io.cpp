#include "diffmc/grid_io.hpp"

#include <fstream>

#include <json.hpp>

#include "diffmc/binary_io.hpp"

namespace dmc {

using nlohmann::json;

std::string_view to_string(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Precision precision_from_string(std::string_view s) {
    if (s == "float32") return Precision::Float32;
    if (s == "float64") return Precision::Float64;
    throw Error("unknown precision '" + std::string(s) + "'");
}

namespace {

void write_block(const std::filesystem::path& path, std::span<const double> data, Precision p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (double v : data) {
        if (p == Precision::Float32) write_le(out, static_cast<float>(v));
        else write_le(out, v);
    }
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<double> read_block(const std::filesystem::path& path, std::size_t count, Precision p) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<double> data(count);
    for (auto& v : data) v = p == Precision::Float32 ? static_cast<double>(read_le<float>(in)) : read_le<double>(in);
    if (in.peek() != std::ifstream::traits_type::eof()) throw Error(path.string() + " holds more data than the header declares");
    return data;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error("grid header expects a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

void write_grid(const DeformableGrid& grid, const std::filesystem::path& header, Precision precision) {
    const auto& g = grid.base;
    const std::string stem = header.stem().string();
    const auto dir = header.parent_path();
    json h;
    h["format"] = "diffmc-grid";
    h["version"] = 1;
    h["dims"] = {g.dims().x(), g.dims().y(), g.dims().z()};
    h["origin"] = vec_json(g.origin());
    h["spacing"] = vec_json(g.spacing());
    h["precision"] = std::string(to_string(precision));
    h["semantics"] = std::string(to_string(g.semantics()));
    h["layout"] = "x-fastest";
    h["endianness"] = "little";
    h["values"] = stem + ".values.raw";
    write_block(dir / (stem + ".values.raw"), g.values(), precision);
    if (grid.has_displacement()) {
        h["displacement"] = stem + ".disp.raw";
        std::vector<double> flat;
        flat.reserve(grid.displacement.size() * 3);
        for (const auto& d : grid.displacement) flat.insert(flat.end(), {d.x(), d.y(), d.z()});
        write_block(dir / (stem + ".disp.raw"), flat, precision);
    }
    std::ofstream out(header);
    if (!out) throw Error("cannot open " + header.string() + " for writing");
    out << h.dump(2) << '\n';
}

DeformableGrid read_grid(const std::filesystem::path& header) {
    std::ifstream in(header);
    if (!in) throw Error("cannot open " + header.string());
    json h;
    try {
        in >> h;
    } catch (const json::exception& e) {
        throw Error("invalid grid header " + header.string() + ": " + e.what());
    }
    if (h.value("format", "") != "diffmc-grid") throw Error(header.string() + " is not a grid header");
    if (h.value("layout", "x-fastest") != "x-fastest" || h.value("endianness", "little") != "little")
        throw Error("unsupported grid layout or endianness");
    const auto& d = h.at("dims");
    const Index3 dims(d.at(0).get<std::int64_t>(), d.at(1).get<std::int64_t>(), d.at(2).get<std::int64_t>());
    const Precision p = precision_from_string(h.at("precision").get<std::string>());
    const auto dir = header.parent_path();
    const auto count = static_cast<std::size_t>(dims.prod());
    ScalarGrid g(dims, json_vec(h.at("origin")), json_vec(h.at("spacing")),
                 read_block(dir / h.at("values").get<std::string>(), count, p),
                 semantics_from_string(h.value("semantics", "sdf")));
    DeformableGrid out(std::move(g));
    if (h.contains("displacement")) {
        const auto flat = read_block(dir / h.at("displacement").get<std::string>(), count * 3, p);
        out.displacement.resize(count);
        for (std::size_t n = 0; n < count; ++n) out.displacement[n] = Vec3(flat[3 * n], flat[3 * n + 1], flat[3 * n + 2]);
    }
    return out;
}

}  // namespace dmc
