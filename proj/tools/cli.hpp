#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffmc/field.hpp"
#include "diffmc/grid_io.hpp"
#include "diffmc/mesh.hpp"
#include "diffmc/render.hpp"

namespace dmc::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;
inline constexpr int kRuntimeError = 3;

struct Globals {
    int threads = 0;
    std::uint64_t seed = 0;
    std::string precision = "float64";
    std::filesystem::path out_dir = ".";
    bool assert_checks = false;
};

/// Shared state for one invocation. Verb callbacks set `status`.
struct Context {
    Globals g;
    int status = kOk;
    std::ostream* out = nullptr;

    std::ostream& log() const { return *out; }
    Precision precision() const { return precision_from_string(g.precision); }
    /// `name` inside the output directory, creating the directory.
    std::filesystem::path output(const std::string& name) const;
    /// Records a failed check; the exit code is 1 only under --assert.
    void check(bool ok, const std::string& what);
};

struct VerbInfo {
    std::string name;
    std::string description;
};

/// Every verb with its one-line description, in help order.
const std::vector<VerbInfo>& verbs();

/// Parses and runs one command line. Output goes to `out`, errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Verb registration, one per translation unit group.
void add_extract_verbs(CLI::App& app, Context& ctx);   // extract, extract-mt, demo2d, validate
void add_metric_verbs(CLI::App& app, Context& ctx);    // vsa, chamfer, reso-sweep
void add_optimize_verbs(CLI::App& app, Context& ctx);  // optimize, finetune, gradcheck
void add_texture_verbs(CLI::App& app, Context& ctx);   // shade
void add_bench_verb(CLI::App& app, Context& ctx);      // bench

// Helpers shared by verbs.
Vec3 parse_vec3(const std::string& s);
std::vector<double> parse_double_list(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);
/// "a..b" gives `steps` log-spaced values; otherwise a comma list.
std::vector<double> parse_tau_list(const std::string& s, int steps);
/// Cameras on a ring around the unit cube, looking at its center.
std::vector<Camera> orbit_cameras(int count, int size);
void write_points(const std::vector<Vec3>& points, const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
std::string description(const std::string& verb);

}  // namespace dmc::cli
