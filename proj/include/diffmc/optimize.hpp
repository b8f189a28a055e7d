#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffmc/diffmc.hpp"
#include "diffmc/quality.hpp"
#include "diffmc/render.hpp"

namespace dmc {

enum class OptimizerKind { Plain, Momentum, Adam };
enum class LossKind { Chamfer, DepthL2 };

std::string to_string(OptimizerKind k);
std::string to_string(LossKind k);
OptimizerKind optimizer_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);

struct OptimizeConfig {
    int iterations = 300;
    double lr_values = 5e-3;
    double lr_displacement = 1e-3;
    double lr_vertices = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossKind loss = LossKind::Chamfer;
    /// Weight of the total mesh area added to the data loss in fit_grid.
    double area_weight = 0.0;
    /// fit_grid clamps node values to iso +- truncation * spacing after every
    /// step (and once on entry); 0 disables it.
    double truncation = 4.0;
    /// fit_grid keeps only the normal component of each vertex gradient.
    bool normal_projection = true;
    /// Passes of a separable [1 2 1] filter over the node value gradient.
    int smoothing_passes = 2;
    double iso = 0.0;
    bool optimize_values = true;
    bool optimize_displacement = true;
    bool clamp_displacement = true;
    bool closed = true;
    int log_every = 10;
    std::uint64_t seed = 0;
    int max_retries = 8;  ///< rollbacks allowed when the surface vanishes
    int threads = 0;

    /// Throws unless iterations >= 0 and the learning rates are positive.
    void validate() const;
};

nlohmann::json to_json(const OptimizeConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
OptimizeConfig config_from_json(const nlohmann::json& j);
OptimizeConfig load_config(const std::filesystem::path& path);

struct DepthView {
    Camera camera;
    DepthMap depth;
};

/// Either target points (chamfer) or depth views (depth-L2).
struct TargetSpec {
    std::vector<Vec3> points;
    std::vector<DepthView> views;

    LossKind kind() const;  ///< throws when empty or mixed
};

/// `count` points spread over the zero set of `field` inside the unit cube,
/// found by projecting seeded random samples along the field gradient.
std::vector<Vec3> sample_surface_points(const AnalyticField& field, std::size_t count, std::uint64_t seed);

/// Point cloud read from a whitespace-separated "x y z" file or from the
/// vertices of an OBJ/PLY mesh.
std::vector<Vec3> read_points(const std::filesystem::path& path);

struct LossResult {
    double loss = 0.0;
    std::vector<Vec3> grad;  ///< dL/dv per mesh vertex
    /// Discrete choices the loss made (nearest neighbours, hit triangles).
    /// Equal signatures mean the loss is smooth between the two inputs.
    std::vector<std::int64_t> signature;
    /// Weighted summands of `loss` in a fixed order; with equal signatures
    /// two results list the same terms.
    std::vector<double> terms;
};

LossResult loss_and_vertex_grad(const IndexedMesh& mesh, const TargetSpec& target, int threads = 0);

/// Replaces each vertex gradient by its component along the area-weighted
/// vertex normal. Isolated vertices keep a zero gradient.
void project_to_normals(const IndexedMesh& mesh, std::vector<Vec3>& grad);

/// `passes` rounds of a [1 2 1] / 4 filter along x, y and z; boundary nodes
/// renormalise over the neighbours they have.
void smooth_node_gradient(const ScalarGrid& grid, std::vector<double>& grad, int passes);

/// Total triangle area; adds d(area)/dv scaled by `weight` to `grad`.
double mesh_area(const IndexedMesh& mesh, std::vector<Vec3>* grad = nullptr, double weight = 1.0);

/// First-order optimizer over one flat parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, const OptimizeConfig& cfg);
    void step(std::span<double> params, std::span<const double> grad);
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    OptimizerKind kind_;
    double lr_;
    double momentum_, beta1_, beta2_, epsilon_;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

struct IterationLog {
    int iteration = 0;
    double loss = 0.0;  ///< data loss, without the area term
    double area = 0.0;
    std::size_t vertices = 0;
    std::size_t triangles = 0;
    std::int64_t euler_characteristic = 0;
};

struct FitResult {
    DeformableGrid grid;
    IndexedMesh mesh;
    std::vector<IterationLog> trace;  ///< one entry per iteration plus the final state
    QualityReport report;             ///< full certification of the final mesh
    int rollbacks = 0;
};

using LogFn = std::function<void(const IterationLog&)>;

/// Gradient descent on grid values and displacements through extraction.
/// Each iterate is certified for watertightness and manifold connectivity.
/// When the surface vanishes the step is undone and the learning rates are
/// halved, at most cfg.max_retries times.
FitResult fit_grid(const DeformableGrid& init, const TargetSpec& target, const OptimizeConfig& cfg,
                   const LogFn& log = {});

struct FinetuneResult {
    IndexedMesh mesh;
    std::vector<double> loss_trace;
};

/// Moves vertices along the loss gradient; triangles are left untouched.
FinetuneResult finetune_vertices(const IndexedMesh& mesh, const TargetSpec& target, const OptimizeConfig& cfg,
                                 const LogFn& log = {});

void write_trace_csv(const std::vector<IterationLog>& trace, const std::filesystem::path& path);

struct GradcheckEntry {
    std::string parameter;  ///< "value" or "displacement.x|y|z"
    std::size_t node = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    std::string excluded;  ///< reason, empty when checked
};

struct GradcheckOptions {
    double iso = 0.0;
    bool closed = true;
    std::size_t samples = 64;
    std::uint64_t seed = 0;
    bool values = true;
    bool displacement = true;
    double step_scale = 1e-6;  ///< h = step_scale * min spacing
    int threads = 0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> checked;
    std::vector<GradcheckEntry> excluded;
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    std::size_t active_parameters = 0;
};

/// Central differences of the end-to-end loss against the analytic chain,
/// taken term by term so that unchanged summands cancel exactly,
/// at randomly chosen parameters of nodes that own a surface vertex. A
/// parameter whose perturbation changes the mesh connectivity or a discrete
/// loss choice is excluded and listed. Relative error is
/// |a - n| / max(|a|, |n|, 1e-8 * max |analytic|).
GradcheckReport gradcheck(const DeformableGrid& grid, const TargetSpec& target, const GradcheckOptions& options);

nlohmann::json to_json(const GradcheckReport& report);

}  // namespace dmc
