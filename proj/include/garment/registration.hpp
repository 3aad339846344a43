#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "garment/deformation_graph.hpp"
#include "garment/mesh.hpp"

namespace garment {

struct RegistrationConfig {
    double w_rigid = 500.0;
    double w_smooth = 500.0;
    double w_bound = 10.0;
    int max_iterations = 30;
    double correspondence_cutoff = 0.05;  // meters
    double normal_cutoff_deg = 60.0;
    double tolerance = 1e-5;              // relative energy decrease
    double grid_spacing = 0.0;            // <= 0: bounding-box diagonal / 20
    // w_rigid and w_smooth are multiplied by `stiffness_relaxation` each time
    // an iteration decreases the energy by less than `relax_threshold`
    // (relative), down to `stiffness_floor` times their configured values.
    // stiffness_relaxation = 1 keeps them fixed.
    double stiffness_relaxation = 0.25;
    double stiffness_floor = 0.01;
    double relax_threshold = 3e-2;
    double initial_damping = 1e-4;
    int max_damping_retries = 12;

    void validate() const;  // throws ConfigError
};

struct BoundarySets {
    std::vector<int> template_indices;  // B_T, ordered
    std::vector<Vec3> scan_points;      // B_S
};

// For every template boundary point t, the farthest scan boundary point among
// those whose nearest template boundary point is t. Template points that no
// scan point maps to stay unpaired. Nearest-point ties go to the lower
// template index; farthest-point ties go to the lower scan index.
// Returns (index into template_points, index into scan_points) pairs ordered
// by template index.
std::vector<std::pair<int, int>> match_boundary(const std::vector<Vec3>& template_points,
                                                const std::vector<Vec3>& scan_points);

struct Correspondence {
    int vertex = 0;
    Vec3 target = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  // zero => point-to-point residual
};

struct BoundaryPair {
    int vertex = 0;
    Vec3 target = Vec3::Zero();
};

struct EnergyTerms {
    double data = 0.0;
    double rigid = 0.0;
    double smooth = 0.0;
    double bound = 0.0;
    double total = 0.0;  // data + w_r rigid + w_s smooth + w_b bound
};

// Energy of the graph state for fixed correspondences. `rest` are the
// template's rest-pose vertex positions the graph is bound to.
EnergyTerms evaluate_energy(const DeformationGraph& graph, const std::vector<Vec3>& rest,
                            const std::vector<Correspondence>& correspondences,
                            const std::vector<BoundaryPair>& boundary_pairs, const RegistrationConfig& config);

// Analytic gradients (w.r.t. DeformationGraph::parameters()) of each
// unweighted term.
struct EnergyGradients {
    Eigen::VectorXd data, rigid, smooth, bound;
};
EnergyGradients energy_gradients(const DeformationGraph& graph, const std::vector<Vec3>& rest,
                                 const std::vector<Correspondence>& correspondences,
                                 const std::vector<BoundaryPair>& boundary_pairs);

struct RegistrationResult {
    Mesh registered;
    DeformationGraph graph;
    EnergyTerms initial;
    EnergyTerms final;  // weighted with the final stiffness
    // Total energy after each accepted iteration, starting with the initial
    // state, each evaluated with the stiffness in effect at that iteration.
    std::vector<double> energy_history;
    int iterations = 0;                  // accepted Gauss-Newton steps
    bool converged = false;
    double stiffness_scale = 1.0;        // final multiplier on w_rigid and w_smooth
};

// Non-rigid ICP of `tmpl` onto `scan`. The scan may be a triangle mesh
// (closest point on surface, point-to-plane) or a point cloud (nearest
// point, point-to-point). When `init` is given it is used as the starting
// graph (it must be bound to `tmpl`); otherwise a fresh grid graph is built.
// The boundary term is active when both boundary sets are non-empty.
RegistrationResult register_template(const Mesh& tmpl, const Mesh& scan, const BoundarySets& boundaries,
                                     const std::optional<DeformationGraph>& init, const RegistrationConfig& config);

}  // namespace garment
