#include "garment/registration.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Sparse>
#include <Eigen/CholmodSupport>

#include "garment/errors.hpp"
#include "garment/spatial_index.hpp"

namespace garment {

void RegistrationConfig::validate() const {
    if (w_rigid < 0.0 || w_smooth < 0.0 || w_bound < 0.0) throw ConfigError("registration weights must be >= 0");
    if (!(correspondence_cutoff > 0.0) || !(normal_cutoff_deg > 0.0)) {
        throw ConfigError("registration cutoffs must be > 0");
    }
    if (!(stiffness_relaxation > 0.0 && stiffness_relaxation <= 1.0) ||
        !(stiffness_floor > 0.0 && stiffness_floor <= 1.0) || !(relax_threshold >= 0.0)) {
        throw ConfigError("stiffness schedule requires 0 < relaxation <= 1, 0 < floor <= 1, threshold >= 0");
    }
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
    if (!(initial_damping > 0.0) || max_damping_retries < 1) throw ConfigError("damping settings must be positive");
}

std::vector<std::pair<int, int>> match_boundary(const std::vector<Vec3>& template_points,
                                                const std::vector<Vec3>& scan_points) {
    std::vector<std::pair<int, int>> pairs;
    if (template_points.empty() || scan_points.empty()) return pairs;

    const PointIndex index(template_points);
    std::vector<int> farthest(template_points.size(), -1);
    std::vector<double> farthest_d2(template_points.size(), -1.0);
    for (int s = 0; s < static_cast<int>(scan_points.size()); ++s) {
        const int t = index.nearest(scan_points[s]).index;
        const double d2 = (template_points[t] - scan_points[s]).squaredNorm();
        if (d2 > farthest_d2[t]) {  // strict: equal distances keep the lower scan index
            farthest_d2[t] = d2;
            farthest[t] = s;
        }
    }
    for (int t = 0; t < static_cast<int>(template_points.size()); ++t) {
        if (farthest[t] >= 0) pairs.emplace_back(t, farthest[t]);
    }
    return pairs;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
constexpr int P = DeformationGraph::kParamsPerNode;

// Appends weighted residual rows (and optionally Jacobian triplets) for each
// energy term. Row order is data, rigid, smooth, bound.
class ResidualBuilder {
public:
    ResidualBuilder(const DeformationGraph& graph, const std::vector<Vec3>& rest, bool jacobian)
        : graph_(graph), rest_(rest), jacobian_(jacobian) {}

    void add_data(const std::vector<Correspondence>& corr, double weight) {
        const double s = std::sqrt(weight);
        for (const Correspondence& c : corr) {
            const Vec3 diff = graph_.deform(c.vertex, rest_[c.vertex]) - c.target;
            if (c.normal.squaredNorm() > 0.0) {
                const int row = push(s * c.normal.dot(diff));
                if (jacobian_) add_point_rows(c.vertex, row, s, &c.normal);
            } else {
                const int row = push(s * diff.x());
                push(s * diff.y());
                push(s * diff.z());
                if (jacobian_) add_point_rows(c.vertex, row, s, nullptr);
            }
        }
    }

    void add_rigid(double weight) {
        const double s = std::sqrt(weight);
        for (int k = 0; k < graph_.node_count(); ++k) {
            const Mat3& A = graph_.affine[k];
            const Mat3 M = A.transpose() * A - Mat3::Identity();
            const int row0 = static_cast<int>(residuals_.size());
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) push(s * M(a, b));
            }
            push(s * (A.determinant() - 1.0));
            if (!jacobian_) continue;
            // d(A^T A)_ab / dA_rc = delta_ac A_rb + A_ra delta_bc
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const int row = row0 + 3 * a + b;
                    for (int r = 0; r < 3; ++r) {
                        add(row, P * k + 3 * a + r, s * A(r, b));
                        add(row, P * k + 3 * b + r, s * A(r, a));
                    }
                }
            }
            // d det / d column c = cross product of the other two columns
            const Vec3 c0 = A.col(1).cross(A.col(2));
            const Vec3 c1 = A.col(2).cross(A.col(0));
            const Vec3 c2 = A.col(0).cross(A.col(1));
            for (int r = 0; r < 3; ++r) {
                add(row0 + 9, P * k + r, s * c0[r]);
                add(row0 + 9, P * k + 3 + r, s * c1[r]);
                add(row0 + 9, P * k + 6 + r, s * c2[r]);
            }
        }
    }

    void add_smooth(double weight) {
        const double s = std::sqrt(weight);
        for (const auto& e : graph_.edges) {
            add_smooth_pair(e[0], e[1], s);
            add_smooth_pair(e[1], e[0], s);
        }
    }

    void add_bound(const std::vector<BoundaryPair>& pairs, double weight) {
        const double s = std::sqrt(weight);
        for (const BoundaryPair& p : pairs) {
            const Vec3 diff = graph_.deform(p.vertex, rest_[p.vertex]) - p.target;
            const int row = push(s * diff.x());
            push(s * diff.y());
            push(s * diff.z());
            if (jacobian_) add_point_rows(p.vertex, row, s, nullptr);
        }
    }

    double squared_norm_from(int row_begin) const {
        double sum = 0.0;
        for (std::size_t i = row_begin; i < residuals_.size(); ++i) sum += residuals_[i] * residuals_[i];
        return sum;
    }

    int rows() const { return static_cast<int>(residuals_.size()); }
    const std::vector<double>& residuals() const { return residuals_; }
    const Triplets& triplets() const { return triplets_; }

    Eigen::SparseMatrix<double> jacobian() const {
        Eigen::SparseMatrix<double> J(rows(), graph_.parameter_count());
        J.setFromTriplets(triplets_.begin(), triplets_.end());
        return J;
    }

    Eigen::VectorXd residual_vector() const {
        return Eigen::Map<const Eigen::VectorXd>(residuals_.data(), static_cast<Eigen::Index>(residuals_.size()));
    }

private:
    int push(double value) {
        residuals_.push_back(value);
        return static_cast<int>(residuals_.size()) - 1;
    }
    void add(int row, int col, double value) {
        if (value != 0.0) triplets_.emplace_back(row, col, value);
    }

    // Rows of a deformed vertex position; with `normal` they are projected
    // onto it (one row), otherwise three rows x, y, z.
    void add_point_rows(int vertex, int row, double s, const Vec3* normal) {
        const Vec3& p = rest_[vertex];
        for (const NodeBinding& b : graph_.bindings[vertex]) {
            const Vec3 d = p - graph_.nodes[b.node];
            const int base = P * b.node;
            for (int r = 0; r < 3; ++r) {
                const int out_row = normal ? row : row + r;
                const double proj = normal ? (*normal)[r] : 1.0;
                const double f = s * b.weight * proj;
                for (int c = 0; c < 3; ++c) add(out_row, base + 3 * c + r, f * d[c]);
                add(out_row, base + 9 + r, f);
            }
        }
    }

    void add_smooth_pair(int k, int l, double s) {
        const Vec3 d = graph_.nodes[l] - graph_.nodes[k];
        const Vec3 res = graph_.affine[k] * d + graph_.nodes[k] + graph_.translation[k] -
                         (graph_.nodes[l] + graph_.translation[l]);
        const int row = push(s * res.x());
        push(s * res.y());
        push(s * res.z());
        if (!jacobian_) return;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) add(row + r, P * k + 3 * c + r, s * d[c]);
            add(row + r, P * k + 9 + r, s);
            add(row + r, P * l + 9 + r, -s);
        }
    }

    const DeformationGraph& graph_;
    const std::vector<Vec3>& rest_;
    bool jacobian_;
    std::vector<double> residuals_;
    Triplets triplets_;
};

struct ScanTarget {
    Mesh mesh;
    bool surface = false;
    TriangleIndex triangles;
    PointIndex points;
};

ScanTarget make_target(const Mesh& scan) {
    if (scan.vertices.empty()) throw DataError("scan is empty");
    ScanTarget target;
    target.mesh = scan;
    target.surface = !scan.faces.empty();
    if (target.surface) {
        target.mesh.vertex_normals = compute_vertex_normals(scan);
        target.triangles = TriangleIndex(target.mesh);
    } else {
        target.points = PointIndex(scan.vertices);
    }
    return target;
}

std::vector<Correspondence> find_correspondences(const Mesh& deformed, const ScanTarget& target,
                                                 const RegistrationConfig& config) {
    const std::vector<Vec3> normals = compute_vertex_normals(deformed);
    const double cos_cutoff = std::cos(config.normal_cutoff_deg * std::numbers::pi / 180.0);
    const double cutoff2 = config.correspondence_cutoff * config.correspondence_cutoff;
    std::vector<Correspondence> out;
    out.reserve(deformed.vertices.size());
    for (int v = 0; v < deformed.vertex_count(); ++v) {
        const Vec3& p = deformed.vertices[v];
        Correspondence c;
        c.vertex = v;
        if (target.surface) {
            const BarycentricHit hit = target.triangles.closest_point(p);
            if ((hit.point - p).squaredNorm() > cutoff2) continue;
            const Face& f = target.mesh.faces[hit.face];
            Vec3 n = hit.bary[0] * target.mesh.vertex_normals[f[0]] + hit.bary[1] * target.mesh.vertex_normals[f[1]] +
                     hit.bary[2] * target.mesh.vertex_normals[f[2]];
            if (n.norm() < 1e-12) continue;
            n.normalize();
            if (normals[v].squaredNorm() > 0.0 && normals[v].dot(n) < cos_cutoff) continue;
            c.target = hit.point;
            c.normal = n;
        } else {
            const PointIndex::Result nn = target.points.nearest(p);
            if (nn.squared_distance > cutoff2) continue;
            c.target = target.points.points()[nn.index];
        }
        out.push_back(c);
    }
    return out;
}

std::vector<BoundaryPair> find_boundary_pairs(const std::vector<Vec3>& deformed, const BoundarySets& boundaries) {
    std::vector<BoundaryPair> out;
    if (boundaries.template_indices.empty() || boundaries.scan_points.empty()) return out;
    std::vector<Vec3> tpts;
    tpts.reserve(boundaries.template_indices.size());
    for (int idx : boundaries.template_indices) tpts.push_back(deformed[idx]);
    for (const auto& [t, s] : match_boundary(tpts, boundaries.scan_points)) {
        out.push_back({boundaries.template_indices[t], boundaries.scan_points[s]});
    }
    return out;
}

struct State {
    std::vector<Correspondence> correspondences;
    std::vector<BoundaryPair> boundary_pairs;
    EnergyTerms energy;
};

State evaluate_state(const DeformationGraph& graph, const Mesh& tmpl, const ScanTarget& target,
                     const BoundarySets& boundaries, const RegistrationConfig& config) {
    Mesh deformed = tmpl;
    deformed.vertices = graph.deform(tmpl.vertices);
    State state;
    state.correspondences = find_correspondences(deformed, target, config);
    if (config.w_bound > 0.0) state.boundary_pairs = find_boundary_pairs(deformed.vertices, boundaries);
    state.energy = evaluate_energy(graph, tmpl.vertices, state.correspondences, state.boundary_pairs, config);
    return state;
}

void check_finite(const EnergyTerms& e) {
    const std::pair<const char*, double> terms[] = {
        {"data", e.data}, {"rigid", e.rigid}, {"smooth", e.smooth}, {"bound", e.bound}};
    for (const auto& [name, value] : terms) {
        if (!std::isfinite(value)) throw NumericalError(std::string("non-finite registration energy in term ") + name);
    }
}

}  // namespace

EnergyTerms evaluate_energy(const DeformationGraph& graph, const std::vector<Vec3>& rest,
                            const std::vector<Correspondence>& correspondences,
                            const std::vector<BoundaryPair>& boundary_pairs, const RegistrationConfig& config) {
    ResidualBuilder rb(graph, rest, false);
    EnergyTerms e;
    rb.add_data(correspondences, 1.0);
    e.data = rb.squared_norm_from(0);
    int mark = rb.rows();
    rb.add_rigid(1.0);
    e.rigid = rb.squared_norm_from(mark);
    mark = rb.rows();
    rb.add_smooth(1.0);
    e.smooth = rb.squared_norm_from(mark);
    mark = rb.rows();
    rb.add_bound(boundary_pairs, 1.0);
    e.bound = rb.squared_norm_from(mark);
    e.total = e.data + config.w_rigid * e.rigid + config.w_smooth * e.smooth + config.w_bound * e.bound;
    return e;
}

EnergyGradients energy_gradients(const DeformationGraph& graph, const std::vector<Vec3>& rest,
                                 const std::vector<Correspondence>& correspondences,
                                 const std::vector<BoundaryPair>& boundary_pairs) {
    auto gradient = [&](auto&& fill) {
        ResidualBuilder rb(graph, rest, true);
        fill(rb);
        return Eigen::VectorXd(2.0 * (rb.jacobian().transpose() * rb.residual_vector()));
    };
    EnergyGradients g;
    g.data = gradient([&](ResidualBuilder& rb) { rb.add_data(correspondences, 1.0); });
    g.rigid = gradient([&](ResidualBuilder& rb) { rb.add_rigid(1.0); });
    g.smooth = gradient([&](ResidualBuilder& rb) { rb.add_smooth(1.0); });
    g.bound = gradient([&](ResidualBuilder& rb) { rb.add_bound(boundary_pairs, 1.0); });
    return g;
}

// Squared meters; below this the template already sits on the scan.
constexpr double kNegligibleEnergy = 1e-20;

RegistrationResult register_template(const Mesh& tmpl, const Mesh& scan, const BoundarySets& boundaries,
                                     const std::optional<DeformationGraph>& init, const RegistrationConfig& config) {
    config.validate();
    if (tmpl.vertices.empty()) throw DataError("template is empty");
    for (int idx : boundaries.template_indices) {
        if (idx < 0 || idx >= tmpl.vertex_count()) {
            throw DataError("template boundary index " + std::to_string(idx) + " out of range");
        }
    }
    const ScanTarget target = make_target(scan);

    RegistrationResult result;
    result.graph = init ? *init : build_grid_graph(tmpl, config.grid_spacing);
    if (static_cast<int>(result.graph.bindings.size()) != tmpl.vertex_count()) {
        throw DataError("initial deformation graph is bound to a different template");
    }
    DeformationGraph& graph = result.graph;

    // Rigid and smooth weights start at the configured values and are relaxed
    // toward `stiffness_floor` of them whenever progress stalls.
    RegistrationConfig active = config;
    double scale = 1.0;
    auto can_relax = [&] { return scale > config.stiffness_floor; };

    State state = evaluate_state(graph, tmpl, target, boundaries, active);
    check_finite(state.energy);
    result.initial = state.energy;
    result.energy_history.push_back(state.energy.total);

    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> solver;
    double damping = config.initial_damping;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        if (state.energy.total <= kNegligibleEnergy) {
            result.converged = true;
            break;
        }
        ResidualBuilder rb(graph, tmpl.vertices, true);
        rb.add_data(state.correspondences, 1.0);
        rb.add_rigid(active.w_rigid);
        rb.add_smooth(active.w_smooth);
        rb.add_bound(state.boundary_pairs, active.w_bound);
        const Eigen::SparseMatrix<double> J = rb.jacobian();
        const Eigen::SparseMatrix<double> H = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * rb.residual_vector();
        const Eigen::VectorXd x0 = graph.parameters();

        bool accepted = false;
        bool any_factorized = false;
        double decrease = 0.0;
        for (int retry = 0; retry < config.max_damping_retries; ++retry) {
            Eigen::SparseMatrix<double> A = H;
            for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += damping * (H.coeff(i, i) + 1e-9);
            if (retry == 0) solver.analyzePattern(A);
            solver.factorize(A);
            if (solver.info() != Eigen::Success) {
                damping *= 10.0;
                continue;
            }
            any_factorized = true;
            const Eigen::VectorXd step = solver.solve(-g);
            if (solver.info() != Eigen::Success || !step.allFinite()) {
                damping *= 10.0;
                continue;
            }
            DeformationGraph trial = graph;
            trial.set_parameters(x0 + step);
            State next = evaluate_state(trial, tmpl, target, boundaries, active);
            check_finite(next.energy);
            if (next.energy.total <= state.energy.total) {
                decrease = (state.energy.total - next.energy.total) / state.energy.total;
                graph = std::move(trial);
                state = std::move(next);
                damping = std::max(damping * 0.5, 1e-12);
                accepted = true;
                result.iterations++;
                result.energy_history.push_back(state.energy.total);
                break;
            }
            damping *= 10.0;
        }
        if (!any_factorized) throw NumericalError("registration normal equations could not be factorized");

        // A rejected step means no damped step decreases the energy.
        const bool stalled = !accepted || decrease <= config.relax_threshold;
        if (stalled && can_relax()) {
            scale = std::max(scale * config.stiffness_relaxation, config.stiffness_floor);
            active.w_rigid = config.w_rigid * scale;
            active.w_smooth = config.w_smooth * scale;
            // Lower weights on nonnegative terms cannot raise the energy.
            state.energy = evaluate_energy(graph, tmpl.vertices, state.correspondences, state.boundary_pairs, active);
            continue;
        }
        if (!accepted || decrease <= config.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.stiffness_scale = scale;

    result.final = state.energy;
    result.registered = tmpl;
    result.registered.vertices = graph.deform(tmpl.vertices);
    if (result.registered.has_normals()) result.registered.vertex_normals = compute_vertex_normals(result.registered);
    return result;
}

}  // namespace garment
