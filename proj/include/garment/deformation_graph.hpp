#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "garment/mesh.hpp"

namespace garment {

struct NodeBinding {
    int node = 0;
    double weight = 0.0;
};

// Embedded deformation on a regular grid. Each node k carries an affine map
// (A_k, t_k); a bound point p moves to sum_k w_k (A_k (p - g_k) + g_k + t_k).
// Only grid nodes that influence at least one template vertex are kept.
struct DeformationGraph {
    double spacing = 0.0;
    std::vector<Vec3> nodes;                         // rest positions g_k
    std::vector<Mat3> affine;                        // A_k
    std::vector<Vec3> translation;                   // t_k
    std::vector<std::array<int, 2>> edges;           // grid neighbours, k < l
    std::vector<std::vector<NodeBinding>> bindings;  // per template vertex, <= 8

    static constexpr int kParamsPerNode = 12;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int parameter_count() const { return kParamsPerNode * node_count(); }

    Vec3 deform(int vertex, const Vec3& rest) const;
    std::vector<Vec3> deform(const std::vector<Vec3>& rest) const;

    void reset_to_identity();

    // Parameter vector layout per node: A_k column-major (9), then t_k (3).
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params);
};

// Grid over the template's bounding box grown by half a cell on each side.
// `spacing <= 0` selects bounding-box diagonal / 20. Vertices bind to the
// eight corners of their cell with trilinear weights (zero weights dropped).
DeformationGraph build_grid_graph(const Mesh& tmpl, double spacing = 0.0);

// One node at the bounding-box centre; every vertex bound with weight 1.
DeformationGraph build_single_node_graph(const Mesh& tmpl);

}  // namespace garment
