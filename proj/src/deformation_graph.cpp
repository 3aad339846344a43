#include "garment/deformation_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "garment/errors.hpp"

namespace garment {

Vec3 DeformationGraph::deform(int vertex, const Vec3& rest) const {
    // Written as a displacement so the identity graph reproduces `rest` exactly.
    Vec3 displacement = Vec3::Zero();
    for (const NodeBinding& b : bindings[vertex]) {
        displacement += b.weight * ((affine[b.node] - Mat3::Identity()) * (rest - nodes[b.node]) + translation[b.node]);
    }
    return rest + displacement;
}

std::vector<Vec3> DeformationGraph::deform(const std::vector<Vec3>& rest) const {
    if (rest.size() != bindings.size()) throw DataError("deformation graph is bound to a different vertex count");
    std::vector<Vec3> out(rest.size());
    for (std::size_t v = 0; v < rest.size(); ++v) out[v] = deform(static_cast<int>(v), rest[v]);
    return out;
}

void DeformationGraph::reset_to_identity() {
    affine.assign(nodes.size(), Mat3::Identity());
    translation.assign(nodes.size(), Vec3::Zero());
}

Eigen::VectorXd DeformationGraph::parameters() const {
    Eigen::VectorXd params(parameter_count());
    for (int k = 0; k < node_count(); ++k) {
        params.segment<9>(kParamsPerNode * k) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(affine[k].data());
        params.segment<3>(kParamsPerNode * k + 9) = translation[k];
    }
    return params;
}

void DeformationGraph::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& params) {
    if (params.size() != parameter_count()) throw DataError("parameter vector has the wrong length");
    for (int k = 0; k < node_count(); ++k) {
        Eigen::Map<Eigen::Matrix<double, 9, 1>>(affine[k].data()) = params.segment<9>(kParamsPerNode * k);
        translation[k] = params.segment<3>(kParamsPerNode * k + 9);
    }
}

DeformationGraph build_grid_graph(const Mesh& tmpl, double spacing) {
    if (tmpl.vertices.empty()) throw DataError("cannot build a deformation graph for an empty template");
    const AxisBox box = bounding_box(tmpl.vertices);
    if (spacing <= 0.0) spacing = box.diagonal() / 20.0;
    if (!(spacing > 0.0)) throw DataError("template bounding box is degenerate");

    const Vec3 origin = box.lo - Vec3::Constant(0.5 * spacing);
    Eigen::Vector3i dims;
    for (int a = 0; a < 3; ++a) {
        dims[a] = static_cast<int>(std::floor((box.hi[a] + 0.5 * spacing - origin[a]) / spacing)) + 2;
    }
    auto grid_id = [&](int i, int j, int k) -> long {
        return (static_cast<long>(k) * dims[1] + j) * dims[0] + i;
    };

    DeformationGraph graph;
    graph.spacing = spacing;
    std::map<long, int> compact;  // ordered, so node numbering is deterministic
    std::vector<std::vector<std::pair<long, double>>> raw(tmpl.vertices.size());

    for (std::size_t v = 0; v < tmpl.vertices.size(); ++v) {
        const Vec3 rel = (tmpl.vertices[v] - origin) / spacing;
        int cell[3];
        double frac[3];
        for (int a = 0; a < 3; ++a) {
            cell[a] = std::clamp(static_cast<int>(std::floor(rel[a])), 0, dims[a] - 2);
            frac[a] = std::clamp(rel[a] - cell[a], 0.0, 1.0);
        }
        for (int corner = 0; corner < 8; ++corner) {
            const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
            const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                             (dk ? frac[2] : 1.0 - frac[2]);
            if (w <= 0.0) continue;
            const long id = grid_id(cell[0] + di, cell[1] + dj, cell[2] + dk);
            raw[v].emplace_back(id, w);
            compact.emplace(id, 0);
        }
    }

    int next = 0;
    for (auto& [id, index] : compact) {
        index = next++;
        const long i = id % dims[0];
        const long j = (id / dims[0]) % dims[1];
        const long k = id / (static_cast<long>(dims[0]) * dims[1]);
        graph.nodes.push_back(origin + spacing * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
    }
    graph.bindings.resize(tmpl.vertices.size());
    for (std::size_t v = 0; v < raw.size(); ++v) {
        double sum = 0.0;
        for (const auto& [id, w] : raw[v]) sum += w;
        for (const auto& [id, w] : raw[v]) graph.bindings[v].push_back({compact.at(id), w / sum});
    }
    for (const auto& [id, index] : compact) {
        const long i = id % dims[0];
        const long j = (id / dims[0]) % dims[1];
        const long steps[3] = {1, dims[0], static_cast<long>(dims[0]) * dims[1]};
        const bool inside[3] = {i + 1 < dims[0], j + 1 < dims[1], true};
        for (int a = 0; a < 3; ++a) {
            if (!inside[a]) continue;
            const auto it = compact.find(id + steps[a]);
            if (it != compact.end()) graph.edges.push_back({index, it->second});
        }
    }
    graph.reset_to_identity();
    return graph;
}

DeformationGraph build_single_node_graph(const Mesh& tmpl) {
    if (tmpl.vertices.empty()) throw DataError("cannot build a deformation graph for an empty template");
    const AxisBox box = bounding_box(tmpl.vertices);
    DeformationGraph graph;
    graph.spacing = box.diagonal();
    graph.nodes.push_back(0.5 * (box.lo + box.hi));
    graph.bindings.assign(tmpl.vertices.size(), {NodeBinding{0, 1.0}});
    graph.reset_to_identity();
    return graph;
}

}  // namespace garment
