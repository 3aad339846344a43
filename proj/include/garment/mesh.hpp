#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace garment {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

// Indexed triangle surface.
//
// UVs are stored per face corner: `uv_faces[f][c]` indexes `uvs`, so a vertex
// may carry different UVs on either side of a seam. `uv_faces` is either empty
// or parallel to `faces`.
//
// `vertex_normals` is either empty or parallel to `vertices`. A zero vector
// marks a vertex without a defined normal (isolated or zero-area star).
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec2> uvs;
    std::vector<Face> uv_faces;
    std::vector<Vec3> vertex_normals;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    bool has_uvs() const { return !uv_faces.empty(); }
    bool has_normals() const { return !vertex_normals.empty(); }
};

// Throws DataError describing the first violated invariant.
void validate(const Mesh& mesh);

// Same connectivity (faces, uv faces, uv coordinates); positions may differ.
bool same_topology(const Mesh& a, const Mesh& b);

// FNV-1a over vertex count, faces and UV faces. Stable across platforms.
std::uint64_t topology_hash(const Mesh& mesh);

// Unnormalized face normal (cross product); its length is twice the area.
Vec3 face_area_normal(const Mesh& mesh, int face);

struct AxisBox {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double diagonal() const { return (hi - lo).norm(); }
};

AxisBox bounding_box(const std::vector<Vec3>& points);

// Area-weighted vertex normals. Vertices whose incident faces all have zero
// area (or that have no faces) get the zero vector.
std::vector<Vec3> compute_vertex_normals(const Mesh& mesh);

// Copy of `mesh` with `vertex_normals` filled by compute_vertex_normals.
Mesh with_vertex_normals(Mesh mesh);

// Flattened 3v vector (x0,y0,z0,x1,...) and its inverse.
Eigen::VectorXd flatten(const std::vector<Vec3>& points);
std::vector<Vec3> unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat);

}  // namespace garment
