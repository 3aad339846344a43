#pragma once

#include <span>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

struct BarycentricHit {
    int face = -1;
    Vec3 bary = Vec3::Zero();  // weights of the face's three corners, summing to 1
    Vec3 point = Vec3::Zero();
    // Distance to the query, positive on the side the face normal points to.
    double signed_distance = 0.0;
};

// Closest point on triangle (a,b,c) to p, as barycentric weights. Exact on
// vertices and edges (the zero weights are exactly zero there).
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Balanced kd-tree over a point set. Ties are resolved toward the lowest
// point index, so results match a linear scan exactly.
class PointIndex {
public:
    PointIndex() = default;
    explicit PointIndex(std::vector<Vec3> points);

    struct Result {
        int index = -1;
        double squared_distance = 0.0;
    };

    // Requires a non-empty index.
    Result nearest(const Vec3& query) const;

    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int begin, end;     // range into order_
        int left = -1, right = -1;
        int axis = -1;      // -1 for leaves
        AxisBox box;
    };
    int build(int begin, int end);

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// Bounding volume hierarchy over a mesh's triangles for closest-point
// queries. Holds its own copy of the geometry.
class TriangleIndex {
public:
    TriangleIndex() = default;
    explicit TriangleIndex(const Mesh& mesh);

    // Requires at least one face. Ties resolved toward the lowest face index.
    BarycentricHit closest_point(const Vec3& query) const;

    int face_count() const { return static_cast<int>(faces_.size()); }

private:
    struct Node {
        AxisBox box;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };
    int build(int begin, int end, std::vector<Vec3>& centroids);

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// Evaluates a hit against `mesh`: the barycentric blend of its corners.
BarycentricHit make_hit(const Mesh& mesh, int face, const Vec3& bary, const Vec3& query);

// Squared distance from p to an axis-aligned box (0 inside).
double squared_distance(const AxisBox& box, const Vec3& p);

}  // namespace garment
