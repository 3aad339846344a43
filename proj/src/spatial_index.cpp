#include "garment/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "garment/errors.hpp"

namespace garment {

namespace {

constexpr int kLeafSize = 8;

bool better(double d2, int idx, double best_d2, int best_idx) {
    return d2 < best_d2 || (d2 == best_d2 && idx < best_idx);
}

}  // namespace

double squared_distance(const AxisBox& box, const Vec3& p) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        if (p[a] < box.lo[a]) d = box.lo[a] - p[a];
        else if (p[a] > box.hi[a]) d = p[a] - box.hi[a];
        d2 += d * d;
    }
    return d2;
}

// Region classification after Ericson, "Real-Time Collision Detection" 5.1.5.
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return {1.0 - v - w, v, w};
}

BarycentricHit make_hit(const Mesh& mesh, int face, const Vec3& bary, const Vec3& query) {
    const Face& f = mesh.faces[face];
    BarycentricHit hit;
    hit.face = face;
    hit.bary = bary;
    hit.point = bary[0] * mesh.vertices[f[0]] + bary[1] * mesh.vertices[f[1]] + bary[2] * mesh.vertices[f[2]];
    const Vec3 d = query - hit.point;
    const double dist = d.norm();
    hit.signed_distance = d.dot(face_area_normal(mesh, face)) < 0.0 ? -dist : dist;
    return hit;
}

// ---------------------------------------------------------------------------
// PointIndex

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<int>(points_.size()));
    }
}

int PointIndex::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end, -1, -1, -1, AxisBox{}});
    AxisBox box;
    for (int i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    nodes_[id].box = box;
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    (box.hi - box.lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int l, int r) {
        return points_[l][axis] < points_[r][axis] || (points_[l][axis] == points_[r][axis] && l < r);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

PointIndex::Result PointIndex::nearest(const Vec3& query) const {
    if (points_.empty()) throw DataError("nearest-neighbor query on an empty point index");
    Result best{-1, std::numeric_limits<double>::infinity()};
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (squared_distance(node.box, query) > best.squared_distance) continue;
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                const double d2 = (points_[idx] - query).squaredNorm();
                if (better(d2, idx, best.squared_distance, best.index)) best = {idx, d2};
            }
            continue;
        }
        const double dl = squared_distance(nodes_[node.left].box, query);
        const double dr = squared_distance(nodes_[node.right].box, query);
        // Push the farther child first so the nearer one is visited next.
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// TriangleIndex

TriangleIndex::TriangleIndex(const Mesh& mesh) : vertices_(mesh.vertices), faces_(mesh.faces) {
    order_.resize(faces_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (faces_.empty()) return;
    std::vector<Vec3> centroids(faces_.size());
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        centroids[f] = (vertices_[faces_[f][0]] + vertices_[faces_[f][1]] + vertices_[faces_[f][2]]) / 3.0;
    }
    nodes_.reserve(2 * faces_.size() / 2 + 2);
    build(0, static_cast<int>(faces_.size()), centroids);
}

int TriangleIndex::build(int begin, int end, std::vector<Vec3>& centroids) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    AxisBox box;
    AxisBox cbox;
    for (int i = begin; i < end; ++i) {
        const Face& f = faces_[order_[i]];
        for (int v : f) box.extend(vertices_[v]);
        cbox.extend(centroids[order_[i]]);
    }
    nodes_[id].box = box;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= 4) return id;

    int axis = 0;
    (cbox.hi - cbox.lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int l, int r) {
        return centroids[l][axis] < centroids[r][axis] || (centroids[l][axis] == centroids[r][axis] && l < r);
    });
    const int left = build(begin, mid, centroids);
    const int right = build(mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

BarycentricHit TriangleIndex::closest_point(const Vec3& query) const {
    if (faces_.empty()) throw DataError("closest-point query on a mesh without faces");
    int best_face = -1;
    Vec3 best_bary = Vec3::Zero();
    double best_d2 = std::numeric_limits<double>::infinity();

    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (squared_distance(node.box, query) > best_d2) continue;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int fi = order_[i];
                const Face& f = faces_[fi];
                const Vec3& a = vertices_[f[0]];
                const Vec3& b = vertices_[f[1]];
                const Vec3& c = vertices_[f[2]];
                const Vec3 bary = closest_point_barycentric(query, a, b, c);
                const Vec3 p = bary[0] * a + bary[1] * b + bary[2] * c;
                const double d2 = (p - query).squaredNorm();
                if (better(d2, fi, best_d2, best_face)) {
                    best_d2 = d2;
                    best_face = fi;
                    best_bary = bary;
                }
            }
            continue;
        }
        const double dl = squared_distance(nodes_[node.left].box, query);
        const double dr = squared_distance(nodes_[node.right].box, query);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }

    BarycentricHit hit;
    hit.face = best_face;
    hit.bary = best_bary;
    const Face& f = faces_[best_face];
    hit.point = best_bary[0] * vertices_[f[0]] + best_bary[1] * vertices_[f[1]] + best_bary[2] * vertices_[f[2]];
    const Vec3 n = (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]);
    const double dist = std::sqrt(best_d2);
    hit.signed_distance = (query - hit.point).dot(n) < 0.0 ? -dist : dist;
    return hit;
}

}  // namespace garment
