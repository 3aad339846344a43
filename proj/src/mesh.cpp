#include "garment/mesh.hpp"

#include <cmath>
#include <string>

#include "garment/errors.hpp"

namespace garment {

namespace {

bool valid_face(const Face& f, int count) {
    for (int idx : f) {
        if (idx < 0 || idx >= count) return false;
    }
    return f[0] != f[1] && f[1] != f[2] && f[0] != f[2];
}

class Fnv1a {
public:
    void add(std::uint64_t value) {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (value >> (8 * i)) & 0xffu;
            hash_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace

void validate(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    for (int f = 0; f < mesh.face_count(); ++f) {
        if (!valid_face(mesh.faces[f], n)) {
            throw DataError("face " + std::to_string(f) + " has an out-of-range or repeated vertex index");
        }
    }
    if (!mesh.uv_faces.empty()) {
        if (mesh.uv_faces.size() != mesh.faces.size()) {
            throw DataError("uv face count does not match face count");
        }
        const int nuv = static_cast<int>(mesh.uvs.size());
        for (int f = 0; f < mesh.face_count(); ++f) {
            for (int idx : mesh.uv_faces[f]) {
                if (idx < 0 || idx >= nuv) {
                    throw DataError("uv face " + std::to_string(f) + " references missing uv " + std::to_string(idx));
                }
            }
        }
        for (std::size_t i = 0; i < mesh.uvs.size(); ++i) {
            const Vec2& uv = mesh.uvs[i];
            if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
                throw DataError("uv " + std::to_string(i) + " lies outside [0,1]^2");
            }
        }
    }
    if (!mesh.vertex_normals.empty()) {
        if (static_cast<int>(mesh.vertex_normals.size()) != n) {
            throw DataError("vertex normal count does not match vertex count");
        }
        for (int i = 0; i < n; ++i) {
            const double len = mesh.vertex_normals[i].norm();
            if (len != 0.0 && std::abs(len - 1.0) > 1e-6) {
                throw DataError("vertex normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
}

bool same_topology(const Mesh& a, const Mesh& b) {
    return a.vertices.size() == b.vertices.size() && a.faces == b.faces && a.uv_faces == b.uv_faces &&
           a.uvs == b.uvs;
}

std::uint64_t topology_hash(const Mesh& mesh) {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(mesh.vertices.size()));
    h.add(static_cast<std::uint64_t>(mesh.faces.size()));
    for (const Face& f : mesh.faces) {
        for (int idx : f) h.add(static_cast<std::uint64_t>(idx));
    }
    h.add(static_cast<std::uint64_t>(mesh.uv_faces.size()));
    for (const Face& f : mesh.uv_faces) {
        for (int idx : f) h.add(static_cast<std::uint64_t>(idx));
    }
    return h.value();
}

Vec3 face_area_normal(const Mesh& mesh, int face) {
    const Face& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    return (b - a).cross(c - a);
}

AxisBox bounding_box(const std::vector<Vec3>& points) {
    AxisBox box;
    for (const Vec3& p : points) box.extend(p);
    return box;
}

std::vector<Vec3> compute_vertex_normals(const Mesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Vec3 n = face_area_normal(mesh, f);
        for (int idx : mesh.faces[f]) normals[idx] += n;
    }
    for (Vec3& n : normals) {
        const double len = n.norm();
        // A star of zero-area faces leaves the accumulated vector at (near) zero.
        if (len > 1e-300 && std::isfinite(len)) {
            n /= len;
        } else {
            n.setZero();
        }
    }
    return normals;
}

Mesh with_vertex_normals(Mesh mesh) {
    mesh.vertex_normals = compute_vertex_normals(mesh);
    return mesh;
}

Eigen::VectorXd flatten(const std::vector<Vec3>& points) {
    Eigen::VectorXd flat(3 * static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) flat.segment<3>(3 * i) = points[i];
    return flat;
}

std::vector<Vec3> unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    std::vector<Vec3> points(static_cast<std::size_t>(flat.size() / 3));
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = flat.segment<3>(3 * i);
    return points;
}

}  // namespace garment
