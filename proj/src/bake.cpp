#include "garment/bake.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "garment/errors.hpp"
#include "garment/spatial_index.hpp"

namespace garment {

namespace {

constexpr double kInsideEps = 1e-12;

void require_uvs(const Mesh& mesh) {
    if (!mesh.has_uvs()) throw DataError("mesh has no UV coordinates");
}

void require_normals(const Mesh& mesh) {
    if (!mesh.has_normals()) throw DataError("mesh has no vertex normals");
}

Vec3 interpolate(const std::vector<Vec3>& values, const Face& f, const Vec3& w) {
    return w[0] * values[static_cast<std::size_t>(f[0])] + w[1] * values[static_cast<std::size_t>(f[1])] +
           w[2] * values[static_cast<std::size_t>(f[2])];
}

void check_size(const NormalMap& map, int width, int height) {
    if (map.width != width || map.height != height) {
        throw DataError("map is " + std::to_string(map.width) + "x" + std::to_string(map.height) + ", frames are " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
}

}  // namespace

UvRaster rasterize_uvs(const Mesh& mesh, int width, int height) {
    require_uvs(mesh);
    if (width <= 0 || height <= 0) throw ConfigError("raster resolution must be positive");
    UvRaster r;
    r.width = width;
    r.height = height;
    r.face.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), -1);
    r.bary.assign(r.face.size(), Vec3::Zero());
    std::vector<double> inside_margin(r.face.size(), 0.0);

    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& uf = mesh.uv_faces[static_cast<std::size_t>(f)];
        const Vec2& a = mesh.uvs[static_cast<std::size_t>(uf[0])];
        const Vec2& b = mesh.uvs[static_cast<std::size_t>(uf[1])];
        const Vec2& c = mesh.uvs[static_cast<std::size_t>(uf[2])];
        const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (det == 0.0) continue;  // zero-area in UV: covers nothing
        const double umin = std::min({a.x(), b.x(), c.x()}), umax = std::max({a.x(), b.x(), c.x()});
        const double vmin = std::min({a.y(), b.y(), c.y()}), vmax = std::max({a.y(), b.y(), c.y()});
        const int i0 = std::max(0, static_cast<int>(std::floor(umin * width - 0.5)));
        const int i1 = std::min(width - 1, static_cast<int>(std::ceil(umax * width - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor((1.0 - vmax) * height - 0.5)));
        const int j1 = std::min(height - 1, static_cast<int>(std::ceil((1.0 - vmin) * height - 0.5)));
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const Vec2 p = texel_center_uv(i, j, width, height);
                const double wb = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / det;
                const double wc = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / det;
                const double wa = 1.0 - wb - wc;
                const double margin = std::min({wa, wb, wc});
                if (margin < -kInsideEps) continue;
                const std::size_t k = r.index(i, j);
                if (r.face[k] >= 0) {
                    if (margin > 1e-9 && inside_margin[k] > 1e-9) {
                        throw DataError("overlapping UV triangles " + std::to_string(r.face[k]) + " and " +
                                        std::to_string(f) + " at texel (" + std::to_string(i) + ", " +
                                        std::to_string(j) + ")");
                    }
                    if (inside_margin[k] >= margin) continue;  // keep the earlier face unless strictly deeper
                }
                r.face[k] = f;
                r.bary[k] = Vec3(std::max(wa, 0.0), std::max(wb, 0.0), std::max(wc, 0.0));
                r.bary[k] /= r.bary[k].sum();
                inside_margin[k] = margin;
            }
        }
    }
    return r;
}

NormalMap bake_lr(const Mesh& mesh, int width, int height) { return bake_lr(mesh, rasterize_uvs(mesh, width, height)); }

NormalMap bake_lr(const Mesh& mesh, const UvRaster& raster) {
    require_normals(mesh);
    NormalMap map(raster.width, raster.height, NormalFrame::Global);
    for (int j = 0; j < raster.height; ++j) {
        for (int i = 0; i < raster.width; ++i) {
            const std::size_t k = raster.index(i, j);
            const int f = raster.face[k];
            if (f < 0) continue;
            map.set(i, j, interpolate(mesh.vertex_normals, mesh.faces[static_cast<std::size_t>(f)], raster.bary[k]));
        }
    }
    return map;
}

NormalMap bake_hr(const Mesh& scan, const Mesh& reconstruction, int width, int height, double cutoff) {
    if (scan.face_count() == 0) throw DataError("scan has no faces");
    if (!(cutoff > 0.0)) throw ConfigError("HR bake cutoff must be > 0");
    const UvRaster raster = rasterize_uvs(reconstruction, width, height);
    const std::vector<Vec3> scan_normals = scan.has_normals() ? scan.vertex_normals : compute_vertex_normals(scan);
    const TriangleIndex index(scan);
    NormalMap map(width, height, NormalFrame::Global);
    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            const std::size_t k = raster.index(i, j);
            const int f = raster.face[k];
            if (f < 0) continue;
            const Vec3 p = interpolate(reconstruction.vertices, reconstruction.faces[static_cast<std::size_t>(f)], raster.bary[k]);
            const BarycentricHit hit = index.closest_point(p);
            if ((hit.point - p).norm() > cutoff) continue;
            map.set(i, j, interpolate(scan_normals, scan.faces[static_cast<std::size_t>(hit.face)], hit.bary));
        }
    }
    return map;
}

NormalMap dilate(const NormalMap& map, int rings) {
    NormalMap out = map;
    for (int ring = 0; ring < rings; ++ring) {
        const NormalMap src = out;
        for (int j = 0; j < src.height; ++j) {
            for (int i = 0; i < src.width; ++i) {
                if (src.is_defined(i, j)) continue;
                Vec3 sum = Vec3::Zero();
                const int di[] = {-1, 1, 0, 0}, dj[] = {0, 0, -1, 1};
                for (int n = 0; n < 4; ++n) {
                    const int x = i + di[n], y = j + dj[n];
                    if (x < 0 || y < 0 || x >= src.width || y >= src.height || !src.is_defined(x, y)) continue;
                    sum += src.at(x, y);
                }
                if (sum != Vec3::Zero()) out.set(i, j, sum);
            }
        }
    }
    return out;
}

TangentFrames tangent_frames(const Mesh& mesh, int width, int height) {
    require_normals(mesh);
    const UvRaster raster = rasterize_uvs(mesh, width, height);
    TangentFrames tf;
    tf.width = width;
    tf.height = height;
    tf.frames.assign(raster.face.size(), Mat3::Identity());
    tf.valid.assign(raster.face.size(), 0);

    // Per-face dP/du, dP/dv.
    std::vector<Vec3> dpdu(static_cast<std::size_t>(mesh.face_count())), dpdv(dpdu.size());
    std::vector<std::uint8_t> face_ok(dpdu.size(), 0);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& vf = mesh.faces[static_cast<std::size_t>(f)];
        const Face& uf = mesh.uv_faces[static_cast<std::size_t>(f)];
        const Vec3 e1 = mesh.vertices[static_cast<std::size_t>(vf[1])] - mesh.vertices[static_cast<std::size_t>(vf[0])];
        const Vec3 e2 = mesh.vertices[static_cast<std::size_t>(vf[2])] - mesh.vertices[static_cast<std::size_t>(vf[0])];
        const Vec2 d1 = mesh.uvs[static_cast<std::size_t>(uf[1])] - mesh.uvs[static_cast<std::size_t>(uf[0])];
        const Vec2 d2 = mesh.uvs[static_cast<std::size_t>(uf[2])] - mesh.uvs[static_cast<std::size_t>(uf[0])];
        const double det = d1.x() * d2.y() - d2.x() * d1.y();
        if (std::abs(det) <= 1e-14) continue;
        dpdu[static_cast<std::size_t>(f)] = (e1 * d2.y() - e2 * d1.y()) / det;
        dpdv[static_cast<std::size_t>(f)] = (e2 * d1.x() - e1 * d2.x()) / det;
        face_ok[static_cast<std::size_t>(f)] = 1;
    }

    for (std::size_t k = 0; k < raster.face.size(); ++k) {
        const int f = raster.face[k];
        if (f < 0 || !face_ok[static_cast<std::size_t>(f)]) continue;
        const Vec3 n = interpolate(mesh.vertex_normals, mesh.faces[static_cast<std::size_t>(f)], raster.bary[k]);
        if (!(n.norm() > 0.0)) continue;
        const Vec3 N = n.normalized();
        const Vec3 t = dpdu[static_cast<std::size_t>(f)] - N * N.dot(dpdu[static_cast<std::size_t>(f)]);
        if (!(t.norm() > 1e-12 * dpdu[static_cast<std::size_t>(f)].norm())) continue;
        const Vec3 T = t.normalized();
        // Keep the UV handedness: B along +dP/dv.
        const double handed = N.cross(T).dot(dpdv[static_cast<std::size_t>(f)]) < 0.0 ? -1.0 : 1.0;
        Mat3 frame;
        frame.col(0) = T;
        frame.col(1) = handed * N.cross(T);
        frame.col(2) = N;
        tf.frames[k] = frame;
        tf.valid[k] = 1;
    }
    return tf;
}

NormalMap to_tangent(const NormalMap& global, const TangentFrames& frames) {
    check_size(global, frames.width, frames.height);
    NormalMap out(global.width, global.height, NormalFrame::Tangent);
    for (int j = 0; j < global.height; ++j) {
        for (int i = 0; i < global.width; ++i) {
            const std::size_t k = global.index(i, j);
            if (!global.defined[k] || !frames.valid[k]) continue;
            out.set(i, j, frames.frames[k].transpose() * global.normals[k]);
        }
    }
    return out;
}

NormalMap to_global(const NormalMap& tangent, const TangentFrames& frames) {
    check_size(tangent, frames.width, frames.height);
    NormalMap out(tangent.width, tangent.height, NormalFrame::Global);
    for (int j = 0; j < tangent.height; ++j) {
        for (int i = 0; i < tangent.width; ++i) {
            const std::size_t k = tangent.index(i, j);
            if (!tangent.defined[k] || !frames.valid[k]) continue;
            out.set(i, j, frames.frames[k] * tangent.normals[k]);
        }
    }
    return out;
}

}  // namespace garment
