#include "garment/primitives.hpp"

#include <cmath>
#include <numbers>

#include "garment/errors.hpp"

namespace garment {

Mesh make_plane_grid(int nx, int ny, double sx, double sy) {
    if (nx < 1 || ny < 1) throw DataError("plane grid needs at least one cell per axis");
    Mesh mesh;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const double u = static_cast<double>(i) / nx;
            const double v = static_cast<double>(j) / ny;
            mesh.vertices.emplace_back(u * sx, v * sy, 0.0);
            mesh.uvs.emplace_back(u, v);
        }
    }
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Face a{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
            const Face b{id(i, j), id(i + 1, j + 1), id(i, j + 1)};
            mesh.faces.push_back(a);
            mesh.faces.push_back(b);
            mesh.uv_faces.push_back(a);
            mesh.uv_faces.push_back(b);
        }
    }
    return mesh;
}

Mesh make_tube(int rings, int segments, double radius, double x0, double x1) {
    if (rings < 2 || segments < 3) throw DataError("tube needs >= 2 rings and >= 3 segments");
    Mesh mesh;
    for (int r = 0; r < rings; ++r) {
        const double t = static_cast<double>(r) / (rings - 1);
        const double x = x0 + t * (x1 - x0);
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * std::numbers::pi * s / segments;
            mesh.vertices.emplace_back(x, radius * std::cos(phi), radius * std::sin(phi));
        }
    }
    // UV grid has segments + 1 columns so the seam is cut.
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s <= segments; ++s) {
            mesh.uvs.emplace_back(static_cast<double>(r) / (rings - 1), static_cast<double>(s) / segments);
        }
    }
    auto vid = [&](int r, int s) { return r * segments + (s % segments); };
    auto tid = [&](int r, int s) { return r * (segments + 1) + s; };
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            // Winding chosen so face normals point away from the axis.
            mesh.faces.push_back({vid(r, s), vid(r, s + 1), vid(r + 1, s + 1)});
            mesh.uv_faces.push_back({tid(r, s), tid(r, s + 1), tid(r + 1, s + 1)});
            mesh.faces.push_back({vid(r, s), vid(r + 1, s + 1), vid(r + 1, s)});
            mesh.uv_faces.push_back({tid(r, s), tid(r + 1, s + 1), tid(r + 1, s)});
        }
    }
    return mesh;
}

}  // namespace garment
