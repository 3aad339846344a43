#pragma once

#include <vector>

#include "garment/mesh.hpp"
#include "garment/normal_map.hpp"

namespace garment {

// For every texel centre inside a UV triangle: the face and the barycentric
// weights of the centre in that triangle. A centre covered by several
// triangles goes to the one it lies deepest inside, ties to the lower face
// index. Centres strictly inside two triangles mean the atlas overlaps
// (DataError).
struct UvRaster {
    int width = 0;
    int height = 0;
    std::vector<int> face;   // -1 where uncovered
    std::vector<Vec3> bary;

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) + static_cast<std::size_t>(i); }
};

UvRaster rasterize_uvs(const Mesh& mesh, int width, int height);

// Barycentric interpolation of vertex normals per covered texel.
// Requires UVs and vertex normals.
NormalMap bake_lr(const Mesh& mesh, int width, int height);
NormalMap bake_lr(const Mesh& mesh, const UvRaster& raster);

// Each covered texel's surface point on `reconstruction` is moved to the
// closest point on `scan`; the texel takes the scan's interpolated normal
// there, or stays undefined when that point is farther than `cutoff`.
// Scan normals are computed when absent.
NormalMap bake_hr(const Mesh& scan, const Mesh& reconstruction, int width, int height, double cutoff = 0.02);

// Fills undefined texels that touch a defined one (4-neighbourhood) with the
// renormalized mean of their defined neighbours, `rings` times.
NormalMap dilate(const NormalMap& map, int rings = 1);

// Per-texel orthonormal frame (tangent, bitangent, normal) from the UV
// derivatives of the covering face and the interpolated vertex normal.
// Texels on zero-area UV triangles have no frame.
struct TangentFrames {
    int width = 0;
    int height = 0;
    std::vector<Mat3> frames;           // columns T, B, N
    std::vector<std::uint8_t> valid;
};

TangentFrames tangent_frames(const Mesh& mesh, int width, int height);

// Texels without a frame become undefined.
NormalMap to_tangent(const NormalMap& global, const TangentFrames& frames);
NormalMap to_global(const NormalMap& tangent, const TangentFrames& frames);

}  // namespace garment
