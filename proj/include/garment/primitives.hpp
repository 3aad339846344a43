#pragma once

#include "garment/mesh.hpp"

namespace garment {

// Regular grid over [0,sx]x[0,sy] in the z=0 plane, (nx+1)x(ny+1) vertices,
// UVs (x/sx, y/sy), counter-clockwise faces (normal +z).
Mesh make_plane_grid(int nx, int ny, double sx = 1.0, double sy = 1.0);

// Open tube along +x from x0 to x1: `rings` circles of `segments` vertices.
// Vertex (ring r, segment s) has index r * segments + s. UVs cut one seam at
// angle 0: u = x-fraction, v = angle fraction (the seam column is duplicated
// in UV space only). Normals point outward.
Mesh make_tube(int rings, int segments, double radius, double x0, double x1);

}  // namespace garment
