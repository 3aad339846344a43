#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "garment/mesh.hpp"

namespace garment {

// Wavefront OBJ reader for `v`, `vt`, `vn` and `f` records. Polygons are
// fan-triangulated; negative (relative) indices are accepted. Groups,
// materials and smoothing records are ignored. A file with only `v` records
// loads as a point cloud (no faces).
//
// Throws ParseError (with 1-based line number) on malformed records, index
// out of range, or repeated indices within a face.
Mesh read_obj(std::istream& in, const std::string& source_name = "<stream>");
Mesh load_obj(const std::filesystem::path& path);

// Positions and UVs are written in shortest round-trip form, so reloading
// reproduces every coordinate bit for bit.
void write_obj(std::ostream& out, const Mesh& mesh);
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace garment
