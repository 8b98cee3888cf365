#pragma once

#include <filesystem>
#include <iosfwd>

#include "rvpose/core.hpp"

namespace rvpose {

// ASCII PLY with per-vertex x y z red green blue (0-255) and polygon faces.
// Polygons with more than three corners are fan-triangulated on load.
TriangleMesh read_ply(std::istream &in);
TriangleMesh read_ply(const std::filesystem::path &path);
void write_ply(std::ostream &out, const TriangleMesh &mesh);
void write_ply(const std::filesystem::path &path, const TriangleMesh &mesh);

}  // namespace rvpose
