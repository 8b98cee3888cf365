#pragma once

#include <filesystem>

#include "rvpose/core.hpp"

namespace rvpose {

// Binary netpbm images. Depth maps are 16-bit big-endian P5 in millimeters
// with 0 marking invalid pixels; label maps are 8-bit P5.
void write_ppm(const std::filesystem::path &path, const ColorImage &image);
ColorImage read_ppm(const std::filesystem::path &path);

void write_depth_pgm(const std::filesystem::path &path, const DepthImage &depth);
DepthImage read_depth_pgm(const std::filesystem::path &path);

void write_label_pgm(const std::filesystem::path &path, const LabelImage &labels);
LabelImage read_label_pgm(const std::filesystem::path &path);

}  // namespace rvpose
