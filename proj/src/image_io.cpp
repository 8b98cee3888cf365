#include "rvpose/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace rvpose {
namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

void skip_space_and_comments(std::istream &in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

NetpbmHeader read_header(std::istream &in, const std::filesystem::path &path) {
  NetpbmHeader h;
  in >> h.magic;
  skip_space_and_comments(in);
  in >> h.width;
  skip_space_and_comments(in);
  in >> h.height;
  skip_space_and_comments(in);
  in >> h.maxval;
  in.get();  // single whitespace before the raster
  if (!in || h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw Error(ErrorCode::Io, "malformed netpbm header in " + path.string());
  return h;
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

uint8_t to_byte(float c) { return uint8_t(std::lround(std::clamp(c, 0.f, 1.f) * 255.f)); }

}  // namespace

void write_ppm(const std::filesystem::path &path, const ColorImage &image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<uint8_t> raster;
  raster.reserve(image.data.size() * 3);
  for (const auto &c : image.data) {
    raster.push_back(to_byte(c.r));
    raster.push_back(to_byte(c.g));
    raster.push_back(to_byte(c.b));
  }
  out.write(reinterpret_cast<const char *>(raster.data()), std::streamsize(raster.size()));
}

ColorImage read_ppm(const std::filesystem::path &path) {
  auto in = open_in(path);
  const auto h = read_header(in, path);
  if (h.magic != "P6" || h.maxval != 255) throw Error(ErrorCode::Io, "expected 8-bit P6 in " + path.string());
  std::vector<uint8_t> raster(size_t(h.width) * size_t(h.height) * 3);
  in.read(reinterpret_cast<char *>(raster.data()), std::streamsize(raster.size()));
  if (!in) throw Error(ErrorCode::Io, "truncated raster in " + path.string());
  ColorImage image(h.width, h.height);
  for (size_t i = 0; i < image.data.size(); ++i)
    image.data[i] = {raster[3 * i] / 255.f, raster[3 * i + 1] / 255.f, raster[3 * i + 2] / 255.f};
  return image;
}

void write_depth_pgm(const std::filesystem::path &path, const DepthImage &depth) {
  auto out = open_out(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  std::vector<uint8_t> raster;
  raster.reserve(depth.data.size() * 2);
  for (float d : depth.data) {
    uint16_t mm = 0;
    if (DepthImage::valid_value(d)) mm = uint16_t(std::clamp<long>(std::lround(double(d) * 1000.0), 1, 65535));
    raster.push_back(uint8_t(mm >> 8));
    raster.push_back(uint8_t(mm & 0xff));
  }
  out.write(reinterpret_cast<const char *>(raster.data()), std::streamsize(raster.size()));
}

DepthImage read_depth_pgm(const std::filesystem::path &path) {
  auto in = open_in(path);
  const auto h = read_header(in, path);
  if (h.magic != "P5" || h.maxval <= 255) throw Error(ErrorCode::Io, "expected 16-bit P5 in " + path.string());
  std::vector<uint8_t> raster(size_t(h.width) * size_t(h.height) * 2);
  in.read(reinterpret_cast<char *>(raster.data()), std::streamsize(raster.size()));
  if (!in) throw Error(ErrorCode::Io, "truncated raster in " + path.string());
  DepthImage depth(h.width, h.height);
  for (size_t i = 0; i < depth.data.size(); ++i) {
    const uint16_t mm = uint16_t((raster[2 * i] << 8) | raster[2 * i + 1]);
    depth.data[i] = float(mm) / 1000.f;
  }
  return depth;
}

void write_label_pgm(const std::filesystem::path &path, const LabelImage &labels) {
  auto out = open_out(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  std::vector<uint8_t> raster(labels.data.size());
  for (size_t i = 0; i < raster.size(); ++i) {
    if (labels.data[i] < 0 || labels.data[i] > 255) throw Error(ErrorCode::Io, "label does not fit 8 bits");
    raster[i] = uint8_t(labels.data[i]);
  }
  out.write(reinterpret_cast<const char *>(raster.data()), std::streamsize(raster.size()));
}

LabelImage read_label_pgm(const std::filesystem::path &path) {
  auto in = open_in(path);
  const auto h = read_header(in, path);
  if (h.magic != "P5" || h.maxval > 255) throw Error(ErrorCode::Io, "expected 8-bit P5 in " + path.string());
  std::vector<uint8_t> raster(size_t(h.width) * size_t(h.height));
  in.read(reinterpret_cast<char *>(raster.data()), std::streamsize(raster.size()));
  if (!in) throw Error(ErrorCode::Io, "truncated raster in " + path.string());
  LabelImage labels(h.width, h.height);
  for (size_t i = 0; i < raster.size(); ++i) labels.data[i] = raster[i];
  return labels;
}

}  // namespace rvpose
