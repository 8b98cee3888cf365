#include "rvpose/ply.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace rvpose {
namespace {

struct ElementHeader {
  std::string name;
  size_t count = 0;
  std::vector<std::string> properties;
  bool is_list = false;
};

float channel_from_byte(double v) { return float(std::clamp(v, 0.0, 255.0) / 255.0); }

int byte_from_channel(float c) { return int(std::lround(std::clamp(c, 0.f, 1.f) * 255.f)); }

}  // namespace

TriangleMesh read_ply(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw Error(ErrorCode::Io, "missing ply magic");

  std::vector<ElementHeader> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      ElementHeader e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw Error(ErrorCode::Io, "property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type, name;
        ls >> count_type >> item_type >> name;
        elements.back().is_list = true;
        elements.back().properties.push_back(name);
      } else {
        std::string name;
        ls >> name;
        elements.back().properties.push_back(name);
      }
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::Io, "only ascii ply is supported");

  TriangleMesh mesh;
  for (const auto &e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
      for (size_t i = 0; i < e.properties.size(); ++i) {
        const auto &p = e.properties[i];
        if (p == "x") ix = int(i);
        if (p == "y") iy = int(i);
        if (p == "z") iz = int(i);
        if (p == "red") ir = int(i);
        if (p == "green") ig = int(i);
        if (p == "blue") ib = int(i);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::Io, "vertex element lacks x y z");
      std::vector<double> vals(e.properties.size());
      for (size_t n = 0; n < e.count; ++n) {
        for (auto &v : vals)
          if (!(in >> v)) throw Error(ErrorCode::Io, "truncated vertex data");
        mesh.vertices.emplace_back(vals[size_t(ix)], vals[size_t(iy)], vals[size_t(iz)]);
        Rgb c{1.f, 1.f, 1.f};
        if (ir >= 0 && ig >= 0 && ib >= 0)
          c = {channel_from_byte(vals[size_t(ir)]), channel_from_byte(vals[size_t(ig)]),
               channel_from_byte(vals[size_t(ib)])};
        mesh.vertex_colors.push_back(c);
      }
    } else if (e.name == "face") {
      for (size_t n = 0; n < e.count; ++n) {
        size_t corners = 0;
        if (!(in >> corners) || corners < 3) throw Error(ErrorCode::Io, "bad face record");
        std::vector<int32_t> idx(corners);
        for (auto &i : idx)
          if (!(in >> i)) throw Error(ErrorCode::Io, "truncated face data");
        for (size_t c = 1; c + 1 < corners; ++c) mesh.triangles.push_back({idx[0], idx[c], idx[c + 1]});
      }
    } else {
      // unknown element: skip its lines
      std::getline(in, line);
      for (size_t n = 0; n < e.count; ++n) std::getline(in, line);
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh read_ply(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_ply(in);
}

void write_ply(std::ostream &out, const TriangleMesh &mesh) {
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  out << std::setprecision(17);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto &v = mesh.vertices[i];
    const auto &c = mesh.vertex_colors[i];
    out << v.x() << ' ' << v.y() << ' ' << v.z() << ' ' << byte_from_channel(c.r) << ' '
        << byte_from_channel(c.g) << ' ' << byte_from_channel(c.b) << '\n';
  }
  for (const auto &t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_ply(const std::filesystem::path &path, const TriangleMesh &mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_ply(out, mesh);
}

}  // namespace rvpose
