#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "panosplat/cloud.hpp"
#include "panosplat/errors.hpp"
#include "panosplat/scaffold.hpp"

namespace panosplat {

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

struct PlyHeader {
  size_t count = 0;
  std::vector<PlyProperty> props;
};

PlyHeader read_header(std::istream& f, const std::string& path) {
  std::string line;
  std::getline(f, line);
  if (line != "ply") throw IoError("ply: bad magic in " + path);
  PlyHeader h;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian")
        throw IoError("ply: expected binary_little_endian in " + path);
    } else if (tok == "element") {
      std::string name;
      ss >> name >> h.count;
      if (name != "vertex") throw IoError("ply: expected vertex element in " + path);
    } else if (tok == "property") {
      PlyProperty p;
      ss >> p.type >> p.name;
      h.props.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }
  return h;
}

size_t type_size(const std::string& t) {
  if (t == "double" || t == "float64") return 8;
  if (t == "float" || t == "float32") return 4;
  if (t == "ushort" || t == "uint16") return 2;
  throw IoError("ply: unsupported property type " + t);
}

double read_scalar(const char* p, const std::string& t) {
  if (t == "double" || t == "float64") {
    double v;
    std::memcpy(&v, p, 8);
    return v;
  }
  if (t == "float" || t == "float32") {
    float v;
    std::memcpy(&v, p, 4);
    return v;
  }
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

void save_scaffold_ply(const std::filesystem::path& path, const PlaneScaffold& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_scaffold_ply: cannot open " + path.string());
  f << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << s.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz"})
    f << "property double " << n << "\n";
  f << "property uint16 frame\nproperty uint16 plane\nend_header\n";
  for (size_t i = 0; i < s.size(); ++i) {
    double row[6] = {s.points[i].x(), s.points[i].y(), s.points[i].z(),
                     s.normals[i].x(), s.normals[i].y(), s.normals[i].z()};
    f.write(reinterpret_cast<const char*>(row), sizeof(row));
    uint16_t ids[2] = {s.source[i].frame, s.source[i].plane};
    f.write(reinterpret_cast<const char*>(ids), sizeof(ids));
  }
}

PlaneScaffold load_scaffold_ply(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_scaffold_ply: cannot open " + path.string());
  const PlyHeader h = read_header(f, path.string());
  size_t stride = 0;
  std::vector<size_t> offset(h.props.size());
  for (size_t i = 0; i < h.props.size(); ++i) {
    offset[i] = stride;
    stride += type_size(h.props[i].type);
  }
  auto find = [&](const std::string& name) {
    for (size_t i = 0; i < h.props.size(); ++i)
      if (h.props[i].name == name) return i;
    throw IoError("load_scaffold_ply: missing property " + name);
  };
  const size_t ix = find("x"), iy = find("y"), iz = find("z");
  const size_t inx = find("nx"), iny = find("ny"), inz = find("nz");
  const size_t ifr = find("frame"), ipl = find("plane");
  std::vector<char> row(stride);
  PlaneScaffold s;
  for (size_t i = 0; i < h.count; ++i) {
    f.read(row.data(), static_cast<std::streamsize>(stride));
    if (!f) throw IoError("load_scaffold_ply: truncated " + path.string());
    auto g = [&](size_t pi) { return read_scalar(row.data() + offset[pi], h.props[pi].type); };
    s.points.emplace_back(g(ix), g(iy), g(iz));
    s.normals.emplace_back(g(inx), g(iny), g(inz));
    s.source.push_back({static_cast<uint16_t>(g(ifr)), static_cast<uint16_t>(g(ipl))});
  }
  return s;
}

void save_cloud_ply(const std::filesystem::path& path, const GaussianCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_cloud_ply: cannot open " + path.string());
  std::vector<std::string> names = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 9; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2", "rot_0",
                             "rot_1", "rot_2", "rot_3"});
  f << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << cloud.size() << "\n";
  for (const auto& n : names) f << "property double " << n << "\n";
  f << "end_header\n";
  for (size_t i = 0; i < cloud.size(); ++i) {
    double row[23];
    int k = 0;
    for (int j = 0; j < 3; ++j) row[k++] = cloud.mu[i][j];
    for (int j = 0; j < 3; ++j) row[k++] = cloud.sh_dc[i][j];
    // f_rest layout matches the 3DGS checkpoint convention: per channel, the
    // 3 degree-1 coefficients.
    for (int ch = 0; ch < 3; ++ch)
      for (int m = 0; m < 3; ++m) row[k++] = cloud.sh_rest[i](m, ch);
    row[k++] = cloud.opacity_logit[i];
    for (int j = 0; j < 3; ++j) row[k++] = cloud.log_scale[i][j];
    for (int j = 0; j < 4; ++j) row[k++] = cloud.rot[i][j];
    f.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
}

GaussianCloud load_cloud_ply(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_cloud_ply: cannot open " + path.string());
  const PlyHeader h = read_header(f, path.string());
  size_t stride = 0;
  std::vector<size_t> offset(h.props.size());
  for (size_t i = 0; i < h.props.size(); ++i) {
    offset[i] = stride;
    stride += type_size(h.props[i].type);
  }
  auto find = [&](const std::string& name) {
    for (size_t i = 0; i < h.props.size(); ++i)
      if (h.props[i].name == name) return i;
    throw IoError("load_cloud_ply: missing property " + name);
  };
  GaussianCloud cloud;
  cloud.resize(h.count);
  std::vector<char> row(stride);
  for (size_t i = 0; i < h.count; ++i) {
    f.read(row.data(), static_cast<std::streamsize>(stride));
    if (!f) throw IoError("load_cloud_ply: truncated " + path.string());
    auto g = [&](const std::string& name) {
      const size_t pi = find(name);
      return read_scalar(row.data() + offset[pi], h.props[pi].type);
    };
    cloud.mu[i] = {g("x"), g("y"), g("z")};
    cloud.sh_dc[i] = {g("f_dc_0"), g("f_dc_1"), g("f_dc_2")};
    for (int ch = 0; ch < 3; ++ch)
      for (int m = 0; m < 3; ++m)
        cloud.sh_rest[i](m, ch) = g("f_rest_" + std::to_string(ch * 3 + m));
    cloud.opacity_logit[i] = g("opacity");
    cloud.log_scale[i] = {g("scale_0"), g("scale_1"), g("scale_2")};
    cloud.rot[i] = {g("rot_0"), g("rot_1"), g("rot_2"), g("rot_3")};
  }
  return cloud;
}

}  // namespace panosplat
