#include "sgas/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sgas/error.hpp"

namespace sgas {

namespace {

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

ScalarType parse_type(const std::string& t) {
  if (t == "char" || t == "int8") return ScalarType::kInt8;
  if (t == "uchar" || t == "uint8") return ScalarType::kUint8;
  if (t == "short" || t == "int16") return ScalarType::kInt16;
  if (t == "ushort" || t == "uint16") return ScalarType::kUint16;
  if (t == "int" || t == "int32") return ScalarType::kInt32;
  if (t == "uint" || t == "uint32") return ScalarType::kUint32;
  if (t == "float" || t == "float32") return ScalarType::kFloat32;
  if (t == "double" || t == "float64") return ScalarType::kFloat64;
  fail(ErrorCode::kCorruptFile, "unsupported PLY property type '" + t + "'");
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode_binary(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::kInt8: return load_le<std::int8_t>(p);
    case ScalarType::kUint8: return load_le<std::uint8_t>(p);
    case ScalarType::kInt16: return load_le<std::int16_t>(p);
    case ScalarType::kUint16: return load_le<std::uint16_t>(p);
    case ScalarType::kInt32: return load_le<std::int32_t>(p);
    case ScalarType::kUint32: return load_le<std::uint32_t>(p);
    case ScalarType::kFloat32: return load_le<float>(p);
    case ScalarType::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
};

}  // namespace

std::string to_ply(const PointCloud& cloud, const std::vector<std::string>& comments) {
  const bool labeled = cloud.has_labels();
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n";
  for (const auto& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (labeled) out << "property int part\n";
  out << "end_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
        << static_cast<float>(p.z());
    if (labeled) out << ' ' << cloud.labels[i];
    out << '\n';
  }
  return out.str();
}

PlyDocument parse_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    if (pos >= bytes.size()) fail(ErrorCode::kCorruptFile, "PLY header ends prematurely");
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") fail(ErrorCode::kCorruptFile, "missing PLY magic");
  PlyDocument doc;
  bool binary = false;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<Property> props;
  while (true) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") fail(ErrorCode::kCorruptFile, "unsupported PLY format " + fmt);
    } else if (key == "comment") {
      doc.comments.push_back(line.size() > 8 ? line.substr(8) : std::string{});
    } else if (key == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      } else if (!seen_vertex && count > 0) {
        fail(ErrorCode::kCorruptFile, "PLY elements before vertex are not supported");
      }
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") fail(ErrorCode::kCorruptFile, "list properties on vertices");
      ls >> name;
      props.push_back({name, parse_type(type)});
    }
  }

  int ix = -1, iy = -1, iz = -1, ipart = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    if (props[i].name == "x") ix = i;
    if (props[i].name == "y") iy = i;
    if (props[i].name == "z") iz = i;
    if (props[i].name == "part") ipart = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorCode::kCorruptFile, "PLY lacks x/y/z");

  auto& cloud = doc.cloud;
  cloud.points.resize(vertex_count);
  if (ipart >= 0) cloud.labels.resize(vertex_count);
  std::vector<double> row(props.size());

  if (binary) {
    std::size_t stride = 0;
    for (const auto& p : props) stride += type_size(p.type);
    if (bytes.size() < pos + stride * vertex_count)
      fail(ErrorCode::kCorruptFile, "PLY vertex payload truncated");
    for (std::size_t v = 0; v < vertex_count; ++v) {
      const char* rec = bytes.data() + pos + v * stride;
      for (std::size_t k = 0; k < props.size(); ++k) {
        row[k] = decode_binary(props[k].type, rec);
        rec += type_size(props[k].type);
      }
      cloud.points[v] = Vec3(row[ix], row[iy], row[iz]);
      if (ipart >= 0) cloud.labels[v] = static_cast<int>(row[ipart]);
    }
  } else {
    std::istringstream body(bytes.substr(pos));
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t k = 0; k < props.size(); ++k) {
        if (!(body >> row[k])) fail(ErrorCode::kCorruptFile, "PLY vertex data truncated");
        if (props[k].type == ScalarType::kFloat32) row[k] = static_cast<float>(row[k]);
      }
      cloud.points[v] = Vec3(row[ix], row[iy], row[iz]);
      if (ipart >= 0) cloud.labels[v] = static_cast<int>(row[ipart]);
    }
  }
  for (const auto& p : cloud.points)
    if (!p.allFinite()) fail(ErrorCode::kCorruptFile, "PLY has a non-finite coordinate");
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "short write to " + path.string());
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments) {
  write_file(path, to_ply(cloud, comments));
}

PlyDocument read_ply(const std::filesystem::path& path) { return parse_ply(read_file(path)); }

}  // namespace sgas
