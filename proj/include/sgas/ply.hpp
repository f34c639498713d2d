#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sgas/geometry.hpp"

namespace sgas {

struct PlyDocument {
  PointCloud cloud;
  std::vector<std::string> comments;
};

/// ASCII PLY with float x/y/z and, when the cloud is labeled, an int `part`.
std::string to_ply(const PointCloud& cloud, const std::vector<std::string>& comments = {});

/// Accepts ASCII and binary_little_endian PLY. Any vertex properties other
/// than x, y, z and part are skipped.
PlyDocument parse_ply(const std::string& bytes);

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::string>& comments = {});
PlyDocument read_ply(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sgas
