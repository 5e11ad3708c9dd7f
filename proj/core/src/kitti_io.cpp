#include "nsdf/kitti_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nsdf {

PointCloud read_kitti_scan(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_kitti_scan: cannot open " + path);
  const std::streamoff size = in.tellg();
  if (size % 16 != 0) {
    throw std::runtime_error("read_kitti_scan: truncated file " + path + " at byte offset " +
                             std::to_string(size - size % 16) + " (size " +
                             std::to_string(size) + " not divisible by 16)");
  }
  in.seekg(0);
  PointCloud cloud;
  cloud.frame = Frame::Sensor;
  const std::size_t n = std::size_t(size) / 16;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (!in) {
      throw std::runtime_error("read_kitti_scan: short read at byte offset " +
                               std::to_string(i * 16));
    }
    cloud.points.emplace_back(rec[0], rec[1], rec[2]);
  }
  return cloud;
}

void write_kitti_scan(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_kitti_scan: cannot open " + path);
  for (const auto& p : cloud.points) {
    const float rec[4] = {float(p.x()), float(p.y()), float(p.z()), 0.0f};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw std::runtime_error("write_kitti_scan: write failed for " + path);
}

PointCloud read_xyz_scan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_xyz_scan: cannot open " + path);
  PointCloud cloud;
  cloud.frame = Frame::Sensor;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw std::runtime_error("read_xyz_scan: malformed line in " + path);
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

std::vector<std::string> list_scan_files(const std::string& directory,
                                         const std::string& extension) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (!fs::is_directory(directory)) {
    throw std::runtime_error("list_scan_files: not a directory: " + directory);
  }
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace nsdf
