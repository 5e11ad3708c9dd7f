#pragma once

#include "nsdf/geometry.hpp"

#include <string>
#include <vector>

namespace nsdf {

/// KITTI velodyne .bin scan: little-endian float32 (x, y, z, intensity)
/// records. Intensity is discarded. Throws std::runtime_error with the byte
/// offset on a truncated file.
PointCloud read_kitti_scan(const std::string& path);

/// Writes a cloud in the same record layout (intensity = 0).
void write_kitti_scan(const PointCloud& cloud, const std::string& path);

/// Whitespace-separated ASCII "x y z" per line; '#' comments skipped.
PointCloud read_xyz_scan(const std::string& path);

/// Sorted list of scan files with the given extension in a directory.
std::vector<std::string> list_scan_files(const std::string& directory,
                                         const std::string& extension);

}  // namespace nsdf
