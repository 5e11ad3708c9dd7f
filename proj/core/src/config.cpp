#include "nsdf/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace nsdf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value '" + v + "' for " + key);
  }
}

int to_int(const std::string& v, const std::string& key) {
  const double d = to_double(v, key);
  const int i = int(d);
  if (double(i) != d) throw std::invalid_argument("config: expected integer for " + key);
  return i;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean value '" + v + "' for " + key);
}

Vec3 to_vec3(const std::string& v, const std::string& key) {
  std::istringstream ss(v);
  double x, y, z;
  char c1 = ',', c2 = ',';
  if (ss >> x >> c1 >> y >> c2 >> z && c1 == ',' && c2 == ',') return Vec3(x, y, z);
  throw std::invalid_argument("config: expected 'x,y,z' for " + key);
}

}  // namespace

void SequenceConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require(levels >= 8 && levels <= 21, "levels must be in [8, 21]");
  require(leaf_size > 0.0, "leaf_size must be > 0");
  require(feature_levels >= 1 && feature_levels <= 3, "feature_levels must be in [1, 3]");
  require(submap_every > 0, "submap_every must be > 0");
  require(pool_window > 0, "pool_window must be > 0");
  require(mix_ratio > 0.0 && mix_ratio <= 1.0, "mix_ratio must be in (0, 1]");
  require(batch_size > 0, "batch_size must be > 0");
  require(surface_samples >= 0 && free_samples >= 0 && surface_samples + free_samples > 0,
          "per-ray sample counts must be non-negative and not all zero");
  require(band > 0.0, "band must be > 0");
  require(min_ray_range > 0.0, "min_ray_range must be > 0");
  require(normal_neighbors >= 3, "normal_neighbors must be >= 3");
  require(lambda1 > 0.0 && lambda2 > 0.0 && alpha > 0.0, "loss weights must be > 0");
  require(lr > 0.0, "lr must be > 0");
  require(map_iterations > 0 && lm_iterations > 0, "iteration budgets must be > 0");
  require(warmup_factor >= 1, "warmup_factor must be >= 1");
  require(map_voxel > 0.0 && odom_voxel > 0.0, "voxel sizes must be > 0");
  require(trim_radius > 0.0, "trim_radius must be > 0");
  require(init_direction.norm() > 1e-9, "init_direction must be nonzero");
  require(traj_format == "kitti" || traj_format == "tum", "traj_format must be kitti|tum");
  require(format == "kitti" || format == "xyz", "format must be kitti|xyz");
  require(on_failure == "fallback" || on_failure == "halt", "on_failure must be fallback|halt");
  require(channels > 0 && azimuth_steps > 0, "sensor grid must be positive");
  require(mesh_resolution > 0.0, "mesh_resolution must be > 0");
  require(max_range > 0.0, "max_range must be > 0");
}

void apply_config_entry(SequenceConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "dataset") c.dataset = v;
  else if (key == "format") c.format = v;
  else if (key == "gt_poses") c.gt_poses = v;
  else if (key == "use_gt_poses") c.use_gt_poses = to_bool(v, key);
  else if (key == "out_dir") c.out_dir = v;
  else if (key == "levels") c.levels = to_int(v, key);
  else if (key == "leaf_size") c.leaf_size = to_double(v, key);
  else if (key == "feature_levels") c.feature_levels = to_int(v, key);
  else if (key == "submap_every") c.submap_every = to_int(v, key);
  else if (key == "pool_window") c.pool_window = to_int(v, key);
  else if (key == "mix_ratio") c.mix_ratio = to_double(v, key);
  else if (key == "batch_size") c.batch_size = to_int(v, key);
  else if (key == "surface_samples") c.surface_samples = to_int(v, key);
  else if (key == "free_samples") c.free_samples = to_int(v, key);
  else if (key == "band") c.band = to_double(v, key);
  else if (key == "min_ray_range") c.min_ray_range = to_double(v, key);
  else if (key == "normal_neighbors") c.normal_neighbors = to_int(v, key);
  else if (key == "lambda1") c.lambda1 = to_double(v, key);
  else if (key == "lambda2") c.lambda2 = to_double(v, key);
  else if (key == "alpha") c.alpha = to_double(v, key);
  else if (key == "lr") c.lr = to_double(v, key);
  else if (key == "map_iterations") c.map_iterations = to_int(v, key);
  else if (key == "lm_iterations") c.lm_iterations = to_int(v, key);
  else if (key == "warmup_factor") c.warmup_factor = to_int(v, key);
  else if (key == "map_voxel") c.map_voxel = to_double(v, key);
  else if (key == "odom_voxel") c.odom_voxel = to_double(v, key);
  else if (key == "trim_radius") c.trim_radius = to_double(v, key);
  else if (key == "init_direction") c.init_direction = to_vec3(v, key);
  else if (key == "seed") c.seed = std::uint64_t(to_double(v, key));
  else if (key == "traj_format") c.traj_format = v;
  else if (key == "mesh_resolution") c.mesh_resolution = to_double(v, key);
  else if (key == "verbose") c.verbose = to_bool(v, key);
  else if (key == "on_failure") c.on_failure = v;
  else if (key == "channels") c.channels = to_int(v, key);
  else if (key == "azimuth_steps") c.azimuth_steps = to_int(v, key);
  else if (key == "elev_min_deg") c.elev_min_deg = to_double(v, key);
  else if (key == "elev_max_deg") c.elev_max_deg = to_double(v, key);
  else if (key == "max_range") c.max_range = to_double(v, key);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

SequenceConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  SequenceConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: missing '=' at " + path + ":" + std::to_string(line_no));
    }
    apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

std::string config_to_string(const SequenceConfig& c) {
  std::ostringstream out;
  out.precision(12);
  out << "dataset = " << c.dataset << "\n";
  out << "format = " << c.format << "\n";
  if (!c.gt_poses.empty()) out << "gt_poses = " << c.gt_poses << "\n";
  out << "use_gt_poses = " << (c.use_gt_poses ? "true" : "false") << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "levels = " << c.levels << "\n";
  out << "leaf_size = " << c.leaf_size << "\n";
  out << "feature_levels = " << c.feature_levels << "\n";
  out << "submap_every = " << c.submap_every << "\n";
  out << "pool_window = " << c.pool_window << "\n";
  out << "mix_ratio = " << c.mix_ratio << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "surface_samples = " << c.surface_samples << "\n";
  out << "free_samples = " << c.free_samples << "\n";
  out << "band = " << c.band << "\n";
  out << "min_ray_range = " << c.min_ray_range << "\n";
  out << "normal_neighbors = " << c.normal_neighbors << "\n";
  out << "lambda1 = " << c.lambda1 << "\n";
  out << "lambda2 = " << c.lambda2 << "\n";
  out << "alpha = " << c.alpha << "\n";
  out << "lr = " << c.lr << "\n";
  out << "map_iterations = " << c.map_iterations << "\n";
  out << "lm_iterations = " << c.lm_iterations << "\n";
  out << "warmup_factor = " << c.warmup_factor << "\n";
  out << "map_voxel = " << c.map_voxel << "\n";
  out << "odom_voxel = " << c.odom_voxel << "\n";
  out << "trim_radius = " << c.trim_radius << "\n";
  out << "init_direction = " << c.init_direction.x() << "," << c.init_direction.y() << ","
      << c.init_direction.z() << "\n";
  out << "seed = " << c.seed << "\n";
  out << "traj_format = " << c.traj_format << "\n";
  out << "mesh_resolution = " << c.mesh_resolution << "\n";
  out << "verbose = " << (c.verbose ? "true" : "false") << "\n";
  out << "on_failure = " << c.on_failure << "\n";
  out << "channels = " << c.channels << "\n";
  out << "azimuth_steps = " << c.azimuth_steps << "\n";
  out << "elev_min_deg = " << c.elev_min_deg << "\n";
  out << "elev_max_deg = " << c.elev_max_deg << "\n";
  out << "max_range = " << c.max_range << "\n";
  return out.str();
}

}  // namespace nsdf
