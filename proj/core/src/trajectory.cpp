#include "nsdf/trajectory.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nsdf {

void validate_trajectory(const Trajectory& trajectory) {
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (trajectory[i].index <= trajectory[i - 1].index) {
      throw std::invalid_argument("trajectory: frame indices must strictly increase");
    }
  }
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

}  // namespace

std::string trajectory_to_string(const Trajectory& trajectory, TrajectoryFormat format) {
  std::string out;
  out.reserve(trajectory.size() * 160);
  for (const auto& rec : trajectory) {
    if (format == TrajectoryFormat::Kitti) {
      const Mat3& r = rec.pose.rotation;
      const Vec3& t = rec.pose.translation;
      const double row[12] = {r(0, 0), r(0, 1), r(0, 2), t.x(),  //
                              r(1, 0), r(1, 1), r(1, 2), t.y(),  //
                              r(2, 0), r(2, 1), r(2, 2), t.z()};
      for (int i = 0; i < 12; ++i) {
        if (i) out += ' ';
        append_number(out, row[i]);
      }
    } else {
      Eigen::Quaterniond q(rec.pose.rotation);
      q.normalize();
      if (q.w() < 0.0) q.coeffs() = -q.coeffs();
      append_number(out, double(rec.index));
      for (const double v : {rec.pose.translation.x(), rec.pose.translation.y(),
                             rec.pose.translation.z(), q.x(), q.y(), q.z(), q.w()}) {
        out += ' ';
        append_number(out, v);
      }
    }
    out += '\n';
  }
  return out;
}

void write_trajectory(const Trajectory& trajectory, TrajectoryFormat format,
                      const std::string& path) {
  if (trajectory.empty()) throw std::invalid_argument("write_trajectory: empty trajectory");
  validate_trajectory(trajectory);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory: cannot open " + path);
  out << trajectory_to_string(trajectory, format);
  if (!out) throw std::runtime_error("write_trajectory: write failed for " + path);
}

Trajectory read_trajectory(TrajectoryFormat format, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trajectory: cannot open " + path);
  Trajectory out;
  std::string line;
  std::int64_t auto_index = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryRecord rec;
    if (format == TrajectoryFormat::Kitti) {
      double v[12];
      for (int i = 0; i < 12; ++i) {
        if (!(ss >> v[i])) throw std::runtime_error("read_trajectory: malformed KITTI line");
      }
      rec.index = auto_index++;
      rec.pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
      rec.pose.translation = Vec3(v[3], v[7], v[11]);
    } else {
      double ts, tx, ty, tz, qx, qy, qz, qw;
      if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
        throw std::runtime_error("read_trajectory: malformed TUM line");
      }
      rec.index = std::int64_t(std::llround(ts));
      rec.pose.translation = Vec3(tx, ty, tz);
      rec.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
    }
    out.push_back(rec);
  }
  validate_trajectory(out);
  return out;
}

double evaluate_ate(const Trajectory& estimated, const Trajectory& ground_truth) {
  if (estimated.size() != ground_truth.size() || estimated.empty()) {
    throw std::invalid_argument("evaluate_ate: trajectory lengths differ");
  }
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    if (estimated[i].index != ground_truth[i].index) {
      throw std::invalid_argument("evaluate_ate: frame indices differ");
    }
  }
  const long n = long(estimated.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (long i = 0; i < n; ++i) {
    src.col(i) = estimated[i].pose.translation;
    dst.col(i) = ground_truth[i].pose.translation;
  }
  const Eigen::Matrix4d align = Eigen::umeyama(src, dst, false);
  const Mat3 r = align.topLeftCorner<3, 3>();
  const Vec3 t = align.topRightCorner<3, 1>();
  double sq_sum = 0.0;
  for (long i = 0; i < n; ++i) {
    sq_sum += (dst.col(i) - (r * src.col(i) + t)).squaredNorm();
  }
  return std::sqrt(sq_sum / double(n));
}

double evaluate_relative_drift(const Trajectory& estimated, const Trajectory& ground_truth,
                               const std::vector<double>& segment_lengths) {
  if (estimated.size() != ground_truth.size() || estimated.size() < 2) {
    throw std::invalid_argument("evaluate_relative_drift: trajectory lengths differ");
  }
  validate_trajectory(estimated);
  validate_trajectory(ground_truth);
  if (segment_lengths.empty()) {
    throw std::invalid_argument("evaluate_relative_drift: no segment lengths");
  }
  const std::size_t n = estimated.size();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    cum[i] = cum[i - 1] +
             (ground_truth[i].pose.translation - ground_truth[i - 1].pose.translation).norm();
  }
  double min_len = *std::min_element(segment_lengths.begin(), segment_lengths.end());
  if (cum.back() < min_len) {
    throw std::invalid_argument("evaluate_relative_drift: trajectory shorter than segment");
  }

  double err_sum = 0.0;
  std::size_t count = 0;
  for (const double len : segment_lengths) {
    for (std::size_t first = 0; first + 1 < n; ++first) {
      // First frame whose path distance from `first` reaches the segment length.
      const double target = cum[first] + len;
      if (cum.back() < target) break;
      std::size_t last = first + 1;
      while (last < n && cum[last] < target) ++last;
      if (last >= n) break;
      const RigidTransform delta_gt =
          compose(ground_truth[first].pose.inverse(), ground_truth[last].pose);
      const RigidTransform delta_est =
          compose(estimated[first].pose.inverse(), estimated[last].pose);
      const RigidTransform err = compose(delta_est.inverse(), delta_gt);
      err_sum += err.translation.norm() / len;
      ++count;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("evaluate_relative_drift: no evaluable segments");
  }
  return 100.0 * err_sum / double(count);
}

}  // namespace nsdf
