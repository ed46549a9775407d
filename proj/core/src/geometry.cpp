#include "localsfm/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lsfm {

std::optional<Projection> project(const ScaledPose& pose, const CameraIntrinsics& K,
                                  const Vec3& point) {
  const Vec3 x = pose.apply(point);
  if (x.z() <= kDepthEps) return std::nullopt;
  return Projection{K.project_dir(x), x.z()};
}

std::optional<Vec3> backproject(const ScaledPose& pose, const CameraIntrinsics& K,
                                const Vec2& pixel, double depth) {
  if (depth <= kDepthEps) return std::nullopt;
  const Vec3 x_cam = depth * K.ray(pixel);
  return pose.R.transpose() * (x_cam - pose.t);
}

RelativePose relative_pose(const NormalizedPose& pose_i, double scale_i,
                           const NormalizedPose& pose_j, double scale_j) {
  RelativePose rel;
  rel.R = pose_j.R * pose_i.R.transpose();
  const Vec3 t = -scale_i * (rel.R * pose_i.t_dir) + scale_j * pose_j.t_dir;
  rel.scale = t.norm();
  if (rel.scale < kDegenerateTranslation) {
    rel.degenerate = true;
    rel.t_dir = Vec3::Zero();
  } else {
    rel.t_dir = t / rel.scale;
  }
  return rel;
}

Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

std::optional<Vec3> epipolar_line(const Mat3& R_rel, const Vec3& t_dir,
                                  const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                                  const Vec2& pixel_i) {
  const Vec3 ray = R_rel * K_i.ray(pixel_i);
  const Vec3 line = K_j.inverse().transpose() * t_dir.cross(ray);
  if (line.head<2>().norm() < 1e-14) return std::nullopt;
  return line;
}

EpipolarSegment line_circle_intersect(const Vec3& line, const Vec2& center, double radius) {
  EpipolarSegment segment;
  segment.line = line;
  const double n = line.head<2>().norm();
  if (n < 1e-14 || radius <= 0.0) return segment;

  // Signed distance from center to line, foot point, then chord half length.
  const double dist = (line.x() * center.x() + line.y() * center.y() + line.z()) / n;
  if (std::abs(dist) > radius) return segment;

  const Vec2 normal(line.x() / n, line.y() / n);
  const Vec2 tangent(normal.y(), -normal.x());
  const Vec2 foot = center - dist * normal;
  const double half = std::sqrt(std::max(0.0, radius * radius - dist * dist));
  segment.p_start = foot - half * tangent;
  segment.p_end = foot + half * tangent;
  segment.valid = true;
  return segment;
}

SphereSegment line_sphere_intersect(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                    double radius) {
  SphereSegment segment;
  if (radius <= 0.0) return segment;
  const Vec3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return segment;
  const double root = std::sqrt(disc);
  segment.p_start = origin + (-b - root) * dir;
  segment.p_end = origin + (-b + root) * dir;
  segment.valid = true;
  return segment;
}

std::optional<double> scale_from_projection(const Mat3& R_rel, const Vec3& t_dir,
                                            const CameraIntrinsics& K_i,
                                            const CameraIntrinsics& K_j, const Vec2& pixel_i,
                                            double adjusted_depth, const Vec2& target_pixel) {
  const Vec3 a = adjusted_depth * (K_j.matrix() * (R_rel * K_i.ray(pixel_i)));
  const Vec3 b = K_j.matrix() * t_dir;
  const double denom_x = b.z() * target_pixel.x() - b.x();
  const double denom_y = b.z() * target_pixel.y() - b.y();
  if (std::abs(denom_x) >= std::abs(denom_y)) {
    if (std::abs(denom_x) < 1e-12) return std::nullopt;
    return (a.x() - target_pixel.x() * a.z()) / denom_x;
  }
  if (std::abs(denom_y) < 1e-12) return std::nullopt;
  return (a.y() - target_pixel.y() * a.z()) / denom_y;
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

double direction_angle_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-15 || nb < 1e-15) return 180.0;
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace lsfm
