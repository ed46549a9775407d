#pragma once

#include <Eigen/Dense>
#include <optional>

namespace lsfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kDepthEps = 1e-9;
inline constexpr double kDegenerateTranslation = 1e-12;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && cx > 0.0 && cx < width && cy > 0.0 && cy < height;
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Mat3 inverse() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
  }

  // Viewing ray with unit z component, i.e. K^-1 [p; 1].
  Vec3 ray(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
  }

  // Perspective projection of a camera-frame point; no depth check.
  Vec2 project_dir(const Vec3& x) const {
    return {fx * x.x() / x.z() + cx, fy * x.y() / x.z() + cy};
  }

  // Continuous-coordinate bounds with full bilinear support.
  bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width - 1.0 &&
           pixel.y() <= height - 1.0;
  }
};

// Rotation plus unit translation direction; scale left free.
struct NormalizedPose {
  Mat3 R = Mat3::Identity();
  Vec3 t_dir = Vec3::UnitZ();

  bool orthonormal(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).norm() < tol &&
           std::abs(R.determinant() - 1.0) < tol;
  }
  bool unit_translation(double tol = 1e-9) const {
    return std::abs(t_dir.norm() - 1.0) < tol;
  }
};

// Metric rigid transform, x_cam = R x_ref + t.
struct ScaledPose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static ScaledPose compose(const NormalizedPose& pose, double scale) {
    return {pose.R, scale * pose.t_dir};
  }

  ScaledPose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Vec3 center() const { return -(R.transpose() * t); }
  bool orthonormal(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).norm() < tol &&
           std::abs(R.determinant() - 1.0) < tol;
  }
};

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

// nullopt when the transformed depth is <= kDepthEps.
std::optional<Projection> project(const ScaledPose& pose, const CameraIntrinsics& K,
                                  const Vec3& point);

// Point in the reference frame such that project() returns (pixel, depth).
std::optional<Vec3> backproject(const ScaledPose& pose, const CameraIntrinsics& K,
                                const Vec2& pixel, double depth);

struct RelativePose {
  Mat3 R = Mat3::Identity();    // R_j R_i^-1
  Vec3 t_dir = Vec3::Zero();    // unit unless degenerate
  double scale = 0.0;           // combined translation magnitude
  bool degenerate = false;      // pure rotation: scale < kDegenerateTranslation
};

// Relative pose of frame j w.r.t. frame i for metric scales (s_i, s_j).
RelativePose relative_pose(const NormalizedPose& pose_i, double scale_i,
                           const NormalizedPose& pose_j, double scale_j);

Mat3 cross_matrix(const Vec3& v);

// l = K_j^-T [t_dir]x R_rel K_i^-1 [pixel_i; 1]; nullopt when pixel_i maps to
// the epipole (cross product vanishes).
std::optional<Vec3> epipolar_line(const Mat3& R_rel, const Vec3& t_dir,
                                  const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                                  const Vec2& pixel_i);

struct EpipolarSegment {
  Vec3 line = Vec3::Zero();
  Vec2 p_start = Vec2::Zero();
  Vec2 p_end = Vec2::Zero();
  bool valid = false;
};

// Chord of a homogeneous 2D line against a circle. When the line hits,
// endpoints are ordered along the line tangent (l_y, -l_x).
EpipolarSegment line_circle_intersect(const Vec3& line, const Vec2& center, double radius);

struct SphereSegment {
  Vec3 p_start = Vec3::Zero();
  Vec3 p_end = Vec3::Zero();
  bool valid = false;
};

// Ray direction must be unit length; endpoints ordered by ray parameter.
SphereSegment line_sphere_intersect(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                    double radius);

// Mapping J(.) from a target projection to the camera scale realizing it:
// the s such that projecting pixel_i at depth `adjusted_depth` under
// [R_rel | s t_dir] lands on target_pixel. Picks whichever image axis has the
// better-conditioned denominator; nullopt when both are below 1e-12.
std::optional<double> scale_from_projection(const Mat3& R_rel, const Vec3& t_dir,
                                            const CameraIntrinsics& K_i,
                                            const CameraIntrinsics& K_j, const Vec2& pixel_i,
                                            double adjusted_depth, const Vec2& target_pixel);

double rotation_angle_deg(const Mat3& a, const Mat3& b);
double direction_angle_deg(const Vec3& a, const Vec3& b);

}  // namespace lsfm
