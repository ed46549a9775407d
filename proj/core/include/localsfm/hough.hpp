#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "localsfm/frame_set.hpp"
#include "localsfm/geometry.hpp"

namespace lsfm {

// Rows with theta_max below this collapse to a single active row (pairs whose
// relative translation direction is fixed, e.g. pairs touching the root).
inline constexpr double kSingleRowTheta = 1e-9;

struct HoughCoordinates {
  double x = 0.0;  // synthesized translation magnitude s_ij / r_i
  double y = 0.0;  // arccos(t_ij . t_j), in [0, theta_max]
};

// Scale-independent data of one ordered pair (i, j) under fixed normalized
// poses. Encodes how (s_i, s_j, r_i) map to the Hough plane and how each row
// realizes a relative pose direction.
struct PairGeometry {
  Mat3 R_rel = Mat3::Identity();  // R_j R_i^-1
  bool has_ti = false;            // frame i contributes translation (i != root)
  bool has_tj = false;            // frame j contributes translation (j != root)
  Vec3 u_dir = Vec3::Zero();      // -R_rel t_i, the s_i -> inf limit
  Vec3 v_dir = Vec3::Zero();      // t_j, the s_j -> inf limit
  double theta_max = 0.0;
  Mat3 M = Mat3::Identity();      // K_j R_rel K_i^-1
  Mat3 K_j = Mat3::Identity();
  CameraIntrinsics intr_i, intr_j;

  // pose_i / pose_j may be null for the root frame (identity, no direction).
  static PairGeometry make(const NormalizedPose* pose_i, const NormalizedPose* pose_j,
                           const CameraIntrinsics& K_i, const CameraIntrinsics& K_j);

  bool single_row() const { return theta_max <= kSingleRowTheta; }

  // Relative translation direction realized at angle y from v_dir.
  Vec3 direction_at(double y) const;

  // Hough coordinates of a variable assignment. r_i is ignored when frame i
  // is the root (r_o = 1). Returns false when the assignment is degenerate
  // (combined translation vanishes).
  bool map_to_hough(double s_i, double s_j, double r_i, HoughCoordinates* out) const;
};

struct PixelBounds {
  double lo = 0.0;
  double hi = 0.0;  // may be +inf when the epipole lies inside the circle
  bool valid = false;
};

// Inlier interval of x = s_ij / r_i for one sample under a fixed relative
// direction: A = depth * M [pixel;1], B = K_j t_dir. Solves || q(x) - c || <=
// lambda with q(x) = (A_xy + x B_xy) / (A_z + x B_z), clamped to the
// positive-depth half line; the interval endpoints equal J(.) evaluated at the
// line-circle intersection points.
PixelBounds pixel_bounds(const Vec3& A, const Vec3& B, const Vec2& center, double lambda);

// Convenience overload mirroring the J-route definition.
PixelBounds pixel_bounds(const PairGeometry& pair, const Vec3& t_dir, const Vec2& pixel_i,
                         double depth_i, const Vec2& target, double lambda);

struct HoughMatrix {
  int y_bins = 0;
  int x_bins = 0;
  double x_max = 0.0;
  double theta_max = 0.0;
  int frame_i = -1;
  int frame_j = -1;
  int pixel_count = 0;  // M
  long saturated = 0;   // samples whose interval crossed x_max
  std::vector<std::uint32_t> grid;  // y * x_bins + x
  std::vector<float> smooth;        // 3x3 box blur of grid, BA read path

  int active_rows() const { return theta_max <= kSingleRowTheta ? 1 : y_bins; }
  std::uint32_t at(int iy, int ix) const {
    return grid[static_cast<std::size_t>(iy) * x_bins + ix];
  }

  double index_nearest(double x, double y) const;
  double index_bilinear(double x, double y) const;  // raw grid

  struct SmoothSample {
    double value = 0.0;
    double ddx = 0.0;  // d value / d x (per meter)
    double ddy = 0.0;  // d value / d y (per radian)
  };
  SmoothSample smooth_sample(double x, double y) const;
};

enum class IndexMode { kNearest, kBilinear };
double index_score(const HoughMatrix& h, const HoughCoordinates& coords, IndexMode mode);

struct HoughBuildParams {
  int y_bins = 100;
  int x_bins = 200;
  double x_max = 1.0;
  double lambda = 2.0;  // px for 2D, meters for 3D
  bool build_smooth = true;
};

// 2D scoring accumulator (Eq-style inlier intervals per row).
HoughMatrix build_hough_matrix(const PairGeometry& pair, const PairSamples& samples,
                               const HoughBuildParams& params);

// 3D scoring accumulator (RGB-D path, adjustments fixed to 1).
HoughMatrix build_hough_matrix_3d(const PairGeometry& pair, const PairSamples& samples,
                                  const HoughBuildParams& params);

// Debug dump: 16-bit PGM plus a JSON sidecar (x_max, theta_max, M).
void write_hough_debug(const HoughMatrix& h, const std::string& path_prefix);

}  // namespace lsfm
