#pragma once

#include <cstdint>
#include <vector>

#include "localsfm/frame_set.hpp"
#include "localsfm/geometry.hpp"

namespace lsfm {

enum class SceneGeometry { kSurfelCloud, kPlaneStack };

struct SceneSpec {
  int n_frames = 5;
  int width = 160;
  int height = 120;
  SceneGeometry geometry = SceneGeometry::kSurfelCloud;
  int surfel_count = 5000;
  double baseline = 0.5;        // total trajectory span in meters
  double noise_px = 0.0;        // gaussian correspondence noise
  double outlier_frac = 0.0;    // gross outliers, displaced 20..100 px
  double corrupt_lo = 1.0;      // per-frame depth scale corruption range
  double corrupt_hi = 1.0;
  double depth_noise = 0.0;     // per-pixel multiplicative depth noise sigma
  ScoringMode mode = ScoringMode::kRgb;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  FrameSet frames;                      // corrupted inputs, what the pipeline sees
  std::vector<ScaledPose> gt_poses;     // per frame, root identity
  std::vector<RasterF32> gt_depth;      // uncorrupted depth rasters
  std::vector<double> g;                // per-frame depth corruption (g_root = 1)
  std::vector<std::size_t> outlier_counts;  // per ordered pair, generated order
};

SyntheticScene generate_scene(const SceneSpec& spec);

// Planted ground-truth values in pipeline conventions.
inline double gt_adjustment(const SyntheticScene& scene, int frame) {
  return 1.0 / scene.g[frame];
}

// Literal per-pixel evaluation of the 2D scoring function for one ordered
// pair; no accumulator, no interval logic, only projection.
long brute_force_score_pair_2d(const NormalizedPose* pose_i, double s_i, double r_i,
                               const NormalizedPose* pose_j, double s_j,
                               const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                               const PairSamples& samples, double lambda_2d);

// Same for the 3D scoring function (adjustments fixed to 1).
long brute_force_score_pair_3d(const NormalizedPose* pose_i, double s_i,
                               const NormalizedPose* pose_j, double s_j,
                               const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                               const PairSamples& samples, double lambda_3d);

// Sum over all ordered pairs. `poses` has one entry per frame (root ignored),
// scales/adjustments are per frame (root scale 0, root adjustment 1).
long brute_force_score_2d(const std::vector<NormalizedPose>& poses, int root,
                          const std::vector<double>& scales,
                          const std::vector<double>& adjustments,
                          const std::vector<CameraIntrinsics>& intrinsics, SampleBank& samples,
                          double lambda_2d);

long brute_force_score_3d(const std::vector<NormalizedPose>& poses, int root,
                          const std::vector<double>& scales,
                          const std::vector<CameraIntrinsics>& intrinsics, SampleBank& samples,
                          double lambda_3d);

}  // namespace lsfm
