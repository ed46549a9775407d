#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "localsfm/frame_set.hpp"
#include "localsfm/geometry.hpp"

namespace lsfm {

struct CorrespondenceSample {
  Vec2 pixel_i;
  Vec2 pixel_j;
  double confidence = 1.0;
};

// Relative poses consistent with five correspondences: up to ten essential
// matrices, each reduced to its cheirality-positive decompositions. Pixels
// are normalized through the intrinsics internally.
std::vector<NormalizedPose> five_point(
    const std::array<std::pair<Vec2, Vec2>, 5>& correspondences, const CameraIntrinsics& K_i,
    const CameraIntrinsics& K_j);

// Essential matrices only (for algebraic tests).
std::vector<Mat3> five_point_essential(const std::array<std::pair<Vec2, Vec2>, 5>& correspondences,
                                       const CameraIntrinsics& K_i, const CameraIntrinsics& K_j);

// Pixel-unit squared Sampson distance of a correspondence under F.
double sampson_sq(const Mat3& F, const Vec2& pixel_i, const Vec2& pixel_j);

struct CandidatePool {
  std::vector<int> support_frames;                 // ascending frame indices
  std::vector<std::vector<NormalizedPose>> poses;  // [slot][k], ranked
  std::vector<std::vector<long>> scores;           // two-view inlier counts

  int pool_size() const { return poses.empty() ? 0 : static_cast<int>(poses[0].size()); }
  int slot_of(int frame) const {
    for (std::size_t s = 0; s < support_frames.size(); ++s)
      if (support_frames[s] == frame) return static_cast<int>(s);
    return -1;
  }
};

struct PoolParams {
  int pool_size = 128;        // K
  int ransac_iters = 2000;
  double sampson_px = 2.0;
  int score_samples = 2000;   // correspondences used for ranking
  double confidence_min = 0.2;
  std::uint64_t seed = 0;
};

// Classical two-view RANSAC between the root and each support frame,
// returning the top-K deduplicated normalized poses per frame. Deterministic
// per seed; throws NumericalError("InsufficientCorrespondences", ...) when a
// pair has fewer than five usable matches.
CandidatePool build_candidate_pool(const FrameSet& frames, const PoolParams& params);

}  // namespace lsfm
