#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "localsfm/geometry.hpp"

namespace lsfm {

// Dense float32 raster; 0 encodes invalid.
struct RasterF32 {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  static RasterF32 zeros(int width, int height) {
    return {width, height, std::vector<float>(static_cast<std::size_t>(width) * height, 0.0f)};
  }

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  // Bilinear sample; nullopt outside bounds or when any support pixel is invalid.
  std::optional<double> sample(const Vec2& pixel) const;
};

// 3-channel float32 raster (target u, target v, confidence). Targets are
// absolute pixel coordinates in the paired frame.
struct CorrespondenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // interleaved u, v, c

  static CorrespondenceMap zeros(int width, int height) {
    return {width, height,
            std::vector<float>(static_cast<std::size_t>(width) * height * 3, 0.0f)};
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  Vec2 target_at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {data[o], data[o + 1]};
  }
  float confidence_at(int x, int y) const { return data[offset(x, y) + 2]; }
  void set(int x, int y, const Vec2& target, float confidence) {
    const std::size_t o = offset(x, y);
    data[o] = static_cast<float>(target.x());
    data[o + 1] = static_cast<float>(target.y());
    data[o + 2] = confidence;
  }

  struct Sample {
    Vec2 target;
    double confidence = 0.0;
  };
  // Bilinear sample of target and confidence at a continuous pixel.
  std::optional<Sample> sample(const Vec2& pixel) const;
};

enum class ScoringMode { kRgb, kRgbd };

struct Frame {
  int id = 0;
  CameraIntrinsics intrinsics;
  RasterF32 depth;
  std::string rgb_path;
};

struct FrameSet {
  std::vector<Frame> frames;
  int root = 0;  // index into frames
  ScoringMode mode = ScoringMode::kRgb;
  std::map<std::pair<int, int>, CorrespondenceMap> correspondences;

  int size() const { return static_cast<int>(frames.size()); }
  bool has_corr(int i, int j) const { return correspondences.count({i, j}) > 0; }
  const CorrespondenceMap& corr(int i, int j) const { return correspondences.at({i, j}); }

  // Non-root frame indices, ascending.
  std::vector<int> support_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (i != root) out.push_back(i);
    return out;
  }
};

// Default root position: center of the window.
int default_root_index(int n_frames);

// Fixed sample set of one ordered frame pair, shared by Hough construction
// and brute-force scoring.
struct PairSamples {
  std::vector<Vec2> pixel;          // source pixel on frame i
  std::vector<double> depth;        // raw input depth of frame i
  std::vector<Vec2> target;         // correspondence target on frame j
  std::vector<double> target_depth; // raw depth of frame j at target (0 if unknown)
  std::vector<double> confidence;

  std::size_t size() const { return pixel.size(); }
};

// Deterministic draw of `count` samples (with replacement) from pixels with
// valid depth and confidence >= conf_min. When require_target_depth is set
// (3D scoring), samples also need valid depth under the target pixel.
PairSamples sample_pair(const FrameSet& frames, int i, int j, int count, double conf_min,
                        std::uint64_t seed, bool require_target_depth);

// Lazily built per-ordered-pair samples, deterministic in (seed, i, j).
class SampleBank {
 public:
  SampleBank(const FrameSet& frames, int count, double conf_min, std::uint64_t seed,
             bool require_target_depth)
      : frames_(&frames),
        count_(count),
        conf_min_(conf_min),
        seed_(seed),
        require_target_depth_(require_target_depth) {}

  const PairSamples& get(int i, int j);
  int sample_count() const { return count_; }

 private:
  const FrameSet* frames_;
  int count_;
  double conf_min_;
  std::uint64_t seed_;
  bool require_target_depth_;
  std::map<std::pair<int, int>, PairSamples> cache_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace lsfm
