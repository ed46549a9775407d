#include "localsfm/frame_set.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "localsfm/log.hpp"

namespace lsfm {

std::optional<double> RasterF32::sample(const Vec2& pixel) const {
  if (!(pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width - 1.0 &&
        pixel.y() <= height - 1.0))
    return std::nullopt;
  const int x0 = std::min(static_cast<int>(pixel.x()), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(pixel.y()), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = pixel.x() - x0;
  const double fy = pixel.y() - y0;
  const double v00 = at(x0, y0);
  const double v10 = at(x1, y0);
  const double v01 = at(x0, y1);
  const double v11 = at(x1, y1);
  if (v00 <= 0.0 || v10 <= 0.0 || v01 <= 0.0 || v11 <= 0.0) return std::nullopt;
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

std::optional<CorrespondenceMap::Sample> CorrespondenceMap::sample(const Vec2& pixel) const {
  if (!(pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width - 1.0 &&
        pixel.y() <= height - 1.0))
    return std::nullopt;
  const int x0 = std::min(static_cast<int>(pixel.x()), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(pixel.y()), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = pixel.x() - x0;
  const double fy = pixel.y() - y0;
  Sample out;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  out.target = w00 * target_at(x0, y0) + w10 * target_at(x1, y0) + w01 * target_at(x0, y1) +
               w11 * target_at(x1, y1);
  out.confidence = w00 * confidence_at(x0, y0) + w10 * confidence_at(x1, y0) +
                   w01 * confidence_at(x0, y1) + w11 * confidence_at(x1, y1);
  return out;
}

int default_root_index(int n_frames) {
  // Center frame o = floor((N+1)/2) in 1-based indexing.
  return (n_frames + 1) / 2 - 1;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xc2b2ae3d27d4eb4fULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

PairSamples sample_pair(const FrameSet& frames, int i, int j, int count, double conf_min,
                        std::uint64_t seed, bool require_target_depth) {
  const Frame& src = frames.frames.at(i);
  const Frame& dst = frames.frames.at(j);
  const CorrespondenceMap& corr = frames.corr(i, j);

  std::vector<int> valid;
  valid.reserve(static_cast<std::size_t>(src.depth.width) * src.depth.height);
  for (int y = 0; y < src.depth.height; ++y) {
    for (int x = 0; x < src.depth.width; ++x) {
      if (src.depth.at(x, y) <= 0.0f) continue;
      if (corr.confidence_at(x, y) < conf_min) continue;
      if (require_target_depth) {
        const auto d = dst.depth.sample(corr.target_at(x, y));
        if (!d.has_value()) continue;
      }
      valid.push_back(y * src.depth.width + x);
    }
  }
  if (valid.empty())
    throw std::runtime_error("sample_pair: no usable correspondences for pair (" +
                             std::to_string(i) + "," + std::to_string(j) + ")");

  PairSamples out;
  out.pixel.reserve(count);
  out.depth.reserve(count);
  out.target.reserve(count);
  out.target_depth.reserve(count);
  out.confidence.reserve(count);

  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)));
  std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
  for (int m = 0; m < count; ++m) {
    const int flat = valid[pick(rng)];
    const int x = flat % src.depth.width;
    const int y = flat / src.depth.width;
    out.pixel.emplace_back(x, y);
    out.depth.push_back(src.depth.at(x, y));
    out.target.push_back(corr.target_at(x, y));
    out.confidence.push_back(corr.confidence_at(x, y));
    const auto dj = dst.depth.sample(corr.target_at(x, y));
    out.target_depth.push_back(dj.value_or(0.0));
  }
  return out;
}

const PairSamples& SampleBank::get(int i, int j) {
  auto it = cache_.find({i, j});
  if (it != cache_.end()) return it->second;
  PairSamples samples =
      sample_pair(*frames_, i, j, count_, conf_min_, seed_, require_target_depth_);
  auto [ins, ok] = cache_.emplace(std::make_pair(i, j), std::move(samples));
  (void)ok;
  return ins->second;
}

}  // namespace lsfm
