#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "localsfm/config.hpp"
#include "localsfm/frame_set.hpp"
#include "localsfm/hough.hpp"
#include "localsfm/minimal_solver.hpp"

namespace lsfm {

// One candidate index per support frame (support order of CandidatePool).
struct PoseGroup {
  std::vector<int> cand;
};

struct ConsensusState {
  std::vector<double> scales;       // per support frame, meters
  std::vector<double> adjustments;  // per support frame, unitless
  long certified = -1;              // nearest-mode inlier count
};

// Concurrent memoization of Hough matrices keyed by (frame pair, candidate
// identities); each key is built exactly once.
class HoughCache {
 public:
  static std::uint64_t key(int i, int j, int cand_i, int cand_j) {
    auto pack = [](int v) { return static_cast<std::uint64_t>(v + 1) & 0xffff; };
    return pack(i) << 48 | pack(j) << 32 | pack(cand_i) << 16 | pack(cand_j);
  }

  const HoughMatrix& get_or_build(std::uint64_t key, const std::function<HoughMatrix()>& builder);

  std::size_t build_count() const { return builds_.load(); }
  std::size_t hit_count() const { return hits_.load(); }
  std::size_t unique_keys() const;

 private:
  struct Entry {
    std::once_flag once;
    HoughMatrix matrix;
  };
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::unique_ptr<Entry>> map_;
  std::atomic<std::size_t> builds_{0};
  std::atomic<std::size_t> hits_{0};
};

struct BrcResult {
  std::vector<int> support_frames;
  std::vector<ScaledPose> poses;        // per support frame, b(P, s)
  std::vector<double> adjustments;      // per support frame
  PoseGroup group;
  ConsensusState state;
  std::vector<long> score_trace;        // certified score per epoch (index 0 = init)
  std::vector<std::size_t> builds_per_epoch;  // unique matrices built per epoch
  std::vector<bool> epoch_improved;
};

// Driver for the greedy pose-group search with bundle-adjustment consensus.
class BrcEngine {
 public:
  BrcEngine(const FrameSet& frames, const CandidatePool& pool, const PipelineConfig& config);

  // Gradient ascent over (log S, log R) of the summed Hough score; returns the
  // best certified iterate. In RGB-D mode adjustments stay pinned to 1.
  ConsensusState ba_consensus(const PoseGroup& group, const ConsensusState& init, int iters,
                              double lr);

  // One epoch of Eq-style ablation: evaluates every single-pose replacement
  // plus the incumbent, applies at most one update. Returns true when the
  // certified score strictly increased.
  bool greedy_epoch(PoseGroup* group, ConsensusState* state);

  ConsensusState initial_state(const PoseGroup& group);
  long certified_score(const PoseGroup& group, const ConsensusState& state);

  BrcResult run();

  HoughCache& cache() { return cache_; }
  SampleBank& samples() { return samples_; }
  const std::vector<int>& support_frames() const { return support_frames_; }

 private:
  struct PairContext {
    int i, j;
    int slot_i, slot_j;  // -1 for root
    PairGeometry geom;
    const HoughMatrix* matrix;
  };
  std::vector<PairContext> pair_contexts(const PoseGroup& group);
  const NormalizedPose* pose_ptr(const PoseGroup& group, int frame) const;
  const HoughMatrix& matrix_for(const PoseGroup& group, int i, int j);

  const FrameSet& frames_;
  const CandidatePool& pool_;
  const PipelineConfig& config_;
  bool mode_3d_;
  std::vector<int> support_frames_;
  SampleBank samples_;
  HoughCache cache_;
};

// Full pipeline stage: pool -> greedy search -> metric poses.
BrcResult run_brc(const FrameSet& frames, const CandidatePool& pool,
                  const PipelineConfig& config);

struct CacheAuditReport {
  std::size_t first_epoch_builds = 0;
  std::size_t first_epoch_expected = 0;
  std::vector<std::size_t> later_builds;
  std::vector<std::size_t> later_expected;
  bool ok = false;
};

// Checks the unique-matrix counts recorded by run_brc against the
// first-epoch and per-epoch bounds.
CacheAuditReport cache_complexity_audit(const BrcResult& result, int n_frames, int pool_size);

}  // namespace lsfm
