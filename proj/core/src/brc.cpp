#include "localsfm/brc.hpp"

#include <algorithm>
#include <cmath>

#include "localsfm/errors.hpp"
#include "localsfm/log.hpp"
#include "localsfm/parallel.hpp"

namespace lsfm {

const HoughMatrix& HoughCache::get_or_build(std::uint64_t key,
                                            const std::function<HoughMatrix()>& builder) {
  Entry* entry = nullptr;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) {
      it = map_.emplace(key, std::make_unique<Entry>()).first;
    } else {
      hits_.fetch_add(1);
    }
    entry = it->second.get();
  }
  std::call_once(entry->once, [&] {
    entry->matrix = builder();
    builds_.fetch_add(1);
  });
  return entry->matrix;
}

std::size_t HoughCache::unique_keys() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return map_.size();
}

BrcEngine::BrcEngine(const FrameSet& frames, const CandidatePool& pool,
                     const PipelineConfig& config)
    : frames_(frames),
      pool_(pool),
      config_(config),
      mode_3d_(frames.mode == ScoringMode::kRgbd),
      support_frames_(pool.support_frames),
      samples_(frames, config.samples_per_pair, config.confidence_min, config.seed, mode_3d_) {}

const NormalizedPose* BrcEngine::pose_ptr(const PoseGroup& group, int frame) const {
  if (frame == frames_.root) return nullptr;
  const int slot = pool_.slot_of(frame);
  return &pool_.poses[slot][group.cand[slot]];
}

const HoughMatrix& BrcEngine::matrix_for(const PoseGroup& group, int i, int j) {
  const int ci = i == frames_.root ? -1 : group.cand[pool_.slot_of(i)];
  const int cj = j == frames_.root ? -1 : group.cand[pool_.slot_of(j)];
  const std::uint64_t key = HoughCache::key(i, j, ci, cj);
  return cache_.get_or_build(key, [&]() {
    const PairGeometry geom =
        PairGeometry::make(pose_ptr(group, i), pose_ptr(group, j), frames_.frames[i].intrinsics,
                           frames_.frames[j].intrinsics);
    HoughBuildParams params;
    params.y_bins = config_.hough_y_bins;
    params.x_bins = config_.hough_x_bins;
    params.x_max = config_.x_max;
    params.lambda = mode_3d_ ? config_.lambda_3d : config_.lambda_2d;
    params.build_smooth = config_.ba_smooth_reads;
    HoughMatrix m = mode_3d_ ? build_hough_matrix_3d(geom, samples_.get(i, j), params)
                             : build_hough_matrix(geom, samples_.get(i, j), params);
    m.frame_i = i;
    m.frame_j = j;
    return m;
  });
}

std::vector<BrcEngine::PairContext> BrcEngine::pair_contexts(const PoseGroup& group) {
  std::vector<PairContext> pairs;
  const int n = frames_.size();
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      PairContext ctx;
      ctx.i = i;
      ctx.j = j;
      ctx.slot_i = i == frames_.root ? -1 : pool_.slot_of(i);
      ctx.slot_j = j == frames_.root ? -1 : pool_.slot_of(j);
      ctx.geom = PairGeometry::make(pose_ptr(group, i), pose_ptr(group, j),
                                    frames_.frames[i].intrinsics, frames_.frames[j].intrinsics);
      ctx.matrix = &matrix_for(group, i, j);
      pairs.push_back(std::move(ctx));
    }
  }
  return pairs;
}

namespace {

long certified_over_pairs(const std::vector<BrcEngine::PairContext>&,
                          const std::vector<double>&, const std::vector<double>&);

}  // namespace

ConsensusState BrcEngine::ba_consensus(const PoseGroup& group, const ConsensusState& init,
                                       int iters, double lr) {
  const std::vector<PairContext> pairs = pair_contexts(group);
  const std::size_t n_support = support_frames_.size();

  std::vector<double> u(n_support), w(n_support, 0.0);
  for (std::size_t s = 0; s < n_support; ++s) {
    u[s] = std::log(std::max(init.scales[s], 1e-6));
    w[s] = std::log(std::max(init.adjustments[s], 1e-6));
  }
  if (mode_3d_) std::fill(w.begin(), w.end(), 0.0);

  const int n_params = static_cast<int>(n_support) * (mode_3d_ ? 1 : 2);
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::vector<double> scales(n_support), adjust(n_support);
  std::vector<double> g_u(n_support), g_w(n_support);

  std::vector<double> best_u = u, best_w = w;
  long best_certified = -1;

  for (int it = 0; it <= iters; ++it) {
    for (std::size_t s = 0; s < n_support; ++s) {
      scales[s] = std::exp(u[s]);
      adjust[s] = std::exp(w[s]);
    }

    // Certified integer score of the current iterate; keep the best.
    const long certified = certified_over_pairs(pairs, scales, adjust);
    if (certified > best_certified) {
      best_certified = certified;
      best_u = u;
      best_w = w;
    }
    if (it == iters) break;

    std::fill(g_u.begin(), g_u.end(), 0.0);
    std::fill(g_w.begin(), g_w.end(), 0.0);
    for (const PairContext& pair : pairs) {
      const double s_i = pair.slot_i >= 0 ? scales[pair.slot_i] : 0.0;
      const double s_j = pair.slot_j >= 0 ? scales[pair.slot_j] : 0.0;
      const double r_i = pair.slot_i >= 0 ? adjust[pair.slot_i] : 1.0;

      Vec3 wv = Vec3::Zero();
      if (pair.geom.has_ti) wv += s_i * pair.geom.u_dir;
      if (pair.geom.has_tj) wv += s_j * pair.geom.v_dir;
      const double s_ij = wv.norm();
      if (s_ij < kDegenerateTranslation) continue;

      const double x = s_ij / r_i;
      double y = 0.0;
      double cosy = 1.0;
      if (!pair.geom.single_row()) {
        cosy = std::clamp(wv.dot(pair.geom.v_dir) / s_ij, -1.0, 1.0);
        y = std::acos(cosy);
      }
      const HoughMatrix::SmoothSample sample = pair.matrix->smooth_sample(x, y);

      const double ds_dsi = pair.geom.has_ti ? wv.dot(pair.geom.u_dir) / s_ij : 0.0;
      const double ds_dsj = pair.geom.has_tj ? wv.dot(pair.geom.v_dir) / s_ij : 0.0;

      double dy_dsi = 0.0, dy_dsj = 0.0;
      if (!pair.geom.single_row()) {
        const double sin2 = 1.0 - cosy * cosy;
        if (sin2 > 1e-12) {
          const double dy_dcos = -1.0 / std::sqrt(sin2);
          const double wv_dot_v = wv.dot(pair.geom.v_dir);
          if (pair.geom.has_ti) {
            const double dcos =
                (pair.geom.u_dir.dot(pair.geom.v_dir) * s_ij - wv_dot_v * ds_dsi) / (s_ij * s_ij);
            dy_dsi = dy_dcos * dcos;
          }
          if (pair.geom.has_tj) {
            const double dcos = (1.0 * s_ij - wv_dot_v * ds_dsj) / (s_ij * s_ij);
            dy_dsj = dy_dcos * dcos;
          }
        }
      }

      if (pair.slot_i >= 0) {
        g_u[pair.slot_i] += s_i * (sample.ddx * ds_dsi / r_i + sample.ddy * dy_dsi);
        if (!mode_3d_) g_w[pair.slot_i] += r_i * (sample.ddx * (-x / r_i));
      }
      if (pair.slot_j >= 0) {
        g_u[pair.slot_j] += s_j * (sample.ddx * ds_dsj / r_i + sample.ddy * dy_dsj);
      }
    }

    bool finite = true;
    for (std::size_t s = 0; s < n_support; ++s)
      finite = finite && std::isfinite(g_u[s]) && std::isfinite(g_w[s]);
    if (!finite) {
      LSFM_LOG_WARN("ba_consensus: non-finite gradient at iter %d, step skipped", it);
      continue;
    }

    const double bc1 = 1.0 - std::pow(beta1, it + 1);
    const double bc2 = 1.0 - std::pow(beta2, it + 1);
    for (std::size_t s = 0; s < n_support; ++s) {
      // Ascent on log-scale parameters.
      double& m1u = m1[s];
      double& m2u = m2[s];
      m1u = beta1 * m1u + (1.0 - beta1) * g_u[s];
      m2u = beta2 * m2u + (1.0 - beta2) * g_u[s] * g_u[s];
      u[s] += lr * (m1u / bc1) / (std::sqrt(m2u / bc2) + eps);
      if (!mode_3d_) {
        double& m1w = m1[n_support + s];
        double& m2w = m2[n_support + s];
        m1w = beta1 * m1w + (1.0 - beta1) * g_w[s];
        m2w = beta2 * m2w + (1.0 - beta2) * g_w[s] * g_w[s];
        w[s] += lr * (m1w / bc1) / (std::sqrt(m2w / bc2) + eps);
      }
    }
  }

  ConsensusState out;
  out.scales.resize(n_support);
  out.adjustments.resize(n_support);
  for (std::size_t s = 0; s < n_support; ++s) {
    out.scales[s] = std::exp(best_u[s]);
    out.adjustments[s] = std::exp(best_w[s]);
  }
  out.certified = best_certified;
  return out;
}

namespace {

long certified_over_pairs(const std::vector<BrcEngine::PairContext>& pairs,
                          const std::vector<double>& scales,
                          const std::vector<double>& adjustments) {
  long total = 0;
  for (const BrcEngine::PairContext& pair : pairs) {
    const double s_i = pair.slot_i >= 0 ? scales[pair.slot_i] : 0.0;
    const double s_j = pair.slot_j >= 0 ? scales[pair.slot_j] : 0.0;
    const double r_i = pair.slot_i >= 0 ? adjustments[pair.slot_i] : 1.0;
    HoughCoordinates coords;
    if (!pair.geom.map_to_hough(s_i, s_j, r_i, &coords)) continue;
    total += static_cast<long>(pair.matrix->index_nearest(coords.x, coords.y));
  }
  return total;
}

}  // namespace

long BrcEngine::certified_score(const PoseGroup& group, const ConsensusState& state) {
  const std::vector<PairContext> pairs = pair_contexts(group);
  return certified_over_pairs(pairs, state.scales, state.adjustments);
}

ConsensusState BrcEngine::initial_state(const PoseGroup& group) {
  const std::size_t n_support = support_frames_.size();
  ConsensusState state;
  state.scales.assign(n_support, 0.0);
  state.adjustments.assign(n_support, 1.0);

  // Fallback scale: a fraction of the median root depth.
  const RasterF32& root_depth = frames_.frames[frames_.root].depth;
  std::vector<float> valid;
  for (const float v : root_depth.data)
    if (v > 0.0f) valid.push_back(v);
  double median_depth = 1.0;
  if (!valid.empty()) {
    std::nth_element(valid.begin(), valid.begin() + valid.size() / 2, valid.end());
    median_depth = valid[valid.size() / 2];
  }
  const double fallback_scale = std::max(0.05 * median_depth, 1e-3);

  for (std::size_t s = 0; s < n_support; ++s) {
    const int frame = support_frames_[s];
    // Root pairs have a single active row; their arg-max columns pin s_j and
    // s_j / r_j directly.
    const HoughMatrix& h_oj = matrix_for(group, frames_.root, frame);
    const HoughMatrix& h_jo = matrix_for(group, frame, frames_.root);
    const double dx_oj = h_oj.x_max / h_oj.x_bins;
    const double dx_jo = h_jo.x_max / h_jo.x_bins;

    int best_col = -1;
    std::uint32_t best_val = 0;
    for (int c = 0; c < h_oj.x_bins; ++c)
      if (h_oj.at(0, c) > best_val) {
        best_val = h_oj.at(0, c);
        best_col = c;
      }
    double scale = best_col >= 0 && best_val > 0 ? (best_col + 0.5) * dx_oj : fallback_scale;

    int best_col2 = -1;
    std::uint32_t best_val2 = 0;
    for (int c = 0; c < h_jo.x_bins; ++c)
      if (h_jo.at(0, c) > best_val2) {
        best_val2 = h_jo.at(0, c);
        best_col2 = c;
      }
    double adjust = 1.0;
    if (!mode_3d_ && best_col2 >= 0 && best_val2 > 0) {
      const double x_jo = (best_col2 + 0.5) * dx_jo;
      if (x_jo > 1e-6) adjust = std::clamp(scale / x_jo, 0.05, 20.0);
    }
    state.scales[s] = std::clamp(scale, 1e-3, h_oj.x_max);
    state.adjustments[s] = adjust;
  }
  state.certified = certified_score(group, state);
  return state;
}

bool BrcEngine::greedy_epoch(PoseGroup* group, ConsensusState* state) {
  const long entering_certified = state->certified;
  const std::size_t n_support = support_frames_.size();
  const int k_pool = pool_.pool_size();

  struct Ablation {
    int slot;
    int cand;
    ConsensusState state;
  };
  std::vector<Ablation> ablations;
  for (std::size_t s = 0; s < n_support; ++s)
    for (int k = 0; k < k_pool; ++k)
      if (k != group->cand[s]) ablations.push_back({static_cast<int>(s), k, {}});

  // All evaluations warm-start from the incumbent state at epoch entry.
  const ConsensusState warm = *state;
  parallel_for(ablations.size(), [&](std::size_t a) {
    PoseGroup ablated = *group;
    ablated.cand[ablations[a].slot] = ablations[a].cand;
    ablations[a].state = ba_consensus(ablated, warm, config_.ba_iters, config_.ba_lr);
  });

  // Re-run the incumbent too; its matrices are cached so this only continues
  // the scale/adjustment optimization.
  const ConsensusState incumbent = ba_consensus(*group, warm, config_.ba_iters, config_.ba_lr);
  if (incumbent.certified > state->certified) *state = incumbent;

  const Ablation* best = nullptr;
  for (const Ablation& a : ablations) {
    if (best == nullptr || a.state.certified > best->state.certified) best = &a;
  }
  if (best != nullptr && best->state.certified > state->certified) {
    group->cand[best->slot] = best->cand;
    *state = best->state;
  }
  return state->certified > entering_certified;
}

BrcResult BrcEngine::run() {
  const std::size_t n_support = support_frames_.size();
  BrcResult result;
  result.support_frames = support_frames_;
  result.group.cand.assign(n_support, 0);  // top-ranked candidates

  const std::size_t builds_at_start = cache_.build_count();
  ConsensusState state = initial_state(result.group);
  state = ba_consensus(result.group, state, config_.ba_iters, config_.ba_lr);
  result.score_trace.push_back(state.certified);

  for (int epoch = 0; epoch < config_.epoch_cap; ++epoch) {
    const std::size_t builds_before = cache_.build_count();
    const bool improved = greedy_epoch(&result.group, &state);
    std::size_t builds = cache_.build_count() - builds_before;
    if (epoch == 0) builds += builds_before - builds_at_start;
    result.builds_per_epoch.push_back(builds);
    result.epoch_improved.push_back(improved);
    result.score_trace.push_back(state.certified);
    if (result.score_trace[result.score_trace.size() - 2] > state.certified)
      throw NumericalError("ScoreRegression", "certified score decreased across an epoch");
    if (!improved) break;
  }

  result.state = state;
  result.poses.resize(n_support);
  result.adjustments.resize(n_support);
  for (std::size_t s = 0; s < n_support; ++s) {
    const NormalizedPose& pose = pool_.poses[s][result.group.cand[s]];
    result.poses[s] = ScaledPose::compose(pose, state.scales[s]);
    result.adjustments[s] = state.adjustments[s];
  }
  LSFM_LOG_INFO("brc: %zu epochs, certified=%ld, %zu unique matrices",
                result.builds_per_epoch.size(), state.certified, cache_.build_count());
  return result;
}

BrcResult run_brc(const FrameSet& frames, const CandidatePool& pool,
                  const PipelineConfig& config) {
  BrcEngine engine(frames, pool, config);
  return engine.run();
}

CacheAuditReport cache_complexity_audit(const BrcResult& result, int n_frames, int pool_size) {
  CacheAuditReport report;
  const std::size_t n = static_cast<std::size_t>(n_frames);
  const std::size_t k = static_cast<std::size_t>(pool_size);
  report.first_epoch_expected = n * (n - 1) + 2 * (n - 1) * (n - 1) * (k - 1);
  report.ok = !result.builds_per_epoch.empty();
  if (!result.builds_per_epoch.empty()) {
    report.first_epoch_builds = result.builds_per_epoch[0];
    report.ok = report.first_epoch_builds == report.first_epoch_expected;
  }
  for (std::size_t e = 1; e < result.builds_per_epoch.size(); ++e) {
    // An epoch following an improvement rebuilds only pairs against the
    // swapped pose; an epoch following no improvement rebuilds nothing.
    const bool prev_improved = result.epoch_improved[e - 1];
    const std::size_t expected = prev_improved ? 2 * (n - 2) * (k - 1) : 0;
    report.later_builds.push_back(result.builds_per_epoch[e]);
    report.later_expected.push_back(expected);
    report.ok = report.ok && result.builds_per_epoch[e] == expected;
  }
  return report;
}

}  // namespace lsfm
