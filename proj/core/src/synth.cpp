#include "localsfm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "localsfm/log.hpp"
#include "localsfm/parallel.hpp"

namespace lsfm {

namespace {

struct Disc {
  Vec3 center;
  Vec3 normal;
  double radius;
};

struct ScenePrims {
  std::vector<Disc> discs;  // z-sorted
  Disc backdrop;
};

struct Hit {
  double t = -1.0;
  int prim = -1;  // -2 backdrop
  Vec3 point = Vec3::Zero();
};

bool intersect_disc(const Vec3& origin, const Vec3& dir, const Disc& disc, double* t_out,
                    Vec3* point_out) {
  const double denom = dir.dot(disc.normal);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (disc.center - origin).dot(disc.normal) / denom;
  if (t < 0.05) return false;
  const Vec3 q = origin + t * dir;
  if ((q - disc.center).squaredNorm() > disc.radius * disc.radius) return false;
  *t_out = t;
  *point_out = q;
  return true;
}

// Per-camera pixel-binned candidate lists (CSR) so each ray only tests discs
// splatting near its pixel. The backdrop is always tested.
struct CasterIndex {
  int width = 0, height = 0;
  std::vector<std::uint32_t> offsets;
  std::vector<std::int32_t> ids;

  static CasterIndex build(const ScenePrims& prims, const ScaledPose& cam,
                           const CameraIntrinsics& K) {
    CasterIndex index;
    index.width = K.width;
    index.height = K.height;
    const std::size_t n_pix = static_cast<std::size_t>(K.width) * K.height;
    std::vector<std::uint32_t> counts(n_pix, 0);

    struct Splat {
      int x0, x1, y0, y1;
      double cx, cy, r2;
    };
    std::vector<Splat> splats(prims.discs.size());
    for (std::size_t s = 0; s < prims.discs.size(); ++s) {
      const Disc& d = prims.discs[s];
      Splat& sp = splats[s];
      sp.x0 = 1;
      sp.x1 = 0;  // empty by default
      const Vec3 pc = cam.apply(d.center);
      if (pc.z() <= 0.1) continue;
      const Vec2 c = K.project_dir(pc);
      const double r_px = std::max(K.fx, K.fy) * d.radius / pc.z() + 2.0;
      sp.cx = c.x();
      sp.cy = c.y();
      sp.r2 = r_px * r_px;
      sp.x0 = std::max(0, static_cast<int>(std::floor(c.x() - r_px)));
      sp.x1 = std::min(K.width - 1, static_cast<int>(std::ceil(c.x() + r_px)));
      sp.y0 = std::max(0, static_cast<int>(std::floor(c.y() - r_px)));
      sp.y1 = std::min(K.height - 1, static_cast<int>(std::ceil(c.y() + r_px)));
      for (int y = sp.y0; y <= sp.y1; ++y)
        for (int x = sp.x0; x <= sp.x1; ++x) {
          const double dx = x - sp.cx, dy = y - sp.cy;
          if (dx * dx + dy * dy <= sp.r2) ++counts[static_cast<std::size_t>(y) * K.width + x];
        }
    }
    index.offsets.assign(n_pix + 1, 0);
    for (std::size_t p = 0; p < n_pix; ++p) index.offsets[p + 1] = index.offsets[p] + counts[p];
    index.ids.resize(index.offsets.back());
    std::vector<std::uint32_t> cursor(index.offsets.begin(), index.offsets.end() - 1);
    for (std::size_t s = 0; s < prims.discs.size(); ++s) {
      const Splat& sp = splats[s];
      for (int y = sp.y0; y <= sp.y1; ++y)
        for (int x = sp.x0; x <= sp.x1; ++x) {
          const double dx = x - sp.cx, dy = y - sp.cy;
          if (dx * dx + dy * dy <= sp.r2)
            index.ids[cursor[static_cast<std::size_t>(y) * K.width + x]++] =
                static_cast<std::int32_t>(s);
        }
    }
    return index;
  }

  // Pixel bin used for candidate lookup (subpixel rays use the nearest bin).
  std::pair<std::uint32_t, std::uint32_t> range(double px, double py) const {
    const int x = std::clamp(static_cast<int>(std::lround(px)), 0, width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(py)), 0, height - 1);
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return {offsets[p], offsets[p + 1]};
  }
};

Hit cast(const ScenePrims& prims, const CasterIndex& index, const Vec3& origin, const Vec3& dir,
         double px, double py) {
  Hit best;
  double t;
  Vec3 q;
  if (intersect_disc(origin, dir, prims.backdrop, &t, &q)) {
    best.t = t;
    best.prim = -2;
    best.point = q;
  }
  const auto [lo, hi] = index.range(px, py);
  for (std::uint32_t k = lo; k < hi; ++k) {
    const int id = index.ids[k];
    if (intersect_disc(origin, dir, prims.discs[id], &t, &q)) {
      if (best.prim == -1 || t < best.t || (t == best.t && id < best.prim)) {
        best.t = t;
        best.prim = id;
        best.point = q;
      }
    }
  }
  return best;
}

ScaledPose look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - center).normalized();
  const Vec3 x = up.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 R_wc;  // camera-from-world rows
  R_wc.row(0) = x.transpose();
  R_wc.row(1) = y.transpose();
  R_wc.row(2) = z.transpose();
  return {R_wc, -(R_wc * center)};
}

ScenePrims make_prims(const SceneSpec& spec, std::mt19937_64& rng) {
  ScenePrims prims;
  prims.backdrop = {Vec3(0.0, 0.0, 5.6), Vec3(0.0, 0.0, -1.0), 60.0};
  std::uniform_real_distribution<double> ux(-2.0, 2.0);
  std::uniform_real_distribution<double> uy(-1.5, 1.5);
  std::uniform_real_distribution<double> uz(2.2, 5.0);
  std::uniform_real_distribution<double> ur(0.10, 0.20);
  std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> utilt(0.0, 0.7);
  if (spec.geometry == SceneGeometry::kSurfelCloud) {
    prims.discs.reserve(spec.surfel_count);
    for (int s = 0; s < spec.surfel_count; ++s) {
      Disc d;
      d.center = Vec3(ux(rng), uy(rng), uz(rng));
      const double phi = uang(rng);
      const double tilt = utilt(rng);
      d.normal = Vec3(std::sin(tilt) * std::cos(phi), std::sin(tilt) * std::sin(phi),
                      -std::cos(tilt));
      d.radius = ur(rng);
      prims.discs.push_back(d);
    }
  } else {
    // A few large, slightly tilted planes at staggered depths.
    const Vec3 centers[3] = {Vec3(-1.2, 0.0, 2.6), Vec3(1.2, 0.5, 3.4), Vec3(0.0, -0.8, 4.2)};
    for (const Vec3& c : centers) {
      Disc d;
      d.center = c;
      const double phi = uang(rng);
      const double tilt = 0.25 * utilt(rng);
      d.normal = Vec3(std::sin(tilt) * std::cos(phi), std::sin(tilt) * std::sin(phi),
                      -std::cos(tilt));
      d.radius = 1.8;
      prims.discs.push_back(d);
    }
  }
  return prims;
}

}  // namespace

void SceneSpec::validate() const {
  if (n_frames < 2) throw std::invalid_argument("scene spec: n_frames must be >= 2");
  if (baseline <= 0.0) throw std::invalid_argument("scene spec: baseline must be positive");
  if (width < 16 || height < 16) throw std::invalid_argument("scene spec: resolution too small");
  if (outlier_frac < 0.0 || outlier_frac >= 1.0)
    throw std::invalid_argument("scene spec: outlier_frac must be in [0,1)");
  if (corrupt_lo <= 0.0 || corrupt_hi < corrupt_lo)
    throw std::invalid_argument("scene spec: bad depth corruption range");
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  const int n = spec.n_frames;
  const int root = default_root_index(n);

  CameraIntrinsics K;
  K.width = spec.width;
  K.height = spec.height;
  K.fx = K.fy = 0.8 * spec.width;
  K.cx = spec.width / 2.0;
  K.cy = spec.height / 2.0;

  std::mt19937_64 layout_rng(mix_seed(spec.seed, 0xa11ce, 0));
  const ScenePrims prims = make_prims(spec, layout_rng);

  // Cameras on an arc around the content; world frame equals the root frame.
  const double arc_radius = 4.0;
  const double chord = spec.baseline / (n - 1);
  const double step = 2.0 * std::asin(std::clamp(chord / (2.0 * arc_radius), 0.0, 1.0));
  const Vec3 target(0.0, 0.0, 3.5);
  std::vector<ScaledPose> cam_from_world(n);
  std::vector<Vec3> centers(n);
  for (int k = 0; k < n; ++k) {
    const double off = static_cast<double>(k - root);
    const double phi = off * step;
    centers[k] = Vec3(arc_radius * std::sin(phi), 0.12 * spec.baseline * std::sin(1.7 * off),
                      arc_radius * (1.0 - std::cos(phi)));
    cam_from_world[k] = look_at(centers[k], target, Vec3::UnitY());
  }
  // Re-express against the actual root camera so the root pose is identity.
  const ScaledPose world_from_root = cam_from_world[root].inverse();
  scene.gt_poses.resize(n);
  for (int k = 0; k < n; ++k) {
    scene.gt_poses[k] = {cam_from_world[k].R * world_from_root.R,
                         cam_from_world[k].R * world_from_root.t + cam_from_world[k].t};
  }
  scene.gt_poses[root] = ScaledPose{};

  // Exact depth rasters plus per-pixel hit caches for correspondence maps.
  std::vector<CasterIndex> caster(n);
  std::vector<std::vector<Vec3>> hit_points(n);
  std::vector<std::vector<int>> hit_prims(n);
  scene.gt_depth.resize(n);
  const std::size_t n_pix = static_cast<std::size_t>(spec.width) * spec.height;
  for (int k = 0; k < n; ++k) {
    caster[k] = CasterIndex::build(prims, cam_from_world[k], K);
    hit_points[k].assign(n_pix, Vec3::Zero());
    hit_prims[k].assign(n_pix, -1);
    scene.gt_depth[k] = RasterF32::zeros(spec.width, spec.height);
    const ScaledPose world_from_cam = cam_from_world[k].inverse();
    RasterF32& depth = scene.gt_depth[k];
    parallel_for(n_pix, [&](std::size_t p) {
      const int x = static_cast<int>(p % spec.width);
      const int y = static_cast<int>(p / spec.width);
      const Vec3 dir_world = (world_from_cam.R * K.ray(Vec2(x, y))).normalized();
      const Hit hit = cast(prims, caster[k], centers[k], dir_world, x, y);
      if (hit.prim == -1) return;
      hit_points[k][p] = hit.point;
      hit_prims[k][p] = hit.prim;
      depth.at(x, y) = static_cast<float>(cam_from_world[k].apply(hit.point).z());
    });
  }

  // Exact correspondence maps with occlusion-aware confidence.
  FrameSet& frames = scene.frames;
  frames.root = root;
  frames.mode = spec.mode;
  frames.frames.resize(n);
  for (int k = 0; k < n; ++k) {
    frames.frames[k].id = k;
    frames.frames[k].intrinsics = K;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      CorrespondenceMap map = CorrespondenceMap::zeros(spec.width, spec.height);
      parallel_for(n_pix, [&](std::size_t p) {
        if (hit_prims[i][p] == -1) return;
        const int x = static_cast<int>(p % spec.width);
        const int y = static_cast<int>(p / spec.width);
        const Vec3 pc = cam_from_world[j].apply(hit_points[i][p]);
        if (pc.z() <= kDepthEps) return;
        const Vec2 q = K.project_dir(pc);
        if (!K.contains(q)) {
          map.set(x, y, q, 0.0f);
          return;
        }
        const Vec3 dir_world =
            (cam_from_world[j].inverse().R * K.ray(q)).normalized();
        const Hit check = cast(prims, caster[j], centers[j], dir_world, q.x(), q.y());
        const bool visible = check.prim == hit_prims[i][p] &&
                             (check.point - hit_points[i][p]).norm() <
                                 1e-6 * (1.0 + hit_points[i][p].norm());
        map.set(x, y, q, visible ? 1.0f : 0.0f);
      });
      frames.correspondences.emplace(std::make_pair(i, j), std::move(map));
    }
  }

  // Depth corruption: per-frame scale plus optional per-pixel noise.
  scene.g.assign(n, 1.0);
  std::mt19937_64 corrupt_rng(mix_seed(spec.seed, 0xdeb7, 1));
  std::uniform_real_distribution<double> ug(spec.corrupt_lo, spec.corrupt_hi);
  for (int k = 0; k < n; ++k) {
    if (k != root && (spec.corrupt_lo != 1.0 || spec.corrupt_hi != 1.0)) scene.g[k] = ug(corrupt_rng);
  }
  for (int k = 0; k < n; ++k) {
    RasterF32 depth = scene.gt_depth[k];
    std::mt19937_64 rng(mix_seed(spec.seed, 0xd001, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (float& v : depth.data) {
      if (v <= 0.0f) continue;
      double d = v * scene.g[k];
      if (spec.depth_noise > 0.0) d *= std::max(0.05, 1.0 + spec.depth_noise * noise(rng));
      v = static_cast<float>(d);
    }
    frames.frames[k].depth = std::move(depth);
  }

  // Correspondence noise and gross outliers.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      CorrespondenceMap& map = frames.correspondences.at({i, j});
      std::mt19937_64 rng(mix_seed(spec.seed, 0xc002,
                                   static_cast<std::uint64_t>(i) * n + j));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<std::size_t> valid;
      for (std::size_t p = 0; p < n_pix; ++p) {
        const int x = static_cast<int>(p % spec.width);
        const int y = static_cast<int>(p / spec.width);
        if (map.confidence_at(x, y) <= 0.0f) continue;
        valid.push_back(p);
        if (spec.noise_px > 0.0) {
          Vec2 t = map.target_at(x, y);
          t.x() = std::clamp(t.x() + spec.noise_px * gauss(rng), 0.0, spec.width - 1.0);
          t.y() = std::clamp(t.y() + spec.noise_px * gauss(rng), 0.0, spec.height - 1.0);
          map.set(x, y, t, 1.0f);
        }
      }
      std::size_t n_outliers = static_cast<std::size_t>(spec.outlier_frac * valid.size());
      std::shuffle(valid.begin(), valid.end(), rng);
      std::uniform_real_distribution<double> umag(20.0, 100.0);
      std::uniform_real_distribution<double> uphi(0.0, 2.0 * M_PI);
      std::size_t displaced = 0;
      for (std::size_t k = 0; k < valid.size() && displaced < n_outliers; ++k) {
        const int x = static_cast<int>(valid[k] % spec.width);
        const int y = static_cast<int>(valid[k] / spec.width);
        const Vec2 clean = map.target_at(x, y);
        for (int attempt = 0; attempt < 64; ++attempt) {
          const double mag = umag(rng);
          const double phi = uphi(rng);
          const Vec2 cand = clean + mag * Vec2(std::cos(phi), std::sin(phi));
          if (cand.x() >= 0.0 && cand.y() >= 0.0 && cand.x() <= spec.width - 1.0 &&
              cand.y() <= spec.height - 1.0) {
            map.set(x, y, cand, 1.0f);
            ++displaced;
            break;
          }
        }
      }
      scene.outlier_counts.push_back(displaced);
      if (displaced < n_outliers)
        LSFM_LOG_WARN("scene outliers: placed %zu of %zu for pair (%d,%d)", displaced, n_outliers,
                      i, j);
    }
  }
  return scene;
}

namespace {

// Relative translation at metric scales; returns false for pure rotation.
bool pair_translation(const NormalizedPose* pose_i, double s_i, const NormalizedPose* pose_j,
                      double s_j, Mat3* R_rel, Vec3* t_rel) {
  const Mat3 R_i = pose_i != nullptr ? pose_i->R : Mat3::Identity();
  const Mat3 R_j = pose_j != nullptr ? pose_j->R : Mat3::Identity();
  *R_rel = R_j * R_i.transpose();
  Vec3 t = Vec3::Zero();
  if (pose_i != nullptr) t -= s_i * (*R_rel * pose_i->t_dir);
  if (pose_j != nullptr) t += s_j * pose_j->t_dir;
  *t_rel = t;
  return true;
}

}  // namespace

long brute_force_score_pair_2d(const NormalizedPose* pose_i, double s_i, double r_i,
                               const NormalizedPose* pose_j, double s_j,
                               const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                               const PairSamples& samples, double lambda_2d) {
  Mat3 R_rel;
  Vec3 t_rel;
  pair_translation(pose_i, s_i, pose_j, s_j, &R_rel, &t_rel);
  const double r = pose_i != nullptr ? r_i : 1.0;
  long count = 0;
  const double l2 = lambda_2d * lambda_2d;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const Vec3 x = R_rel * (r * samples.depth[m] * K_i.ray(samples.pixel[m])) + t_rel;
    if (x.z() <= kDepthEps) continue;
    const Vec2 q = K_j.project_dir(x);
    if ((q - samples.target[m]).squaredNorm() < l2) ++count;
  }
  return count;
}

long brute_force_score_pair_3d(const NormalizedPose* pose_i, double s_i,
                               const NormalizedPose* pose_j, double s_j,
                               const CameraIntrinsics& K_i, const CameraIntrinsics& K_j,
                               const PairSamples& samples, double lambda_3d) {
  Mat3 R_rel;
  Vec3 t_rel;
  pair_translation(pose_i, s_i, pose_j, s_j, &R_rel, &t_rel);
  long count = 0;
  const double l2 = lambda_3d * lambda_3d;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    if (samples.target_depth[m] <= 0.0) continue;
    const Vec3 pi = R_rel * (samples.depth[m] * K_i.ray(samples.pixel[m])) + t_rel;
    const Vec3 pj = samples.target_depth[m] * K_j.ray(samples.target[m]);
    if ((pi - pj).squaredNorm() < l2) ++count;
  }
  return count;
}

long brute_force_score_2d(const std::vector<NormalizedPose>& poses, int root,
                          const std::vector<double>& scales,
                          const std::vector<double>& adjustments,
                          const std::vector<CameraIntrinsics>& intrinsics, SampleBank& samples,
                          double lambda_2d) {
  const int n = static_cast<int>(poses.size());
  long total = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      total += brute_force_score_pair_2d(i == root ? nullptr : &poses[i], scales[i],
                                         adjustments[i], j == root ? nullptr : &poses[j],
                                         scales[j], intrinsics[i], intrinsics[j],
                                         samples.get(i, j), lambda_2d);
    }
  }
  return total;
}

long brute_force_score_3d(const std::vector<NormalizedPose>& poses, int root,
                          const std::vector<double>& scales,
                          const std::vector<CameraIntrinsics>& intrinsics, SampleBank& samples,
                          double lambda_3d) {
  const int n = static_cast<int>(poses.size());
  long total = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      total += brute_force_score_pair_3d(i == root ? nullptr : &poses[i], scales[i],
                                         j == root ? nullptr : &poses[j], scales[j],
                                         intrinsics[i], intrinsics[j], samples.get(i, j),
                                         lambda_3d);
    }
  }
  return total;
}

}  // namespace lsfm
