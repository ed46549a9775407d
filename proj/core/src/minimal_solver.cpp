#include "localsfm/minimal_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "localsfm/errors.hpp"
#include "localsfm/log.hpp"
#include "localsfm/parallel.hpp"

namespace lsfm {

namespace {

// Dense trivariate polynomial up to total degree 3 over a fixed monomial
// basis; degree-3 monomials first so Gauss-Jordan leaves the action-matrix
// rows directly readable.
//  0..9 : x3 x2y x2z xy2 xyz xz2 y3 y2z yz2 z3
// 10..19: x2 xy xz y2 yz z2 x y z 1
struct Poly {
  std::array<double, 20> c{};
};

constexpr int kMonExp[20][3] = {
    {3, 0, 0}, {2, 1, 0}, {2, 0, 1}, {1, 2, 0}, {1, 1, 1}, {1, 0, 2}, {0, 3, 0},
    {0, 2, 1}, {0, 1, 2}, {0, 0, 3}, {2, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 2, 0},
    {0, 1, 1}, {0, 0, 2}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 0}};

int monomial_index(int a, int b, int c) {
  for (int k = 0; k < 20; ++k)
    if (kMonExp[k][0] == a && kMonExp[k][1] == b && kMonExp[k][2] == c) return k;
  return -1;
}

struct MonTable {
  int idx[4][4][4];
  MonTable() {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) idx[a][b][c] = a + b + c <= 3 ? monomial_index(a, b, c) : -1;
  }
};

const MonTable& mon_table() {
  static const MonTable table;
  return table;
}

Poly poly_mul(const Poly& p, const Poly& q) {
  const MonTable& table = mon_table();
  Poly out;
  for (int i = 0; i < 20; ++i) {
    if (p.c[i] == 0.0) continue;
    for (int j = 0; j < 20; ++j) {
      if (q.c[j] == 0.0) continue;
      const int a = kMonExp[i][0] + kMonExp[j][0];
      const int b = kMonExp[i][1] + kMonExp[j][1];
      const int c = kMonExp[i][2] + kMonExp[j][2];
      const int k = table.idx[a][b][c];
      out.c[k] += p.c[i] * q.c[j];
    }
  }
  return out;
}

Poly poly_add(const Poly& p, const Poly& q) {
  Poly out;
  for (int i = 0; i < 20; ++i) out.c[i] = p.c[i] + q.c[i];
  return out;
}

Poly poly_sub(const Poly& p, const Poly& q) {
  Poly out;
  for (int i = 0; i < 20; ++i) out.c[i] = p.c[i] - q.c[i];
  return out;
}

Poly poly_scale(const Poly& p, double s) {
  Poly out;
  for (int i = 0; i < 20; ++i) out.c[i] = p.c[i] * s;
  return out;
}

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;

Mat3 vec_to_mat(const Vec9& e) {
  Mat3 m;
  m << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  return m;
}

double trace_constraint_residual(const Mat3& e) {
  const Mat3 lhs = 2.0 * e * e.transpose() * e - (e * e.transpose()).trace() * e;
  return lhs.norm();
}

// Depths of a correspondence under [R | t]; standard 2x2 normal equations on
// d2 x2 = d1 R x1 + t with unit bearing vectors.
bool positive_depths(const Mat3& R, const Vec3& t, const Vec3& x1, const Vec3& x2) {
  const Vec3 rx1 = R * x1;
  const double a = -rx1.dot(x2);
  const double b1 = -rx1.dot(t);
  const double b2 = x2.dot(t);
  const double d1 = b1 - a * b2;
  const double d2 = -a * b1 + b2;
  const double scale = 1.0 - a * a;  // positive, preserves signs
  return d1 > 1e-12 * scale && d2 > 1e-12 * scale && scale > 1e-12;
}

std::vector<Mat3> essential_candidates(const std::array<std::pair<Vec2, Vec2>, 5>& corr,
                                       const CameraIntrinsics& K_i, const CameraIntrinsics& K_j) {
  Eigen::Matrix<double, 5, 9> Q;
  for (int m = 0; m < 5; ++m) {
    const Vec3 x1 = K_i.ray(corr[m].first);
    const Vec3 x2 = K_j.ray(corr[m].second);
    Q.row(m) << x2.x() * x1.x(), x2.x() * x1.y(), x2.x(), x2.y() * x1.x(), x2.y() * x1.y(),
        x2.y(), x1.x(), x1.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 5, 9>> svd(Q, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 4> basis = svd.matrixV().rightCols<4>();

  // E(x, y, z) = x B0 + y B1 + z B2 + B3 entrywise as degree-1 polynomials.
  std::array<Poly, 9> e;
  for (int k = 0; k < 9; ++k) {
    e[k].c[16] = basis(k, 0);
    e[k].c[17] = basis(k, 1);
    e[k].c[18] = basis(k, 2);
    e[k].c[19] = basis(k, 3);
  }

  std::array<Poly, 10> equations;
  // det(E) = 0.
  equations[0] = poly_add(
      poly_sub(poly_mul(e[0], poly_sub(poly_mul(e[4], e[8]), poly_mul(e[5], e[7]))),
               poly_mul(e[1], poly_sub(poly_mul(e[3], e[8]), poly_mul(e[5], e[6])))),
      poly_mul(e[2], poly_sub(poly_mul(e[3], e[7]), poly_mul(e[4], e[6]))));
  // 2 E E^T E - trace(E E^T) E = 0.
  Poly eet[3][3];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      Poly acc;
      for (int k = 0; k < 3; ++k) acc = poly_add(acc, poly_mul(e[3 * r + k], e[3 * c + k]));
      eet[r][c] = acc;
    }
  const Poly tr = poly_add(poly_add(eet[0][0], eet[1][1]), eet[2][2]);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      Poly acc;
      for (int k = 0; k < 3; ++k) acc = poly_add(acc, poly_mul(eet[r][k], e[3 * k + c]));
      equations[1 + 3 * r + c] =
          poly_sub(poly_scale(acc, 2.0), poly_mul(tr, e[3 * r + c]));
    }

  Eigen::Matrix<double, 10, 20> A;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 20; ++c) A(r, c) = equations[r].c[c];

  // Gauss-Jordan over the degree-3 block.
  for (int col = 0; col < 10; ++col) {
    int pivot = col;
    double best = std::abs(A(col, col));
    for (int r = col + 1; r < 10; ++r) {
      if (std::abs(A(r, col)) > best) {
        best = std::abs(A(r, col));
        pivot = r;
      }
    }
    if (best < 1e-12) return {};  // degenerate configuration
    if (pivot != col) A.row(pivot).swap(A.row(col));
    A.row(col) /= A(col, col);
    for (int r = 0; r < 10; ++r) {
      if (r == col) continue;
      A.row(r) -= A(r, col) * A.row(col);
    }
  }

  // Multiplication-by-z action over the basis [x2 xy xz y2 yz z2 x y z 1].
  Mat10 action = Mat10::Zero();
  action.row(0) = -A.row(2).tail<10>();  // z * x2 = x2z
  action.row(1) = -A.row(4).tail<10>();  // z * xy = xyz
  action.row(2) = -A.row(5).tail<10>();  // z * xz = xz2
  action.row(3) = -A.row(7).tail<10>();  // z * y2 = y2z
  action.row(4) = -A.row(8).tail<10>();  // z * yz = yz2
  action.row(5) = -A.row(9).tail<10>();  // z * z2 = z3
  action(6, 2) = 1.0;                    // z * x = xz
  action(7, 4) = 1.0;                    // z * y = yz
  action(8, 5) = 1.0;                    // z * z = z2
  action(9, 8) = 1.0;                    // z * 1 = z

  Eigen::EigenSolver<Mat10> eig(action, true);
  if (eig.info() != Eigen::Success) return {};

  std::vector<Mat3> out;
  std::vector<Vec9> kept;
  for (int k = 0; k < 10; ++k) {
    if (std::abs(eig.eigenvalues()(k).imag()) > 1e-6 * (1.0 + std::abs(eig.eigenvalues()(k).real())))
      continue;
    const Eigen::Matrix<std::complex<double>, 10, 1> v = eig.eigenvectors().col(k);
    if (std::abs(v(9)) < 1e-12) continue;
    const double x = (v(6) / v(9)).real();
    const double y = (v(7) / v(9)).real();
    const double z = (v(8) / v(9)).real();
    Vec9 evec = x * basis.col(0) + y * basis.col(1) + z * basis.col(2) + basis.col(3);
    const double n = evec.norm();
    if (n < 1e-12) continue;
    evec /= n;
    const Mat3 E = vec_to_mat(evec);
    // Residual gates: interpolation of the five inputs and the essential
    // matrix trace identity.
    double max_res = 0.0;
    for (int m = 0; m < 5; ++m) {
      const Vec3 x1 = K_i.ray(corr[m].first);
      const Vec3 x2 = K_j.ray(corr[m].second);
      max_res = std::max(max_res, std::abs(x2.dot(E * x1)));
    }
    if (max_res > 1e-6) continue;
    if (trace_constraint_residual(E) > 1e-6) continue;
    bool duplicate = false;
    for (const Vec9& prev : kept) {
      if (std::abs(prev.dot(evec)) > 1.0 - 1e-8) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    kept.push_back(evec);
    out.push_back(E);
  }
  return out;
}

}  // namespace

std::vector<Mat3> five_point_essential(const std::array<std::pair<Vec2, Vec2>, 5>& correspondences,
                                       const CameraIntrinsics& K_i, const CameraIntrinsics& K_j) {
  return essential_candidates(correspondences, K_i, K_j);
}

std::vector<NormalizedPose> five_point(
    const std::array<std::pair<Vec2, Vec2>, 5>& correspondences, const CameraIntrinsics& K_i,
    const CameraIntrinsics& K_j) {
  const std::vector<Mat3> essentials = essential_candidates(correspondences, K_i, K_j);
  std::vector<NormalizedPose> poses;
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  std::array<Vec3, 5> x1, x2;
  for (int m = 0; m < 5; ++m) {
    x1[m] = K_i.ray(correspondences[m].first).normalized();
    x2[m] = K_j.ray(correspondences[m].second).normalized();
  }
  for (const Mat3& E : essentials) {
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU();
    Mat3 V = svd.matrixV();
    if (U.determinant() < 0.0) U = -U;
    if (V.determinant() < 0.0) V = -V;
    const Mat3 rotations[2] = {U * W * V.transpose(), U * W.transpose() * V.transpose()};
    const Vec3 t = U.col(2);
    for (const Mat3& R : rotations) {
      for (const double sign : {1.0, -1.0}) {
        const Vec3 ts = sign * t;
        bool all_front = true;
        for (int m = 0; m < 5 && all_front; ++m)
          all_front = positive_depths(R, ts, x1[m], x2[m]);
        if (all_front) poses.push_back({R, ts});
      }
    }
  }
  return poses;
}

double sampson_sq(const Mat3& F, const Vec2& pixel_i, const Vec2& pixel_j) {
  const Vec3 x1(pixel_i.x(), pixel_i.y(), 1.0);
  const Vec3 x2(pixel_j.x(), pixel_j.y(), 1.0);
  const Vec3 fx1 = F * x1;
  const Vec3 ftx2 = F.transpose() * x2;
  const double c = x2.dot(fx1);
  const double denom = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
  if (denom < 1e-300) return std::numeric_limits<double>::max();
  return c * c / denom;
}

namespace {

struct Hypothesis {
  NormalizedPose pose;
  long inliers = 0;
  int order = 0;
};

bool near_duplicate(const NormalizedPose& a, const NormalizedPose& b) {
  return rotation_angle_deg(a.R, b.R) < 0.5 && direction_angle_deg(a.t_dir, b.t_dir) < 0.5;
}

std::vector<Hypothesis> ransac_frame(const FrameSet& frames, int root, int support,
                                     const PoolParams& params, int extra_rounds) {
  const CorrespondenceMap& corr = frames.corr(root, support);
  const Frame& root_frame = frames.frames[root];
  const Frame& supp_frame = frames.frames[support];

  std::vector<std::pair<Vec2, Vec2>> matches;
  for (int y = 0; y < corr.height; ++y)
    for (int x = 0; x < corr.width; ++x)
      if (corr.confidence_at(x, y) >= params.confidence_min)
        matches.emplace_back(Vec2(x, y), corr.target_at(x, y));
  if (matches.size() < 5)
    throw NumericalError("InsufficientCorrespondences",
                         "frame " + std::to_string(supp_frame.id) + ": only " +
                             std::to_string(matches.size()) + " usable correspondences");

  std::mt19937_64 rng(mix_seed(params.seed, 0xf1fe, static_cast<std::uint64_t>(support)));

  // Fixed scoring subset keeps hypothesis ranking cheap and deterministic.
  std::vector<std::size_t> score_idx(matches.size());
  std::iota(score_idx.begin(), score_idx.end(), 0);
  if (static_cast<int>(score_idx.size()) > params.score_samples) {
    std::shuffle(score_idx.begin(), score_idx.end(), rng);
    score_idx.resize(params.score_samples);
  }

  const Mat3 Ki_inv = root_frame.intrinsics.inverse();
  const Mat3 Kj_inv = supp_frame.intrinsics.inverse();
  const double thresh_sq = params.sampson_px * params.sampson_px;

  std::vector<Hypothesis> hypotheses;
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
  int order = 0;
  const int total_iters = params.ransac_iters * (1 + extra_rounds);
  for (int iter = 0; iter < total_iters; ++iter) {
    std::array<std::size_t, 5> sel;
    for (int s = 0; s < 5;) {
      const std::size_t cand = pick(rng);
      bool repeat = false;
      for (int u = 0; u < s; ++u) repeat |= sel[u] == cand;
      if (!repeat) sel[s++] = cand;
    }
    std::array<std::pair<Vec2, Vec2>, 5> sample;
    for (int s = 0; s < 5; ++s) sample[s] = matches[sel[s]];
    const std::vector<NormalizedPose> poses =
        five_point(sample, root_frame.intrinsics, supp_frame.intrinsics);
    for (const NormalizedPose& pose : poses) {
      const Mat3 E = cross_matrix(pose.t_dir) * pose.R;
      const Mat3 F = Kj_inv.transpose() * E * Ki_inv;
      long inliers = 0;
      for (const std::size_t idx : score_idx) {
        if (sampson_sq(F, matches[idx].first, matches[idx].second) < thresh_sq) ++inliers;
      }
      hypotheses.push_back({pose, inliers, order++});
    }
  }
  return hypotheses;
}

}  // namespace

CandidatePool build_candidate_pool(const FrameSet& frames, const PoolParams& params) {
  CandidatePool pool;
  pool.support_frames = frames.support_indices();
  const std::size_t n_support = pool.support_frames.size();
  pool.poses.resize(n_support);
  pool.scores.resize(n_support);

  std::vector<std::exception_ptr> errors(n_support);
  parallel_for(n_support, [&](std::size_t slot) {
    try {
      const int support = pool.support_frames[slot];
      std::vector<NormalizedPose> kept;
      std::vector<long> kept_scores;
      for (int extra = 0; extra < 4 && static_cast<int>(kept.size()) < params.pool_size; ++extra) {
        std::vector<Hypothesis> hypotheses =
            ransac_frame(frames, frames.root, support, params, extra);
        std::stable_sort(hypotheses.begin(), hypotheses.end(),
                         [](const Hypothesis& a, const Hypothesis& b) {
                           if (a.inliers != b.inliers) return a.inliers > b.inliers;
                           return a.order < b.order;
                         });
        kept.clear();
        kept_scores.clear();
        for (const Hypothesis& h : hypotheses) {
          bool duplicate = false;
          for (const NormalizedPose& k : kept)
            if (near_duplicate(h.pose, k)) {
              duplicate = true;
              break;
            }
          if (duplicate) continue;
          kept.push_back(h.pose);
          kept_scores.push_back(h.inliers);
          if (static_cast<int>(kept.size()) == params.pool_size) break;
        }
        if (static_cast<int>(kept.size()) < params.pool_size) {
          LSFM_LOG_DEBUG("pool frame %d: %zu distinct candidates after round %d", support,
                         kept.size(), extra);
          continue;
        }
      }
      if (static_cast<int>(kept.size()) < params.pool_size) {
        // Backfill with best duplicates; flagged, keeps the pool shape fixed.
        LSFM_LOG_WARN("pool frame %d: only %zu distinct candidates for K=%d, padding", support,
                      kept.size(), params.pool_size);
        std::vector<Hypothesis> hypotheses =
            ransac_frame(frames, frames.root, support, params, 0);
        std::stable_sort(hypotheses.begin(), hypotheses.end(),
                         [](const Hypothesis& a, const Hypothesis& b) {
                           if (a.inliers != b.inliers) return a.inliers > b.inliers;
                           return a.order < b.order;
                         });
        for (const Hypothesis& h : hypotheses) {
          if (static_cast<int>(kept.size()) == params.pool_size) break;
          kept.push_back(h.pose);
          kept_scores.push_back(h.inliers);
        }
        if (static_cast<int>(kept.size()) < params.pool_size)
          throw NumericalError("PoolUnderflow",
                               "frame " + std::to_string(support) + ": cannot fill pool");
      }
      pool.poses[slot] = std::move(kept);
      pool.scores[slot] = std::move(kept_scores);
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  });
  for (const std::exception_ptr& err : errors)
    if (err) std::rethrow_exception(err);
  return pool;
}

}  // namespace lsfm
