#include "localsfm/hough.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "localsfm/log.hpp"
#include "localsfm/parallel.hpp"

namespace lsfm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 any_orthogonal(const Vec3& v) {
  Vec3 axis = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(axis).normalized();
}

}  // namespace

PairGeometry PairGeometry::make(const NormalizedPose* pose_i, const NormalizedPose* pose_j,
                                const CameraIntrinsics& K_i, const CameraIntrinsics& K_j) {
  PairGeometry pair;
  pair.intr_i = K_i;
  pair.intr_j = K_j;
  const Mat3 R_i = pose_i != nullptr ? pose_i->R : Mat3::Identity();
  const Mat3 R_j = pose_j != nullptr ? pose_j->R : Mat3::Identity();
  pair.R_rel = R_j * R_i.transpose();
  pair.has_ti = pose_i != nullptr;
  pair.has_tj = pose_j != nullptr;
  if (pair.has_ti) pair.u_dir = -(pair.R_rel * pose_i->t_dir);
  if (pair.has_tj) pair.v_dir = pose_j->t_dir;
  if (pair.has_ti && pair.has_tj) {
    pair.theta_max = std::acos(std::clamp(pair.u_dir.dot(pair.v_dir), -1.0, 1.0));
  }
  pair.M = K_j.matrix() * pair.R_rel * K_i.inverse();
  pair.K_j = K_j.matrix();
  return pair;
}

Vec3 PairGeometry::direction_at(double y) const {
  if (single_row() || !has_ti || !has_tj) return has_tj ? v_dir : u_dir;
  const double sin_total = std::sin(theta_max);
  if (sin_total < 1e-9) {
    // Antipodal limits: the arc plane is ambiguous, pick a stable one.
    const Vec3 w = any_orthogonal(v_dir);
    return std::cos(y) * v_dir + std::sin(y) * w;
  }
  const double yc = std::clamp(y, 0.0, theta_max);
  return (std::sin(theta_max - yc) * v_dir + std::sin(yc) * u_dir) / sin_total;
}

bool PairGeometry::map_to_hough(double s_i, double s_j, double r_i, HoughCoordinates* out) const {
  Vec3 w = Vec3::Zero();
  if (has_ti) w += s_i * u_dir;
  if (has_tj) w += s_j * v_dir;
  const double s_ij = w.norm();
  if (s_ij < kDegenerateTranslation) return false;
  out->x = s_ij / (has_ti ? r_i : 1.0);
  if (single_row()) {
    out->y = 0.0;
  } else {
    out->y = std::acos(std::clamp(w.dot(v_dir) / s_ij, -1.0, 1.0));
  }
  return true;
}

PixelBounds pixel_bounds(const Vec3& A, const Vec3& B, const Vec2& center, double lambda) {
  PixelBounds out;
  const double a = A.z();
  const double b = B.z();
  const double a2x = A.x() - center.x() * a;
  const double a2y = A.y() - center.y() * a;
  const double b2x = B.x() - center.x() * b;
  const double b2y = B.y() - center.y() * b;
  const double l2 = lambda * lambda;

  const double alpha = b2x * b2x + b2y * b2y - l2 * b * b;
  const double beta = 2.0 * (a2x * b2x + a2y * b2y - l2 * a * b);
  const double gamma = a2x * a2x + a2y * a2y - l2 * a * a;

  // Positive projected depth a + b x > 0, intersected with x >= 0.
  double feas_lo = 0.0;
  double feas_hi = kInf;
  if (b > 1e-15) {
    feas_lo = std::max(0.0, -a / b);
  } else if (b < -1e-15) {
    feas_hi = -a / b;
    if (feas_hi <= 0.0) return out;
  } else if (a <= 0.0) {
    return out;
  }

  double cand_lo[2] = {0.0, 0.0};
  double cand_hi[2] = {0.0, 0.0};
  int n_cand = 0;

  const double alpha_scale = b2x * b2x + b2y * b2y + l2 * b * b;
  if (std::abs(alpha) <= 1e-12 * alpha_scale) {
    if (std::abs(beta) <= 1e-300) {
      if (gamma > 0.0) return out;
      cand_lo[0] = -kInf;
      cand_hi[0] = kInf;
      n_cand = 1;
    } else if (beta > 0.0) {
      cand_lo[0] = -kInf;
      cand_hi[0] = -gamma / beta;
      n_cand = 1;
    } else {
      cand_lo[0] = -gamma / beta;
      cand_hi[0] = kInf;
      n_cand = 1;
    }
  } else {
    const double disc = beta * beta - 4.0 * alpha * gamma;
    if (disc < 0.0) {
      if (alpha > 0.0) return out;  // line misses the circle on the feasible side
      cand_lo[0] = -kInf;
      cand_hi[0] = kInf;
      n_cand = 1;
    } else {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (beta + std::copysign(sq, beta));
      double r1, r2;
      if (q != 0.0) {
        r1 = q / alpha;
        r2 = gamma / q;
      } else {
        r1 = r2 = -beta / (2.0 * alpha);
      }
      if (r1 > r2) std::swap(r1, r2);
      if (alpha > 0.0) {
        cand_lo[0] = r1;
        cand_hi[0] = r2;
        n_cand = 1;
      } else {
        // Epipole inside the circle: the inlier set opens toward infinity.
        cand_lo[0] = -kInf;
        cand_hi[0] = r1;
        cand_lo[1] = r2;
        cand_hi[1] = kInf;
        n_cand = 2;
      }
    }
  }

  bool found = false;
  double lo = kInf;
  double hi = -kInf;
  for (int k = 0; k < n_cand; ++k) {
    const double clo = std::max(cand_lo[k], feas_lo);
    const double chi = std::min(cand_hi[k], feas_hi);
    if (clo <= chi) {
      found = true;
      lo = std::min(lo, clo);
      hi = std::max(hi, chi);
    }
  }
  if (!found) return out;
  out.lo = lo;
  out.hi = hi;
  out.valid = true;
  return out;
}

PixelBounds pixel_bounds(const PairGeometry& pair, const Vec3& t_dir, const Vec2& pixel_i,
                         double depth_i, const Vec2& target, double lambda) {
  const Vec3 A = depth_i * (pair.M * Vec3(pixel_i.x(), pixel_i.y(), 1.0));
  const Vec3 B = pair.K_j * t_dir;
  return pixel_bounds(A, B, target, lambda);
}

double HoughMatrix::index_nearest(double x, double y) const {
  const double dx = x_max / x_bins;
  int ix = static_cast<int>(std::floor(x / dx));
  ix = std::clamp(ix, 0, x_bins - 1);
  int iy = 0;
  if (theta_max > kSingleRowTheta) {
    const double dy = theta_max / y_bins;
    iy = std::clamp(static_cast<int>(std::floor(y / dy)), 0, y_bins - 1);
  }
  return static_cast<double>(at(iy, ix));
}

namespace {

// Bilinear over bin centers with clamped borders; optional gradient.
template <typename T>
double grid_bilinear(const std::vector<T>& grid, int y_bins, int x_bins, double u, double v,
                     double* du, double* dv) {
  u = std::clamp(u, 0.0, static_cast<double>(x_bins - 1));
  v = std::clamp(v, 0.0, static_cast<double>(y_bins - 1));
  const int x0 = std::min(static_cast<int>(u), x_bins - 2 >= 0 ? x_bins - 2 : 0);
  const int y0 = std::min(static_cast<int>(v), y_bins - 2 >= 0 ? y_bins - 2 : 0);
  const int x1 = std::min(x0 + 1, x_bins - 1);
  const int y1 = std::min(y0 + 1, y_bins - 1);
  const double fu = u - x0;
  const double fv = v - y0;
  const double v00 = static_cast<double>(grid[static_cast<std::size_t>(y0) * x_bins + x0]);
  const double v10 = static_cast<double>(grid[static_cast<std::size_t>(y0) * x_bins + x1]);
  const double v01 = static_cast<double>(grid[static_cast<std::size_t>(y1) * x_bins + x0]);
  const double v11 = static_cast<double>(grid[static_cast<std::size_t>(y1) * x_bins + x1]);
  if (du != nullptr) *du = (1.0 - fv) * (v10 - v00) + fv * (v11 - v01);
  if (dv != nullptr) *dv = (1.0 - fu) * (v01 - v00) + fu * (v11 - v10);
  return (1.0 - fv) * ((1.0 - fu) * v00 + fu * v10) + fv * ((1.0 - fu) * v01 + fu * v11);
}

}  // namespace

double HoughMatrix::index_bilinear(double x, double y) const {
  const double u = x / (x_max / x_bins) - 0.5;
  double v = 0.0;
  if (theta_max > kSingleRowTheta) v = y / (theta_max / y_bins) - 0.5;
  if (active_rows() == 1) {
    // Clamp to the populated row; vertical interpolation would leak zeros.
    double du = 0.0;
    const double val = grid_bilinear(grid, 1, x_bins, u, 0.0, &du, nullptr);
    return val;
  }
  return grid_bilinear(grid, y_bins, x_bins, u, v, nullptr, nullptr);
}

HoughMatrix::SmoothSample HoughMatrix::smooth_sample(double x, double y) const {
  SmoothSample out;
  const double dx_bin = x_max / x_bins;
  const double u = x / dx_bin - 0.5;
  double du = 0.0, dv = 0.0;
  const bool use_smooth = !smooth.empty();
  if (active_rows() == 1) {
    out.value = use_smooth ? grid_bilinear(smooth, 1, x_bins, u, 0.0, &du, nullptr)
                           : grid_bilinear(grid, 1, x_bins, u, 0.0, &du, nullptr);
  } else {
    const double dy_bin = theta_max / y_bins;
    const double v = y / dy_bin - 0.5;
    out.value = use_smooth ? grid_bilinear(smooth, y_bins, x_bins, u, v, &du, &dv)
                           : grid_bilinear(grid, y_bins, x_bins, u, v, &du, &dv);
    out.ddy = dv / dy_bin;
  }
  out.ddx = du / dx_bin;
  return out;
}

double index_score(const HoughMatrix& h, const HoughCoordinates& coords, IndexMode mode) {
  if (mode == IndexMode::kNearest) return h.index_nearest(coords.x, coords.y);
  return h.index_bilinear(coords.x, coords.y);
}

namespace {

void blur_grid(HoughMatrix& h) {
  const int rows = h.active_rows();
  const int cols = h.x_bins;
  h.smooth.assign(h.grid.size(), 0.0f);
  // 3x3 box blur (1D over single-row matrices), replicated borders.
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, rows - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, cols - 1);
          acc += h.at(yy, xx);
          ++n;
        }
      }
      h.smooth[static_cast<std::size_t>(y) * cols + x] = static_cast<float>(acc / n);
    }
  }
}

struct RowPaintSpan {
  int lo = 0;
  int hi = -1;
};

// Columns whose centers fall in [lo, hi]; intervals past x_max clamp into the
// last bin so that clamped nearest reads stay consistent.
RowPaintSpan span_for_interval(double lo, double hi, double dx, int x_bins, double x_max,
                               bool* saturated) {
  RowPaintSpan span;
  if (hi > x_max) {
    *saturated = true;
    if (lo > x_max) {
      span.lo = span.hi = x_bins - 1;
      return span;
    }
    hi = x_max;
  }
  span.lo = std::max(0, static_cast<int>(std::ceil(lo / dx - 0.5)));
  span.hi = std::min(x_bins - 1, static_cast<int>(std::floor(hi / dx - 0.5)));
  return span;
}

}  // namespace

HoughMatrix build_hough_matrix(const PairGeometry& pair, const PairSamples& samples,
                               const HoughBuildParams& params) {
  if (samples.size() == 0) throw std::invalid_argument("build_hough_matrix: no samples");
  if (!pair.has_ti && !pair.has_tj)
    throw std::invalid_argument("build_hough_matrix: degenerate pair without translation");

  HoughMatrix h;
  h.y_bins = params.y_bins;
  h.x_bins = params.x_bins;
  h.x_max = params.x_max;
  h.theta_max = pair.single_row() ? 0.0 : pair.theta_max;
  h.pixel_count = static_cast<int>(samples.size());
  h.grid.assign(static_cast<std::size_t>(params.y_bins) * params.x_bins, 0);

  const int rows = h.active_rows();
  const double dy = rows > 1 ? h.theta_max / rows : 0.0;
  const double dx = h.x_max / h.x_bins;

  std::vector<Vec3> row_b(rows);
  for (int r = 0; r < rows; ++r) {
    row_b[r] = pair.K_j * pair.direction_at((r + 0.5) * dy);
  }

  const std::size_t count = samples.size();
  const int workers = worker_count(count);
  std::vector<std::vector<std::uint32_t>> partial(workers);
  std::vector<long> partial_sat(workers, 0);

  parallel_chunks(count, [&](std::size_t begin, std::size_t end, int w) {
    std::vector<std::uint32_t>& grid = partial[w];
    grid.assign(h.grid.size(), 0);
    long sat = 0;
    for (std::size_t m = begin; m < end; ++m) {
      const Vec3 A = samples.depth[m] *
                     (pair.M * Vec3(samples.pixel[m].x(), samples.pixel[m].y(), 1.0));
      const Vec2& c = samples.target[m];
      for (int r = 0; r < rows; ++r) {
        const PixelBounds bounds = pixel_bounds(A, row_b[r], c, params.lambda);
        if (!bounds.valid) continue;
        bool saturated = false;
        const RowPaintSpan span =
            span_for_interval(bounds.lo, bounds.hi, dx, h.x_bins, h.x_max, &saturated);
        if (saturated) ++sat;
        if (span.lo > span.hi) continue;
        std::uint32_t* row_ptr = grid.data() + static_cast<std::size_t>(r) * h.x_bins;
        for (int ix = span.lo; ix <= span.hi; ++ix) ++row_ptr[ix];
      }
    }
    partial_sat[w] = sat;
  });

  for (int w = 0; w < workers; ++w) {
    if (partial[w].empty()) continue;
    for (std::size_t k = 0; k < h.grid.size(); ++k) h.grid[k] += partial[w][k];
    h.saturated += partial_sat[w];
  }

  if (params.build_smooth) blur_grid(h);
  return h;
}

HoughMatrix build_hough_matrix_3d(const PairGeometry& pair, const PairSamples& samples,
                                  const HoughBuildParams& params) {
  if (samples.size() == 0) throw std::invalid_argument("build_hough_matrix_3d: no samples");
  if (!pair.has_ti && !pair.has_tj)
    throw std::invalid_argument("build_hough_matrix_3d: degenerate pair without translation");

  HoughMatrix h;
  h.y_bins = params.y_bins;
  h.x_bins = params.x_bins;
  h.x_max = params.x_max;
  h.theta_max = pair.single_row() ? 0.0 : pair.theta_max;
  h.pixel_count = static_cast<int>(samples.size());
  h.grid.assign(static_cast<std::size_t>(params.y_bins) * params.x_bins, 0);

  const int rows = h.active_rows();
  const double dy = rows > 1 ? h.theta_max / rows : 0.0;
  const double dx = h.x_max / h.x_bins;

  std::vector<Vec3> row_dir(rows);
  for (int r = 0; r < rows; ++r) row_dir[r] = pair.direction_at((r + 0.5) * dy);

  const Mat3 Ki_inv = pair.intr_i.inverse();
  const Mat3 Kj_inv = pair.intr_j.inverse();

  const std::size_t count = samples.size();
  const int workers = worker_count(count);
  std::vector<std::vector<std::uint32_t>> partial(workers);
  std::vector<long> partial_sat(workers, 0);

  parallel_chunks(count, [&](std::size_t begin, std::size_t end, int w) {
    std::vector<std::uint32_t>& grid = partial[w];
    grid.assign(h.grid.size(), 0);
    long sat = 0;
    for (std::size_t m = begin; m < end; ++m) {
      if (samples.target_depth[m] <= 0.0) continue;
      // Backprojected source point in frame-j coordinates at zero translation,
      // and the sphere around the target backprojection.
      const Vec3 origin =
          samples.depth[m] *
          (pair.R_rel * (Ki_inv * Vec3(samples.pixel[m].x(), samples.pixel[m].y(), 1.0)));
      const Vec3 center =
          samples.target_depth[m] * (Kj_inv * Vec3(samples.target[m].x(), samples.target[m].y(), 1.0));
      for (int r = 0; r < rows; ++r) {
        const SphereSegment seg = line_sphere_intersect(origin, row_dir[r], center, params.lambda);
        if (!seg.valid) continue;
        const double lo = (seg.p_start - origin).dot(row_dir[r]);
        const double hi = (seg.p_end - origin).dot(row_dir[r]);
        if (hi < 0.0) continue;
        bool saturated = false;
        const RowPaintSpan span =
            span_for_interval(std::max(0.0, lo), hi, dx, h.x_bins, h.x_max, &saturated);
        if (saturated) ++sat;
        if (span.lo > span.hi) continue;
        std::uint32_t* row_ptr = grid.data() + static_cast<std::size_t>(r) * h.x_bins;
        for (int ix = span.lo; ix <= span.hi; ++ix) ++row_ptr[ix];
      }
    }
    partial_sat[w] = sat;
  });

  for (int w = 0; w < workers; ++w) {
    if (partial[w].empty()) continue;
    for (std::size_t k = 0; k < h.grid.size(); ++k) h.grid[k] += partial[w][k];
    h.saturated += partial_sat[w];
  }

  if (params.build_smooth) blur_grid(h);
  return h;
}

void write_hough_debug(const HoughMatrix& h, const std::string& path_prefix) {
  {
    std::ofstream pgm(path_prefix + ".pgm", std::ios::binary);
    if (!pgm) throw std::runtime_error("write_hough_debug: cannot open " + path_prefix + ".pgm");
    pgm << "P5\n" << h.x_bins << " " << h.y_bins << "\n65535\n";
    for (int y = 0; y < h.y_bins; ++y) {
      for (int x = 0; x < h.x_bins; ++x) {
        const std::uint32_t v = std::min<std::uint32_t>(h.at(y, x), 65535u);
        const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8),
                                        static_cast<unsigned char>(v & 0xff)};
        pgm.write(reinterpret_cast<const char*>(bytes), 2);
      }
    }
  }
  nlohmann::json meta;
  meta["x_max"] = h.x_max;
  meta["theta_max"] = h.theta_max;
  meta["samples"] = h.pixel_count;
  meta["x_bins"] = h.x_bins;
  meta["y_bins"] = h.y_bins;
  meta["saturated"] = h.saturated;
  meta["frame_i"] = h.frame_i;
  meta["frame_j"] = h.frame_j;
  std::ofstream js(path_prefix + ".json");
  js << meta.dump(2) << "\n";
}

}  // namespace lsfm
