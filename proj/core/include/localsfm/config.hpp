#pragma once

#include <cstdint>
#include <string>

namespace lsfm {

struct PipelineConfig {
  // Candidate pool
  int pool_size = 128;              // K normalized poses per support frame
  int ransac_iters = 2000;
  double sampson_threshold = 2.0;   // px, two-view ranking
  int ransac_score_samples = 2000;  // correspondences used to rank hypotheses
  double confidence_min = 0.2;

  // Scoring / Hough accumulator
  int samples_per_pair = 10000;     // M
  double lambda_2d = 2.0;           // px
  double lambda_3d = 0.025;         // m
  int hough_y_bins = 100;
  int hough_x_bins = 200;
  double x_max = 1.0;               // m

  // Bundle-adjustment consensus
  int ba_iters = 200;               // T
  double ba_lr = 5e-4;
  bool ba_smooth_reads = true;      // read a box-blurred copy inside BA
  int epoch_cap = 50;

  // Frustum radiance field
  int rf_rows = 240;
  int rf_cols = 320;
  int rf_depth_bins = 128;
  int rf_iters = 80000;
  double rf_lr = 1e-4;
  int rf_batch = 512;
  double ld_weight = 0.01;
  double min_opacity = 0.1;

  // Geometric verification
  double lambda_c = 0.01;           // m
  int n_consistent = 2;

  int threads = 0;                  // 0 = hardware default
  std::uint64_t seed = 0;

  // Small-grid preset for fast runs.
  void apply_desk_scale() {
    rf_rows = 60;
    rf_cols = 80;
    rf_depth_bins = 32;
    rf_iters = 4000;
  }

  void validate() const;
};

// Parses a JSON object with any subset of the config keys over `base`.
PipelineConfig load_config_overlay(const std::string& path, const PipelineConfig& base);
std::string config_to_json(const PipelineConfig& config);

}  // namespace lsfm
