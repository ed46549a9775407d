#include "localsfm/config.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "localsfm/errors.hpp"

namespace lsfm {

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw InputError("BadConfig", std::string(name) + " must be positive");
  };
  positive(pool_size, "pool_size");
  positive(ransac_iters, "ransac_iters");
  positive(sampson_threshold, "sampson_threshold");
  positive(samples_per_pair, "samples_per_pair");
  positive(lambda_2d, "lambda_2d");
  positive(lambda_3d, "lambda_3d");
  positive(hough_y_bins, "hough_y_bins");
  positive(hough_x_bins, "hough_x_bins");
  positive(x_max, "x_max");
  positive(ba_iters, "ba_iters");
  positive(ba_lr, "ba_lr");
  positive(epoch_cap, "epoch_cap");
  positive(rf_rows, "rf_rows");
  positive(rf_cols, "rf_cols");
  positive(rf_depth_bins, "rf_depth_bins");
  positive(rf_iters, "rf_iters");
  positive(rf_lr, "rf_lr");
  positive(rf_batch, "rf_batch");
  positive(lambda_c, "lambda_c");
  positive(n_consistent, "n_consistent");
  if (confidence_min < 0.0 || confidence_min > 1.0)
    throw InputError("BadConfig", "confidence_min must be in [0,1]");
  if (ld_weight < 0.0) throw InputError("BadConfig", "ld_weight must be non-negative");
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig load_config_overlay(const std::string& path, const PipelineConfig& base) {
  std::ifstream in(path);
  if (!in) throw InputError("MissingFile", "config file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("MalformedHeader", "config parse error: " + std::string(e.what()));
  }
  PipelineConfig cfg = base;
  maybe(j, "pool_size", &cfg.pool_size);
  maybe(j, "ransac_iters", &cfg.ransac_iters);
  maybe(j, "sampson_threshold", &cfg.sampson_threshold);
  maybe(j, "ransac_score_samples", &cfg.ransac_score_samples);
  maybe(j, "confidence_min", &cfg.confidence_min);
  maybe(j, "samples_per_pair", &cfg.samples_per_pair);
  maybe(j, "lambda_2d", &cfg.lambda_2d);
  maybe(j, "lambda_3d", &cfg.lambda_3d);
  maybe(j, "hough_y_bins", &cfg.hough_y_bins);
  maybe(j, "hough_x_bins", &cfg.hough_x_bins);
  maybe(j, "x_max", &cfg.x_max);
  maybe(j, "ba_iters", &cfg.ba_iters);
  maybe(j, "ba_lr", &cfg.ba_lr);
  maybe(j, "ba_smooth_reads", &cfg.ba_smooth_reads);
  maybe(j, "epoch_cap", &cfg.epoch_cap);
  maybe(j, "rf_rows", &cfg.rf_rows);
  maybe(j, "rf_cols", &cfg.rf_cols);
  maybe(j, "rf_depth_bins", &cfg.rf_depth_bins);
  maybe(j, "rf_iters", &cfg.rf_iters);
  maybe(j, "rf_lr", &cfg.rf_lr);
  maybe(j, "rf_batch", &cfg.rf_batch);
  maybe(j, "ld_weight", &cfg.ld_weight);
  maybe(j, "min_opacity", &cfg.min_opacity);
  maybe(j, "lambda_c", &cfg.lambda_c);
  maybe(j, "n_consistent", &cfg.n_consistent);
  maybe(j, "threads", &cfg.threads);
  maybe(j, "seed", &cfg.seed);
  cfg.validate();
  return cfg;
}

std::string config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["pool_size"] = c.pool_size;
  j["ransac_iters"] = c.ransac_iters;
  j["sampson_threshold"] = c.sampson_threshold;
  j["ransac_score_samples"] = c.ransac_score_samples;
  j["confidence_min"] = c.confidence_min;
  j["samples_per_pair"] = c.samples_per_pair;
  j["lambda_2d"] = c.lambda_2d;
  j["lambda_3d"] = c.lambda_3d;
  j["hough_y_bins"] = c.hough_y_bins;
  j["hough_x_bins"] = c.hough_x_bins;
  j["x_max"] = c.x_max;
  j["ba_iters"] = c.ba_iters;
  j["ba_lr"] = c.ba_lr;
  j["ba_smooth_reads"] = c.ba_smooth_reads;
  j["epoch_cap"] = c.epoch_cap;
  j["rf_rows"] = c.rf_rows;
  j["rf_cols"] = c.rf_cols;
  j["rf_depth_bins"] = c.rf_depth_bins;
  j["rf_iters"] = c.rf_iters;
  j["rf_lr"] = c.rf_lr;
  j["rf_batch"] = c.rf_batch;
  j["ld_weight"] = c.ld_weight;
  j["min_opacity"] = c.min_opacity;
  j["lambda_c"] = c.lambda_c;
  j["n_consistent"] = c.n_consistent;
  j["threads"] = c.threads;
  j["seed"] = c.seed;
  return j.dump(2);
}

}  // namespace lsfm
