#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "crcsf/calibration.hpp"

namespace crcsf {

struct MarginHyperparams {
  std::string kind = "mlp";  // "mlp" or "table"
  double learning_rate = 1e-2;
  int epochs = 2000;
  std::uint64_t seed = 0;
  int k_bins = 16;
  int dist_bins = 16;
};

struct TrainReport {
  double train_mse = 0.0;
  double validation_mse = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
};

/// Context-to-margin regressor: a small feedforward network (11-32-32-1,
/// tanh) or a (timestep, distance) lookup table of bin means. Predictions
/// are clamped to [0, lambda_max].
struct MarginModel {
  int version = 1;
  std::string kind = "mlp";
  std::string config_hash;

  Eigen::Matrix<double, 11, 1> feat_mean = Eigen::Matrix<double, 11, 1>::Zero();
  Eigen::Matrix<double, 11, 1> feat_scale = Eigen::Matrix<double, 11, 1>::Ones();
  double lambda_max = 0.0;

  // mlp parameters
  Eigen::MatrixXd w1, w2;  // 32x11, 32x32
  Eigen::VectorXd b1, b2;  // 32
  Eigen::VectorXd w3;      // 32
  double b3 = 0.0;

  // table parameters
  int k_bins = 0, dist_bins = 0;
  double k_lo = 0.0, k_hi = 1.0, d_lo = 0.0, d_hi = 1.0;
  Eigen::MatrixXd bin_mean;  // k_bins x dist_bins
  Eigen::MatrixXi bin_count;
  double global_mean = 0.0;
};

/// Deterministic given (rows, hyperparams): full-batch gradient descent for
/// the mlp, per-bin empirical means for the table. Rows are split 90/10 into
/// train/validation by batch id (the highest batch ids validate); throws
/// when fewer than two batches are present.
std::pair<MarginModel, TrainReport> train_margin_model(const std::vector<TrainingRow>& rows,
                                                       const MarginHyperparams& hp);

double predict(const MarginModel& m, const FeatureVector& phi);

std::string margin_model_to_json(const MarginModel& m);
MarginModel margin_model_from_json(const std::string& text);

}  // namespace crcsf
