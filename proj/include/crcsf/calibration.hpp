#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crcsf/barrier.hpp"
#include "crcsf/crc.hpp"
#include "crcsf/human_policy.hpp"

namespace crcsf {

/// Builds per-episode scenario instances from a seed.
struct ScenarioFactory {
  std::string kind = "head_on";  // "head_on" or "crowd"
  int preset = 1;                // crowd preset 1..5
  int n_humans = 1;
  HeadOnParams head_on;
  CrowdParams crowd;
  DynamicsConfig dynamics;
  BarrierSpec barrier;
  double goal_radius = 0.5;

  Scenario make(std::uint64_t seed) const;
};

/// phi = (robot state, nearest-human state, distance, predicted certificate,
/// timestep).
using FeatureVector = Eigen::Matrix<double, 11, 1>;

FeatureVector extract_features(const JointState& x, int nearest_index,
                               double predicted_certificate, int k);

/// Index of the human closest to the robot (ties by index).
int nearest_human(const JointState& x);

struct CalibrationConfig {
  int total_trajectories = 400;  // M
  int per_batch = 100;           // K, must divide M
  std::uint64_t seed = 1;
};

struct TrainingRow {
  FeatureVector phi;
  double lambda = 0.0;
  int batch = 0;
  int k = 0;
};

/// Raised when more than 0.5% of calibration errors exceed the loss bound.
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationOutput {
  /// K feature rows per (batch, k), each labeled with that batch's lambda.
  std::vector<TrainingRow> rows;
  /// Certificate pairs indexed [batch][trajectory][k].
  std::vector<std::vector<std::vector<CertificatePair>>> pairs;
  /// Lambda results indexed [batch][k].
  std::vector<std::vector<LambdaResult>> per_bk;
  double loss_bound_used = 0.0;
  std::size_t clamped_count = 0;
  std::size_t total_samples = 0;
  int horizon = 0;
};

/// Algorithm: simulate M trajectories in batches of K under the robust
/// filter planning against one sampled human action per step while the
/// environment advances with the realized action; per (batch, k) pool all
/// certificate pairs with timestep >= k ordered by (timestep, trajectory),
/// weight geometrically and invert for the optimal margin.
CalibrationOutput run_calibration(const ScenarioFactory& factory, const CalibrationConfig& cal,
                                  const CrcConfig& crc, const LipschitzBundle& bundle,
                                  int jobs = 0);

/// Margin from pooling every recorded pair across batches over the entire
/// horizon (k = 0 pooling), ordered by (timestep, batch, trajectory).
LambdaResult fixed_lambda(const CalibrationOutput& out, const CrcConfig& crc);

}  // namespace crcsf
