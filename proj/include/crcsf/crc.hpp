#pragma once

#include <span>
#include <vector>

namespace crcsf {

struct CrcConfig {
  double alpha = 0.01;     // risk level, (0,1)
  double gamma = 0.99;     // confidence miss level, (0,1)
  double beta = 0.0;       // total-variation allowance, >= 0
  double rho = 0.999;      // geometric weight decay, (0,1)
  double loss_bound = 0.0; // B; <= 0 means derive from calibration data
};

struct CalibrationSample {
  double error = 0.0;  // |b_true - b_pred|, >= 0
  int k = 0;           // timestep the pair was recorded at
};

/// L(lambda) = max(0, error - lambda).
double crc_loss(double error, double lambda);

struct GeometricWeights {
  std::vector<double> w;  // w_i = rho^(n+1-i), most recent (last) heaviest
  double total = 0.0;     // n_w
};

GeometricWeights geometric_weights(int n, double rho);

struct LambdaResult {
  double lambda = 0.0;
  /// Set when even lambda = max error cannot bring the risk below alpha
  /// because the irreducible B/(n_w+1) term alone exceeds it; lambda is then
  /// the loss bound.
  bool alpha_unattainable = false;
};

/// Weighted empirical risk r(lambda) = sum_i w_i L_i(lambda)/(n_w+1) +
/// B/(n_w+1); weights are assigned in sample order (ascending k expected).
double empirical_risk(std::span<const CalibrationSample> samples, double lambda,
                      const CrcConfig& cfg);

/// Exact infimum of {lambda >= 0 : r(lambda) <= alpha} by piecewise-linear
/// inversion over the sorted error breakpoints. Requires cfg.loss_bound > 0.
LambdaResult optimal_lambda(std::span<const CalibrationSample> samples, const CrcConfig& cfg);

/// Markov correction eps = (alpha + beta) / gamma.
double epsilon(const CrcConfig& cfg);

}  // namespace crcsf
