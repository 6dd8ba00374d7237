#include "crcsf/crc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crcsf {

double crc_loss(double error, double lambda) { return std::max(0.0, error - lambda); }

GeometricWeights geometric_weights(int n, double rho) {
  if (n < 1) throw std::invalid_argument("geometric_weights: n must be >= 1");
  if (!(rho > 0.0) || !(rho < 1.0)) throw std::invalid_argument("geometric_weights: rho in (0,1)");
  GeometricWeights out;
  out.w.resize(static_cast<std::size_t>(n));
  // fill back to front so w_n = rho exactly and earlier weights decay
  double v = rho;
  for (int i = n - 1; i >= 0; --i) {
    out.w[static_cast<std::size_t>(i)] = v;
    v *= rho;
  }
  out.total = std::accumulate(out.w.begin(), out.w.end(), 0.0);
  return out;
}

double empirical_risk(std::span<const CalibrationSample> samples, double lambda,
                      const CrcConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("empirical_risk: samples must be non-empty");
  if (!(cfg.loss_bound > 0.0)) throw std::invalid_argument("empirical_risk: loss_bound must be > 0");
  const GeometricWeights gw = geometric_weights(static_cast<int>(samples.size()), cfg.rho);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double err = std::min(samples[i].error, cfg.loss_bound);
    acc += gw.w[i] * crc_loss(err, lambda);
  }
  return (acc + cfg.loss_bound) / (gw.total + 1.0);
}

LambdaResult optimal_lambda(std::span<const CalibrationSample> samples, const CrcConfig& cfg) {
  if (samples.empty()) throw std::invalid_argument("optimal_lambda: samples must be non-empty");
  if (!(cfg.loss_bound > 0.0)) throw std::invalid_argument("optimal_lambda: loss_bound must be > 0");
  const std::size_t n = samples.size();
  const GeometricWeights gw = geometric_weights(static_cast<int>(n), cfg.rho);
  const double denom = gw.total + 1.0;
  const double floor = cfg.loss_bound / denom;
  if (floor > cfg.alpha) return {cfg.loss_bound, true};

  // (error, weight) sorted by error ascending
  std::vector<std::pair<double, double>> ew(n);
  for (std::size_t i = 0; i < n; ++i) {
    ew[i] = {std::min(samples[i].error, cfg.loss_bound), gw.w[i]};
  }
  std::sort(ew.begin(), ew.end());
  // suffix weight and weighted-error sums: suffix_w[i] = sum_{j>=i} w_j
  std::vector<double> suffix_w(n + 1, 0.0), suffix_we(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    suffix_w[i] = suffix_w[i + 1] + ew[i].second;
    suffix_we[i] = suffix_we[i + 1] + ew[i].second * ew[i].first;
  }
  auto risk_at = [&](std::size_t i, double lambda) {
    // risk at lambda in [ew[i-1], ew[i]) using suffix aggregates of errors > lambda
    return (suffix_we[i] - lambda * suffix_w[i] + cfg.loss_bound) / denom;
  };
  const double r0 = risk_at(0, 0.0);
  if (r0 <= cfg.alpha) return {0.0, false};

  double lam_prev = 0.0;
  double r_prev = r0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lam_i = ew[i].first;
    const double r_i = risk_at(i, lam_i);
    if (r_i <= cfg.alpha) {
      // crossing inside (lam_prev, lam_i]; slope magnitude suffix_w[i]/denom
      const double lambda = lam_prev + (r_prev - cfg.alpha) * denom / suffix_w[i];
      return {std::min(lambda, lam_i), false};
    }
    lam_prev = lam_i;
    r_prev = r_i;
  }
  // r(max error) = floor <= alpha was handled by the scan; reaching here means
  // floor > alpha up to roundoff
  return {cfg.loss_bound, true};
}

double epsilon(const CrcConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("epsilon: gamma must be > 0");
  return (cfg.alpha + cfg.beta) / cfg.gamma;
}

}  // namespace crcsf
