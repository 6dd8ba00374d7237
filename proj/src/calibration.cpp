#include "crcsf/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "crcsf/io.hpp"
#include "crcsf/qp.hpp"

namespace crcsf {

Scenario ScenarioFactory::make(std::uint64_t seed) const {
  Scenario sc;
  if (kind == "head_on") {
    sc = head_on_scenario(seed, head_on, dynamics, barrier);
  } else if (kind == "crowd") {
    sc = crowd_scenario(preset, n_humans, seed, crowd, dynamics, barrier);
  } else {
    throw std::invalid_argument("ScenarioFactory: unknown kind '" + kind + "'");
  }
  sc.goal_radius = goal_radius;
  return sc;
}

int nearest_human(const JointState& x) {
  int best = 0;
  double best_dist = (x.robot.position() - x.humans[0].position()).norm();
  for (std::size_t i = 1; i < x.humans.size(); ++i) {
    const double d = (x.robot.position() - x.humans[i].position()).norm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

FeatureVector extract_features(const JointState& x, int nearest_index,
                               double predicted_certificate, int k) {
  const HumanState& h = x.humans.at(static_cast<std::size_t>(nearest_index));
  FeatureVector phi;
  phi << x.robot.px, x.robot.py, x.robot.theta, x.robot.v, h.px, h.py, h.vx, h.vy,
      (x.robot.position() - h.position()).norm(), predicted_certificate, static_cast<double>(k);
  return phi;
}

namespace {

struct StepSample {
  double b_true = 0.0;
  double b_pred = 0.0;
  FeatureVector phi;
};

std::vector<StepSample> simulate_episode(const Scenario& sc, const LipschitzBundle& bundle,
                                         std::uint64_t seed) {
  const DynamicsConfig& dyn = sc.dynamics;
  const BarrierSpec& spec = sc.barrier;
  Rng realizer(derive_seed(seed, 0xa11ce));
  Rng predictor(derive_seed(seed, 0xb0b));
  JointState x = sc.initial_state;
  const int n = static_cast<int>(x.humans.size());
  std::vector<StepSample> out;
  out.reserve(static_cast<std::size_t>(dyn.horizon_steps));
  for (int k = 0; k < dyn.horizon_steps; ++k) {
    const Control u_nom = sc.robot_nominal(x);
    const PredictedActions pred = sample_predicted(x, 1, 1, sc.humans, dyn, predictor);
    const std::vector<Control> predicted = pred.first_step(0);
    const std::vector<std::vector<Control>> sample_set{predicted};
    const FilterResult res =
        apply_filter(x, u_nom, sample_set, FilterVariant::kRcbfQp, 0.0, 0.0, spec, bundle, dyn);

    std::vector<Control> realized(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      realized[static_cast<std::size_t>(i)] = realized_action(x, i, sc.humans[static_cast<std::size_t>(i)], dyn, realizer);
    }

    StepSample s;
    const std::vector<int> nbrs = neighborhood(x, spec);
    const int feat_idx = nearest_human(x);
    if (!nbrs.empty()) {
      const int i = nbrs.front();
      s.b_true = certificate(x, res.u, realized[static_cast<std::size_t>(i)], i, spec,
                             dyn.human_model, bundle, dyn.dt);
      s.b_pred = certificate(x, res.u, predicted[static_cast<std::size_t>(i)], i, spec,
                             dyn.human_model, bundle, dyn.dt);
    } else {
      // no constraint was enforced this step, so the filter outcome did not
      // depend on the prediction; the recorded pair carries zero error
      s.b_true = certificate(x, res.u, realized[static_cast<std::size_t>(feat_idx)], feat_idx,
                             spec, dyn.human_model, bundle, dyn.dt);
      s.b_pred = s.b_true;
    }
    const double bhat_nom = certificate(x, u_nom, predicted[static_cast<std::size_t>(feat_idx)],
                                        feat_idx, spec, dyn.human_model, bundle, dyn.dt);
    s.phi = extract_features(x, feat_idx, bhat_nom, k);
    out.push_back(s);

    x = step_joint(x, res.u, realized, dyn);
  }
  return out;
}

}  // namespace

CalibrationOutput run_calibration(const ScenarioFactory& factory, const CalibrationConfig& cal,
                                  const CrcConfig& crc, const LipschitzBundle& bundle, int jobs) {
  if (cal.total_trajectories < 1 || cal.per_batch < 1 ||
      cal.total_trajectories % cal.per_batch != 0) {
    throw std::invalid_argument("run_calibration: per_batch must divide total_trajectories");
  }
  const int M = cal.total_trajectories;
  const int K = cal.per_batch;
  const int n_batches = M / K;
  const int N = factory.dynamics.horizon_steps;

  std::vector<std::vector<StepSample>> episodes(static_cast<std::size_t>(M));
  parallel_for(static_cast<std::size_t>(M), jobs, [&](std::size_t j) {
    const std::uint64_t ep_seed = derive_seed(cal.seed, j);
    const Scenario sc = factory.make(ep_seed);
    episodes[j] = simulate_episode(sc, bundle, ep_seed);
  });

  CalibrationOutput out;
  out.horizon = N;
  out.pairs.resize(static_cast<std::size_t>(n_batches));
  for (int b = 0; b < n_batches; ++b) {
    auto& batch = out.pairs[static_cast<std::size_t>(b)];
    batch.resize(static_cast<std::size_t>(K));
    for (int j = 0; j < K; ++j) {
      auto& traj = batch[static_cast<std::size_t>(j)];
      traj.resize(static_cast<std::size_t>(N));
      const auto& ep = episodes[static_cast<std::size_t>(b * K + j)];
      for (int k = 0; k < N; ++k) {
        traj[static_cast<std::size_t>(k)] = {ep[static_cast<std::size_t>(k)].b_true,
                                             ep[static_cast<std::size_t>(k)].b_pred, k};
      }
    }
  }

  // loss bound: configured override, or 1.5x the 99.9th percentile of errors
  std::vector<double> all_errors;
  all_errors.reserve(static_cast<std::size_t>(M) * static_cast<std::size_t>(N));
  for (const auto& batch : out.pairs)
    for (const auto& traj : batch)
      for (const auto& pr : traj) all_errors.push_back(std::abs(pr.b_true - pr.b_pred));
  out.total_samples = all_errors.size();
  double bound = crc.loss_bound;
  if (!(bound > 0.0)) {
    std::vector<double> sorted = all_errors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t idx =
        std::min(sorted.size() - 1,
                 static_cast<std::size_t>(std::ceil(0.999 * static_cast<double>(sorted.size()))) -
                     1);
    bound = 1.5 * sorted[idx];
    if (!(bound > 0.0)) bound = 1e-9;  // all-zero errors (exact predictor)
  }
  out.loss_bound_used = bound;
  out.clamped_count = static_cast<std::size_t>(
      std::count_if(all_errors.begin(), all_errors.end(), [&](double e) { return e > bound; }));
  if (static_cast<double>(out.clamped_count) > 0.005 * static_cast<double>(out.total_samples)) {
    throw CalibrationError("calibration loss bound clamp rate exceeds 0.5%: " +
                           std::to_string(out.clamped_count) + " of " +
                           std::to_string(out.total_samples));
  }

  CrcConfig crc_used = crc;
  crc_used.loss_bound = bound;

  out.per_bk.assign(static_cast<std::size_t>(n_batches),
                    std::vector<LambdaResult>(static_cast<std::size_t>(N)));
  for (int b = 0; b < n_batches; ++b) {
    const auto& batch = out.pairs[static_cast<std::size_t>(b)];
    for (int k = 0; k < N; ++k) {
      // pool timesteps >= k across the batch, ordered by (timestep, trajectory)
      std::vector<CalibrationSample> pool;
      pool.reserve(static_cast<std::size_t>(K) * static_cast<std::size_t>(N - k));
      for (int kk = k; kk < N; ++kk) {
        for (int j = 0; j < K; ++j) {
          const auto& pr = batch[static_cast<std::size_t>(j)][static_cast<std::size_t>(kk)];
          pool.push_back({std::abs(pr.b_true - pr.b_pred), kk});
        }
      }
      const LambdaResult lr = optimal_lambda(pool, crc_used);
      out.per_bk[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] = lr;
      for (int j = 0; j < K; ++j) {
        TrainingRow row;
        row.phi = episodes[static_cast<std::size_t>(b * K + j)][static_cast<std::size_t>(k)].phi;
        row.lambda = lr.lambda;
        row.batch = b;
        row.k = k;
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

LambdaResult fixed_lambda(const CalibrationOutput& out, const CrcConfig& crc) {
  CrcConfig crc_used = crc;
  crc_used.loss_bound = out.loss_bound_used;
  std::vector<CalibrationSample> pool;
  pool.reserve(out.total_samples);
  const int N = out.horizon;
  for (int k = 0; k < N; ++k) {
    for (const auto& batch : out.pairs) {
      for (const auto& traj : batch) {
        const auto& pr = traj[static_cast<std::size_t>(k)];
        pool.push_back({std::abs(pr.b_true - pr.b_pred), k});
      }
    }
  }
  return optimal_lambda(pool, crc_used);
}

}  // namespace crcsf
