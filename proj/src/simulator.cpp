#include "crcsf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crcsf/io.hpp"

namespace crcsf {

PolicyVariant::Kind PolicyVariant::parse_kind(const std::string& name) {
  if (name == "cbf_qp") return Kind::kCbfQp;
  if (name == "rcbf_qp") return Kind::kRcbfQp;
  if (name == "fixed_crc_sf") return Kind::kFixedCrcSf;
  if (name == "online_crc_sf") return Kind::kOnlineCrcSf;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

std::string PolicyVariant::kind_name(Kind kind) {
  switch (kind) {
    case Kind::kCbfQp: return "cbf_qp";
    case Kind::kRcbfQp: return "rcbf_qp";
    case Kind::kFixedCrcSf: return "fixed_crc_sf";
    case Kind::kOnlineCrcSf: return "online_crc_sf";
  }
  return "?";
}

namespace {

double min_h_over_humans(const JointState& x, const BarrierSpec& spec) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& h : x.humans) m = std::min(m, h_value(x.robot, h, spec));
  return m;
}

}  // namespace

EpisodeRecord run_episode(const Scenario& sc, const PolicyVariant& variant, const SimParams& p,
                          std::uint64_t seed) {
  if (variant.kind == PolicyVariant::Kind::kOnlineCrcSf && variant.model == nullptr) {
    throw std::invalid_argument("run_episode: online_crc_sf requires a margin model");
  }
  const DynamicsConfig& dyn = sc.dynamics;
  const BarrierSpec& spec = sc.barrier;
  const int N = dyn.horizon_steps;
  const double eps = epsilon(p.crc);

  Rng realizer(derive_seed(seed, 0xa11ce));
  Rng predictor(derive_seed(seed, 0xb0b));

  EpisodeRecord rec;
  rec.scenario = sc.name;
  rec.variant = PolicyVariant::kind_name(variant.kind);
  rec.seed = seed;
  rec.states.reserve(static_cast<std::size_t>(N) + 1);
  rec.steps.reserve(static_cast<std::size_t>(N));

  JointState x = sc.initial_state;
  rec.states.push_back(x);
  if ((x.robot.position() - sc.robot_goal).norm() <= sc.goal_radius) rec.goal_step = 0;

  const std::size_t n_humans = x.humans.size();
  double effort = 0.0, smooth = 0.0, lambda_acc = 0.0;
  Control u_prev = Control::Zero();

  for (int k = 0; k < N; ++k) {
    const Control u_nom = sc.robot_nominal(x);
    const PredictedActions pred =
        sample_predicted(x, 1, p.sample_count, sc.humans, dyn, predictor);
    std::vector<std::vector<Control>> samples;
    samples.reserve(static_cast<std::size_t>(p.sample_count));
    for (int s = 0; s < p.sample_count; ++s) samples.push_back(pred.first_step(s));

    double lambda_k = 0.0;
    FilterVariant fv = FilterVariant::kCbfQp;
    switch (variant.kind) {
      case PolicyVariant::Kind::kCbfQp:
        fv = FilterVariant::kCbfQp;
        break;
      case PolicyVariant::Kind::kRcbfQp:
        fv = FilterVariant::kRcbfQp;
        break;
      case PolicyVariant::Kind::kFixedCrcSf:
        fv = FilterVariant::kCrcSf;
        lambda_k = variant.fixed_lambda_value;
        break;
      case PolicyVariant::Kind::kOnlineCrcSf: {
        fv = FilterVariant::kCrcSf;
        const int ni = nearest_human(x);
        const double bhat = certificate(x, u_nom, samples[0][static_cast<std::size_t>(ni)], ni,
                                        spec, dyn.human_model, p.bundle, dyn.dt);
        lambda_k = predict(*variant.model, extract_features(x, ni, bhat, k));
        break;
      }
    }
    const double step_eps = (fv == FilterVariant::kCrcSf) ? eps : 0.0;
    const FilterResult res =
        apply_filter(x, u_nom, samples, fv, lambda_k, step_eps, spec, p.bundle, dyn);

    std::vector<Control> realized(n_humans);
    for (std::size_t i = 0; i < n_humans; ++i) {
      realized[i] = realized_action(x, static_cast<int>(i), sc.humans[i], dyn, realizer);
    }

    StepLog log;
    log.u_robot = res.u;
    log.lambda_used = lambda_k;
    log.feasible = res.feasible;
    log.constrained = res.constraint_count > 0;
    log.violation = res.violation;
    if (!res.feasible) ++rec.infeasible_steps;

    double cert_min = std::numeric_limits<double>::infinity();
    for (int i : neighborhood(x, spec)) {
      cert_min = std::min(cert_min, certificate(x, res.u, realized[static_cast<std::size_t>(i)],
                                                i, spec, dyn.human_model, p.bundle, dyn.dt));
    }
    log.cert_true_min = cert_min;

    const std::vector<JointState> sub = substep_trajectory(x, res.u, realized, dyn, p.substeps);
    double min_h = std::numeric_limits<double>::infinity();
    for (const auto& s : sub) min_h = std::min(min_h, min_h_over_humans(s, spec));
    log.min_h_substep = min_h;
    x = sub.back();
    log.h_next = min_h_over_humans(x, spec);
    rec.steps.push_back(log);
    rec.states.push_back(x);

    if (min_h < 0.0 && rec.collision_step < 0) rec.collision_step = k;
    const bool colliding_now = min_h < 0.0;
    if (!colliding_now && std::isfinite(cert_min) && cert_min < 0.0) rec.safety_violation = true;
    if (rec.goal_step < 0 && (x.robot.position() - sc.robot_goal).norm() <= sc.goal_radius) {
      rec.goal_step = k + 1;
    }

    effort += res.u.norm();
    if (k > 0) smooth += (res.u - u_prev).norm();
    u_prev = res.u;
    lambda_acc += lambda_k;
  }

  rec.collision = rec.collision_step >= 0;
  rec.goal_success =
      rec.goal_step >= 0 && (rec.collision_step < 0 || rec.goal_step <= rec.collision_step);
  rec.control_effort = effort / N;
  rec.control_smoothness = (N > 1) ? smooth / (N - 1) : 0.0;
  rec.mean_lambda = lambda_acc / N;
  return rec;
}

MetricsSummary summarize(const std::vector<EpisodeRecord>& records) {
  MetricsSummary s;
  s.trials = static_cast<int>(records.size());
  if (records.empty()) return s;
  for (const auto& r : records) {
    s.collision_rate += r.collision ? 1.0 : 0.0;
    s.safety_violation_rate += r.safety_violation ? 1.0 : 0.0;
    s.goal_success_rate += r.goal_success ? 1.0 : 0.0;
    s.mean_control_effort += r.control_effort;
    s.mean_control_smoothness += r.control_smoothness;
  }
  const double n = static_cast<double>(s.trials);
  s.collision_rate /= n;
  s.safety_violation_rate /= n;
  s.goal_success_rate /= n;
  s.mean_control_effort /= n;
  s.mean_control_smoothness /= n;
  return s;
}

double feasible_step_unsafe_rate(const std::vector<EpisodeRecord>& records) {
  std::size_t feasible_steps = 0, unsafe = 0;
  for (const auto& r : records) {
    for (const auto& st : r.steps) {
      if (st.constrained && st.feasible) {
        ++feasible_steps;
        if (st.h_next < 0.0) ++unsafe;
      }
    }
  }
  if (feasible_steps == 0) return 0.0;
  return static_cast<double>(unsafe) / static_cast<double>(feasible_steps);
}

std::vector<EpisodeRecord> evaluate(const ScenarioFactory& factory, const PolicyVariant& variant,
                                    int n_trials, std::uint64_t base_seed, const SimParams& p,
                                    int jobs) {
  if (n_trials < 1) throw std::invalid_argument("evaluate: n_trials must be >= 1");
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(n_trials));
  parallel_for(static_cast<std::size_t>(n_trials), jobs, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(base_seed, i);
    const Scenario sc = factory.make(seed);
    records[i] = run_episode(sc, variant, p, seed);
  });
  return records;
}

}  // namespace crcsf
