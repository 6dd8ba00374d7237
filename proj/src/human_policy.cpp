#include "crcsf/human_policy.hpp"

#include <cmath>
#include <stdexcept>

namespace crcsf {

Control unicycle_goal_control(const RobotState& s, const Eigen::Vector2d& goal,
                              double heading_gain, double accel_gain, double gain,
                              double cruise_speed) {
  const Eigen::Vector2d to_goal = goal - s.position();
  const double dist = to_goal.norm();
  double heading_error = 0.0;
  if (dist > 1e-9) heading_error = wrap_angle(std::atan2(to_goal.y(), to_goal.x()) - s.theta);
  const double v_des = std::min(gain * dist, cruise_speed);
  return {heading_gain * heading_error, accel_gain * (v_des - s.v)};
}

namespace {

Control integrator_nominal(const JointState& x, int human_index, const HumanPolicyConfig& cfg) {
  const HumanState& me = x.humans[static_cast<std::size_t>(human_index)];
  Eigen::Vector2d u = cfg.gain * (cfg.goal - me.position());
  if (cfg.repulsion_gain > 0.0 && cfg.repulsion_radius > 0.0) {
    for (std::size_t j = 0; j < x.humans.size(); ++j) {
      if (static_cast<int>(j) == human_index) continue;
      const Eigen::Vector2d away = me.position() - x.humans[j].position();
      const double dist = away.norm();
      if (dist < 1e-9 || dist >= cfg.repulsion_radius) continue;
      u += cfg.repulsion_gain * (cfg.repulsion_radius - dist) / cfg.repulsion_radius *
           (away / dist);
    }
  }
  return u;
}

}  // namespace

// Unclamped: noise is added to the raw proportional law and the sum clamped
// once, so saturation does not bias the realized turn rate.
Control nominal_human_action(const JointState& x, int human_index, const HumanPolicyConfig& cfg,
                             const DynamicsConfig& dyn) {
  if (dyn.human_model == HumanModel::kSingleIntegrator) {
    return integrator_nominal(x, human_index, cfg);
  }
  const RobotState s = human_as_unicycle(x.humans[static_cast<std::size_t>(human_index)]);
  return unicycle_goal_control(s, cfg.goal, cfg.heading_gain, cfg.accel_gain, cfg.gain,
                               cfg.cruise_speed);
}

Control realized_action(const JointState& x, int human_index, const HumanPolicyConfig& cfg,
                        const DynamicsConfig& dyn, Rng& rng) {
  Control u = nominal_human_action(x, human_index, cfg, dyn);
  u.x() += rng.clipped_normal(cfg.noise_sigma, cfg.noise_clip);
  u.y() += rng.clipped_normal(cfg.noise_sigma, cfg.noise_clip);
  return dyn.human_control_bounds.clamp(u);
}

PredictedActions sample_predicted(const JointState& x, int horizon, int sample_count,
                                  std::span<const HumanPolicyConfig> cfgs,
                                  const DynamicsConfig& dyn, Rng& rng) {
  if (horizon < 1) throw std::invalid_argument("sample_predicted: horizon must be >= 1");
  if (sample_count < 1) throw std::invalid_argument("sample_predicted: sample_count must be >= 1");
  const std::size_t n_humans = x.humans.size();
  PredictedActions out;
  out.sample_count = sample_count;
  out.horizon = horizon;
  out.actions.assign(static_cast<std::size_t>(sample_count),
                     std::vector<std::vector<Control>>(
                         n_humans, std::vector<Control>(static_cast<std::size_t>(horizon))));
  for (int s = 0; s < sample_count; ++s) {
    JointState scratch = x;
    for (int step = 0; step < horizon; ++step) {
      std::vector<Control> controls(n_humans);
      for (std::size_t i = 0; i < n_humans; ++i) {
        const HumanPolicyConfig& cfg = cfgs[i];
        Control u = nominal_human_action(scratch, static_cast<int>(i), cfg, dyn);
        const double sigma = cfg.noise_sigma * cfg.predictor_sigma_scale;
        u.x() += rng.clipped_normal(sigma, cfg.noise_clip);
        u.y() += rng.clipped_normal(sigma, cfg.noise_clip);
        u = dyn.human_control_bounds.clamp(u);
        controls[i] = u;
        out.actions[static_cast<std::size_t>(s)][i][static_cast<std::size_t>(step)] = u;
      }
      if (step + 1 < horizon) {
        scratch = step_joint(scratch, Control::Zero(), controls, dyn);
        scratch.robot = x.robot;  // humans are robot-blind; keep the robot frozen
      }
    }
  }
  return out;
}

DynamicsConfig head_on_dynamics() {
  DynamicsConfig dyn;
  dyn.dt = 0.1;
  dyn.horizon_steps = 80;
  dyn.robot_control_bounds = Box{{-0.3, -1.0}, {0.3, 1.0}};
  dyn.human_control_bounds = Box{{-0.3, -1.0}, {0.3, 1.0}};
  dyn.human_model = HumanModel::kUnicycle;
  return dyn;
}

BarrierSpec head_on_barrier() {
  BarrierSpec spec;
  spec.safety_radius = 1.0;
  spec.kappa = 4.0;
  spec.hocbf_gain = 4.0;
  spec.neighborhood_radius = 4.0;
  return spec;
}

Scenario head_on_scenario(std::uint64_t seed, const HeadOnParams& params,
                          const DynamicsConfig& dyn_base, const BarrierSpec& barrier) {
  Rng rng(derive_seed(seed, 0xc0441d04));
  Scenario sc;
  sc.name = "head_on";
  sc.dynamics = dyn_base;
  sc.barrier = barrier;

  const double L = params.corridor_length;
  sc.initial_state.robot = {0.0, 0.0, 0.0, params.robot_speed};
  HumanState human;
  human.px = L;
  human.py = 0.0;
  human.vx = -params.human_speed;
  human.vy = 0.0;
  sc.initial_state.humans = {human};
  sc.robot_goal = {L, 0.0};

  const double side = (rng.uniform() < 0.5) ? 1.0 : -1.0;
  HumanPolicyConfig hp;
  hp.goal = {0.0, side * params.lateral_offset};
  hp.noise_sigma = 1.2;
  hp.noise_clip = 0.5;
  hp.gain = 1.0;
  hp.cruise_speed = params.human_speed;
  hp.heading_gain = 2.0;
  hp.accel_gain = 1.5;
  sc.humans = {hp};

  sc.robot_cruise_speed = 1.4;
  sc.robot_heading_gain = 2.0;
  sc.robot_accel_gain = 1.5;
  sc.robot_goal_gain = 1.0;
  return sc;
}

DynamicsConfig crowd_dynamics() {
  DynamicsConfig dyn;
  dyn.dt = 0.1;
  dyn.horizon_steps = 80;
  dyn.robot_control_bounds = Box{{-0.3, -1.0}, {0.3, 1.0}};
  dyn.human_control_bounds = Box{{-1.5, -1.5}, {1.5, 1.5}};
  dyn.human_model = HumanModel::kSingleIntegrator;
  return dyn;
}

BarrierSpec crowd_barrier() {
  BarrierSpec spec;
  spec.safety_radius = 1.0;
  spec.kappa = 6.0;
  spec.hocbf_gain = 6.0;
  spec.neighborhood_radius = 3.0;
  return spec;
}

namespace {

struct CrowdLayout {
  Eigen::Vector2d robot_start;
  double robot_heading;
  Eigen::Vector2d robot_goal;
};

CrowdLayout crowd_layout(int preset, double e) {
  const double r = e - 0.3;  // robot start/goal ring, crossing ~2r meters
  switch (preset) {
    case 1: return {{-r, 0.0}, 0.0, {r, 0.0}};
    case 2: return {{0.0, -r}, kPi / 2.0, {0.0, r}};
    case 3: return {{-r * 0.71, -r * 0.71}, kPi / 4.0, {r * 0.71, r * 0.71}};
    case 4: return {{r, 0.0}, kPi, {-r, 0.0}};
    case 5: return {{-r * 0.89, -r * 0.45}, 0.4636476090008061, {r * 0.89, r * 0.45}};
    default: throw std::invalid_argument("crowd_scenario: preset must be in 1..5");
  }
}

}  // namespace

Scenario crowd_scenario(int preset, int n_humans, std::uint64_t seed, const CrowdParams& params,
                        const DynamicsConfig& dyn_base, const BarrierSpec& barrier) {
  if (n_humans < 1) throw std::invalid_argument("crowd_scenario: n_humans must be >= 1");
  const CrowdLayout layout = crowd_layout(preset, params.scene_half_extent);
  // preset id enters the stream so equal seeds give distinct but reproducible
  // crowds per preset
  Rng rng(derive_seed(seed, 0xc404d000 + static_cast<std::uint64_t>(preset)));

  Scenario sc;
  sc.name = "crowd_" + std::to_string(preset);
  sc.dynamics = dyn_base;
  sc.barrier = barrier;
  sc.initial_state.robot = {layout.robot_start.x(), layout.robot_start.y(), layout.robot_heading,
                            1.0};
  sc.robot_goal = layout.robot_goal;
  sc.robot_cruise_speed = 1.5;
  sc.robot_heading_gain = 2.0;
  sc.robot_accel_gain = 1.5;
  sc.robot_goal_gain = 1.0;

  // crossing traffic in the robot's corridor frame: humans spawn ahead of the
  // robot offset to one side and walk across to the other side
  const Eigen::Vector2d dir = (layout.robot_goal - layout.robot_start).normalized();
  const Eigen::Vector2d perp{-dir.y(), dir.x()};
  const double corridor = (layout.robot_goal - layout.robot_start).norm();
  const double min_sep = 2.0 * barrier.safety_radius;
  std::vector<Eigen::Vector2d> starts;
  std::vector<Eigen::Vector2d> goals;
  // stratified crossing slots along the corridor keep the lanes spread
  const double along_lo = 1.8;
  const double slot = (corridor - along_lo) / n_humans;
  for (int i = 0; i < n_humans; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_placement_retries; ++attempt) {
      const double along = along_lo + (i + rng.uniform(0.15, 0.85)) * slot;
      const double side = (rng.uniform() < 0.5) ? 1.0 : -1.0;
      const double lateral = rng.uniform(1.2, params.scene_half_extent - 0.5);
      const Eigen::Vector2d p = layout.robot_start + along * dir + side * lateral * perp;
      bool ok = (p - layout.robot_start).norm() > min_sep;
      for (const auto& q : starts) ok = ok && (p - q).norm() > min_sep;
      if (!ok) continue;
      const double goal_along =
          along + rng.uniform(-params.goal_jitter, params.goal_jitter);
      const double goal_lat = rng.uniform(1.2, params.scene_half_extent);
      starts.push_back(p);
      goals.push_back(layout.robot_start + goal_along * dir - side * goal_lat * perp);
      placed = true;
      break;
    }
    if (!placed) throw std::runtime_error("crowd_scenario: human placement failed");
  }

  for (int i = 0; i < n_humans; ++i) {
    HumanState h;
    h.px = starts[static_cast<std::size_t>(i)].x();
    h.py = starts[static_cast<std::size_t>(i)].y();
    sc.initial_state.humans.push_back(h);

    HumanPolicyConfig hp;
    hp.goal = goals[static_cast<std::size_t>(i)];
    hp.noise_sigma = params.noise_sigma;
    hp.noise_clip = params.noise_clip;
    hp.gain = params.human_speed;
    hp.repulsion_gain = params.repulsion_gain;
    hp.repulsion_radius = params.repulsion_radius;
    sc.humans.push_back(hp);
  }
  return sc;
}

}  // namespace crcsf
