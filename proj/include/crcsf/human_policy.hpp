#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crcsf/barrier.hpp"
#include "crcsf/dynamics.hpp"
#include "crcsf/rng.hpp"

namespace crcsf {

/// Parameters of one human's stochastic goal-reaching policy.
struct HumanPolicyConfig {
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double noise_sigma = 0.5;
  double noise_clip = 0.3;
  double gain = 1.0;  // goal attraction, 1/s
  double repulsion_gain = 0.0;
  double repulsion_radius = 0.0;
  // unicycle-model agents only
  double cruise_speed = 1.2;
  double heading_gain = 2.0;
  double accel_gain = 1.5;
  /// Multiplier on noise_sigma when this policy acts as the predictor; 1.0
  /// keeps the predictor well-specified.
  double predictor_sigma_scale = 1.0;
};

/// Proportional goal-reaching control for a unicycle agent: steer toward the
/// goal bearing, track min(gain * distance, cruise_speed). Unclamped.
Control unicycle_goal_control(const RobotState& s, const Eigen::Vector2d& goal,
                              double heading_gain, double accel_gain, double gain,
                              double cruise_speed);

/// Nominal (noise-free) action of human i: goal attraction plus inter-human
/// repulsion for single integrators, the proportional unicycle law otherwise.
Control nominal_human_action(const JointState& x, int human_index, const HumanPolicyConfig& cfg,
                             const DynamicsConfig& dyn);

/// Nominal action plus per-axis clipped Gaussian noise, clamped to the
/// control box. Deterministic given the rng state.
Control realized_action(const JointState& x, int human_index, const HumanPolicyConfig& cfg,
                        const DynamicsConfig& dyn, Rng& rng);

/// Sampled action sequences, indexed [sample][human][step].
struct PredictedActions {
  int sample_count = 0;
  int horizon = 0;
  std::vector<std::vector<std::vector<Control>>> actions;

  /// Actions for the first predicted step of one sample, one per human.
  std::vector<Control> first_step(int sample) const {
    std::vector<Control> out;
    const auto& per_human = actions[static_cast<std::size_t>(sample)];
    out.reserve(per_human.size());
    for (const auto& seq : per_human) out.push_back(seq.front());
    return out;
  }
};

/// I.i.d. rollouts of the same stochastic law as realized_action, each rolled
/// forward through the humans' own dynamics (sigma scaled by
/// predictor_sigma_scale). The robot state is left untouched.
PredictedActions sample_predicted(const JointState& x, int horizon, int sample_count,
                                  std::span<const HumanPolicyConfig> cfgs,
                                  const DynamicsConfig& dyn, Rng& rng);

/// A fully specified episode setup: initial state plus all agent parameters.
struct Scenario {
  std::string name;
  DynamicsConfig dynamics;
  BarrierSpec barrier;
  JointState initial_state;
  std::vector<HumanPolicyConfig> humans;
  Eigen::Vector2d robot_goal = Eigen::Vector2d::Zero();
  double goal_radius = 0.5;
  // robot nominal controller parameters (shared between calibration and
  // deployment)
  double robot_cruise_speed = 1.4;
  double robot_heading_gain = 2.0;
  double robot_accel_gain = 1.5;
  double robot_goal_gain = 1.0;

  Control robot_nominal(const JointState& x) const {
    return dynamics.robot_control_bounds.clamp(
        unicycle_goal_control(x.robot, robot_goal, robot_heading_gain, robot_accel_gain,
                              robot_goal_gain, robot_cruise_speed));
  }
};

DynamicsConfig head_on_dynamics();
BarrierSpec head_on_barrier();
DynamicsConfig crowd_dynamics();
BarrierSpec crowd_barrier();

struct HeadOnParams {
  double corridor_length = 8.5;
  double lateral_offset = 3.0;  // human goal offset, side drawn from the seed
  double robot_speed = 1.2;
  double human_speed = 0.8;  // goal-attraction gain, 1/s
};

/// Corridor encounter: robot and human facing each other on the x axis, the
/// human's goal offset left or right with equal probability. Both agents are
/// unicycles.
Scenario head_on_scenario(std::uint64_t seed, const HeadOnParams& params = {},
                          const DynamicsConfig& dyn_base = head_on_dynamics(),
                          const BarrierSpec& barrier = head_on_barrier());

struct CrowdParams {
  int n_humans = 4;
  double scene_half_extent = 4.5;
  double human_speed = 0.8;  // goal-attraction gain, 1/s
  double noise_sigma = 0.5;
  double noise_clip = 0.3;
  double repulsion_gain = 0.8;
  double repulsion_radius = 1.4;
  double goal_jitter = 3.0;
  int max_placement_retries = 200;
};

/// Crowd of single-integrator humans crossing the scene; starts are pairwise
/// separated by more than 2R. preset selects one of five robot start/goal
/// layouts; layout constants are fixed per preset name so runs are
/// reproducible bit-exactly.
Scenario crowd_scenario(int preset, int n_humans, std::uint64_t seed,
                        const CrowdParams& params = {},
                        const DynamicsConfig& dyn_base = crowd_dynamics(),
                        const BarrierSpec& barrier = crowd_barrier());

}  // namespace crcsf
