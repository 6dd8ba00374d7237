#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace crcsf {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

using Control = Eigen::Vector2d;

/// Axis-aligned control box.
struct Box {
  Eigen::Vector2d lo{-1.0, -1.0};
  Eigen::Vector2d hi{1.0, 1.0};

  bool contains(const Control& u, double tol = 1e-9) const {
    return u.x() >= lo.x() - tol && u.x() <= hi.x() + tol && u.y() >= lo.y() - tol &&
           u.y() <= hi.y() + tol;
  }
  Control clamp(const Control& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
  /// sup ||u||_2 over the box (attained at a corner).
  double max_norm() const {
    const double x = std::max(std::abs(lo.x()), std::abs(hi.x()));
    const double y = std::max(std::abs(lo.y()), std::abs(hi.y()));
    return std::hypot(x, y);
  }
  bool degenerate() const { return !(lo.x() < hi.x()) || !(lo.y() < hi.y()); }
};

/// Dynamically-extended unicycle: controls are (steering rate, acceleration).
struct RobotState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;  // wrapped to (-pi, pi]
  double v = 0.0;

  Eigen::Vector2d position() const { return {px, py}; }
  Eigen::Vector2d velocity() const { return {v * std::cos(theta), v * std::sin(theta)}; }
};

/// (vx, vy) is the human's current planar velocity. For single-integrator
/// humans it caches the last applied control; for unicycle humans it encodes
/// (theta, v) as v*(cos theta, sin theta) with v kept >= kMinUnicycleSpeed so
/// the heading stays recoverable through a stop.
struct HumanState {
  double px = 0.0;
  double py = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  Eigen::Vector2d position() const { return {px, py}; }
  Eigen::Vector2d velocity() const { return {vx, vy}; }
};

inline constexpr double kMinUnicycleSpeed = 1e-6;

enum class HumanModel { kSingleIntegrator, kUnicycle };

struct JointState {
  RobotState robot;
  std::vector<HumanState> humans;  // non-empty
  int k = 0;
  double t = 0.0;  // t == k * dt
};

struct DynamicsConfig {
  double dt = 0.1;
  int horizon_steps = 80;
  Box robot_control_bounds{{-0.3, -1.0}, {0.3, 1.0}};
  Box human_control_bounds{{-1.5, -1.5}, {1.5, 1.5}};
  HumanModel human_model = HumanModel::kSingleIntegrator;
};

/// Time derivative of the robot state under control u = (steering, accel).
/// Control-affine: the controls enter only through theta_dot and v_dot.
Eigen::Vector4d robot_derivative(const RobotState& s, const Control& u);

/// Decodes the unicycle state carried by a HumanState. Heading falls back to
/// zero only when the encoded speed vanishes entirely.
RobotState human_as_unicycle(const HumanState& h);
HumanState unicycle_as_human(const RobotState& s, double min_speed = kMinUnicycleSpeed);

/// Advances the joint state by one zero-order-hold interval: RK4 for unicycle
/// agents, exact affine update for single-integrator humans.
JointState step_joint(const JointState& x, const Control& u_robot,
                      std::span<const Control> u_humans, const DynamicsConfig& cfg);

/// States at times t_k + i*dt/m for i = 0..m under the same held controls.
/// The last entry matches step_joint to integration tolerance.
std::vector<JointState> substep_trajectory(const JointState& x, const Control& u_robot,
                                           std::span<const Control> u_humans,
                                           const DynamicsConfig& cfg, int subdivisions);

}  // namespace crcsf
