#include "crcsf/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace crcsf {

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

Eigen::Vector4d robot_derivative(const RobotState& s, const Control& u) {
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), u.x(), u.y()};
}

RobotState human_as_unicycle(const HumanState& h) {
  RobotState s;
  s.px = h.px;
  s.py = h.py;
  s.v = std::hypot(h.vx, h.vy);
  s.theta = (s.v > 0.0) ? std::atan2(h.vy, h.vx) : 0.0;
  return s;
}

HumanState unicycle_as_human(const RobotState& s, double min_speed) {
  const double v = std::max(s.v, min_speed);
  return {s.px, s.py, v * std::cos(s.theta), v * std::sin(s.theta)};
}

namespace {

RobotState rk4_unicycle(const RobotState& s0, const Control& u, double h) {
  auto eval = [&u](const Eigen::Vector4d& y) {
    RobotState s{y[0], y[1], y[2], y[3]};
    return robot_derivative(s, u);
  };
  Eigen::Vector4d y0{s0.px, s0.py, s0.theta, s0.v};
  const Eigen::Vector4d k1 = eval(y0);
  const Eigen::Vector4d k2 = eval(y0 + 0.5 * h * k1);
  const Eigen::Vector4d k3 = eval(y0 + 0.5 * h * k2);
  const Eigen::Vector4d k4 = eval(y0 + h * k3);
  const Eigen::Vector4d y1 = y0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return {y1[0], y1[1], wrap_angle(y1[2]), y1[3]};
}

JointState advance(const JointState& x, const Control& u_robot,
                   std::span<const Control> u_humans, const DynamicsConfig& cfg, double h) {
  JointState out = x;
  out.robot = rk4_unicycle(x.robot, u_robot, h);
  for (std::size_t i = 0; i < x.humans.size(); ++i) {
    const Control& u = u_humans[i];
    if (cfg.human_model == HumanModel::kSingleIntegrator) {
      out.humans[i].px = x.humans[i].px + u.x() * h;
      out.humans[i].py = x.humans[i].py + u.y() * h;
      out.humans[i].vx = u.x();
      out.humans[i].vy = u.y();
    } else {
      RobotState s = rk4_unicycle(human_as_unicycle(x.humans[i]), u, h);
      // pedestrians do not reverse; keep speed nonnegative so the heading
      // encoded in (vx, vy) survives a full stop
      s.v = std::max(s.v, kMinUnicycleSpeed);
      out.humans[i] = unicycle_as_human(s);
    }
  }
  return out;
}

}  // namespace

JointState step_joint(const JointState& x, const Control& u_robot,
                      std::span<const Control> u_humans, const DynamicsConfig& cfg) {
  if (u_humans.size() != x.humans.size()) {
    throw std::invalid_argument("step_joint: control count does not match human count");
  }
  JointState out = advance(x, u_robot, u_humans, cfg, cfg.dt);
  out.k = x.k + 1;
  out.t = x.t + cfg.dt;
  return out;
}

std::vector<JointState> substep_trajectory(const JointState& x, const Control& u_robot,
                                           std::span<const Control> u_humans,
                                           const DynamicsConfig& cfg, int subdivisions) {
  if (subdivisions < 1) throw std::invalid_argument("substep_trajectory: subdivisions must be >= 1");
  if (u_humans.size() != x.humans.size()) {
    throw std::invalid_argument("substep_trajectory: control count does not match human count");
  }
  const double h = cfg.dt / subdivisions;
  std::vector<JointState> out;
  out.reserve(static_cast<std::size_t>(subdivisions) + 1);
  out.push_back(x);
  for (int i = 1; i <= subdivisions; ++i) {
    JointState next = advance(out.back(), u_robot, u_humans, cfg, h);
    next.k = x.k;
    next.t = x.t + i * h;
    out.push_back(std::move(next));
  }
  out.back().k = x.k + 1;
  out.back().t = x.t + cfg.dt;
  return out;
}

}  // namespace crcsf
