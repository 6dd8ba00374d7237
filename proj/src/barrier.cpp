#include "crcsf/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crcsf/rng.hpp"

namespace crcsf {

double h_value(const RobotState& robot, const HumanState& human, const BarrierSpec& spec) {
  const Eigen::Vector2d d = robot.position() - human.position();
  return d.squaredNorm() - spec.safety_radius * spec.safety_radius;
}

namespace {

struct PairKinematics {
  Eigen::Vector2d d;      // p_R - p_H
  Eigen::Vector2d w_rel;  // velocity of d
  Eigen::Vector2d a_h;    // human acceleration under its control
  double h = 0.0;
};

PairKinematics pair_kinematics(const JointState& x, int human_index, const Control& u_human,
                               const BarrierSpec& spec, HumanModel model) {
  const RobotState& r = x.robot;
  const HumanState& hu = x.humans.at(static_cast<std::size_t>(human_index));
  PairKinematics pk;
  pk.d = r.position() - hu.position();
  pk.h = pk.d.squaredNorm() - spec.safety_radius * spec.safety_radius;
  if (model == HumanModel::kSingleIntegrator) {
    pk.w_rel = r.velocity() - u_human;
    pk.a_h.setZero();
  } else {
    const RobotState hs = human_as_unicycle(hu);
    pk.w_rel = r.velocity() - hs.velocity();
    const double c = std::cos(hs.theta), s = std::sin(hs.theta);
    pk.a_h = {c * u_human.y() - hs.v * s * u_human.x(),
              s * u_human.y() + hs.v * c * u_human.x()};
  }
  return pk;
}

}  // namespace

double psi1(const JointState& x, int human_index, const Control& u_human,
            const BarrierSpec& spec, HumanModel model) {
  const PairKinematics pk = pair_kinematics(x, human_index, u_human, spec, model);
  return 2.0 * pk.d.dot(pk.w_rel) + spec.kappa * pk.h;
}

ConstraintCoeffs constraint_coefficients(const JointState& x, int human_index,
                                         const Control& u_human, const BarrierSpec& spec,
                                         HumanModel model, double margin) {
  const PairKinematics pk = pair_kinematics(x, human_index, u_human, spec, model);
  const RobotState& r = x.robot;
  const double c = std::cos(r.theta), s = std::sin(r.theta);
  ConstraintCoeffs out;
  // robot acceleration is affine in u: a_r(u) = u2*(c, s) + u1*v*(-s, c)
  out.a.x() = 2.0 * r.v * (-pk.d.x() * s + pk.d.y() * c);
  out.a.y() = 2.0 * (pk.d.x() * c + pk.d.y() * s);
  const double hdot = 2.0 * pk.d.dot(pk.w_rel);
  out.b = 2.0 * pk.w_rel.squaredNorm() - 2.0 * pk.d.dot(pk.a_h) +
          (spec.kappa + spec.hocbf_gain) * hdot + spec.hocbf_gain * spec.kappa * pk.h - margin;
  return out;
}

double certificate_with_margin(const JointState& x, const Control& u_robot,
                               const Control& u_human, int human_index,
                               const BarrierSpec& spec, HumanModel model, double margin) {
  const ConstraintCoeffs cc = constraint_coefficients(x, human_index, u_human, spec, model, margin);
  return cc.a.dot(u_robot) + cc.b;
}

double certificate(const JointState& x, const Control& u_robot, const Control& u_human,
                   int human_index, const BarrierSpec& spec, HumanModel model,
                   const LipschitzBundle& bundle, double dt) {
  return certificate_with_margin(x, u_robot, u_human, human_index, spec, model,
                                 eta(bundle, dt));
}

double eta(const LipschitzBundle& b, double dt) {
  return dt * b.L_x * (b.L_h * b.L_g * b.B_u + b.L_h * b.L_f + b.L_kh);
}

std::vector<int> neighborhood(const JointState& x, const BarrierSpec& spec) {
  std::vector<std::pair<double, int>> in_range;
  for (std::size_t i = 0; i < x.humans.size(); ++i) {
    const double dist = (x.robot.position() - x.humans[i].position()).norm();
    if (dist <= spec.neighborhood_radius) in_range.emplace_back(dist, static_cast<int>(i));
  }
  std::sort(in_range.begin(), in_range.end());
  std::vector<int> out;
  out.reserve(in_range.size());
  for (const auto& [dist, i] : in_range) out.push_back(i);
  return out;
}

double estimate_max_slope(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n_samples,
                          std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("estimate_max_slope: n_samples must be >= 2");
  if (lo.size() != hi.size() || lo.size() == 0 || ((hi - lo).array() <= 0.0).any()) {
    throw std::invalid_argument("estimate_max_slope: degenerate sample box");
  }
  Rng rng(seed);
  const Eigen::Index dim = lo.size();
  const double step = 1e-4;
  double max_slope = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Eigen::VectorXd z(dim), dir(dim);
    for (Eigen::Index j = 0; j < dim; ++j) z[j] = rng.uniform(lo[j], hi[j]);
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim; ++j) dir[j] = rng.normal();
      norm = dir.norm();
    } while (norm < 1e-12);
    dir /= norm;
    const double fp = f(z + step * dir);
    const double fm = f(z - step * dir);
    max_slope = std::max(max_slope, std::abs(fp - fm) / (2.0 * step));
  }
  return 1.2 * max_slope;
}

namespace {

// Pair-system coordinates: (p_R, theta, v, p_H) for single-integrator humans
// (the human velocity state does not enter the barrier) and
// (p_R, theta, v, p_H, theta_H, v_H) for unicycle humans.
struct PairSystem {
  HumanModel model;
  BarrierSpec spec;

  int dim() const { return model == HumanModel::kSingleIntegrator ? 6 : 8; }

  JointState decode(const Eigen::VectorXd& z) const {
    JointState x;
    x.robot = {z[0], z[1], z[2], z[3]};
    HumanState h;
    h.px = z[4];
    h.py = z[5];
    if (model == HumanModel::kUnicycle) {
      h.vx = z[7] * std::cos(z[6]);
      h.vy = z[7] * std::sin(z[6]);
    }
    x.humans.push_back(h);
    return x;
  }

  Eigen::VectorXd drift(const Eigen::VectorXd& z) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dim());
    f[0] = z[3] * std::cos(z[2]);
    f[1] = z[3] * std::sin(z[2]);
    if (model == HumanModel::kUnicycle) {
      f[4] = z[7] * std::cos(z[6]);
      f[5] = z[7] * std::sin(z[6]);
    }
    return f;
  }

  // columns scaled by the joint control (u_R, u_H)
  Eigen::VectorXd control_velocity(const Eigen::VectorXd& z, const Control& u_robot,
                                   const Control& u_human) const {
    Eigen::VectorXd gu = Eigen::VectorXd::Zero(dim());
    gu[2] = u_robot.x();
    gu[3] = u_robot.y();
    if (model == HumanModel::kSingleIntegrator) {
      gu[4] = u_human.x();
      gu[5] = u_human.y();
    } else {
      gu[6] = u_human.x();
      gu[7] = u_human.y();
    }
    (void)z;
    return gu;
  }

};

}  // namespace

LipschitzBundle estimate_lipschitz(const LipschitzSampleBox& box, const DynamicsConfig& cfg,
                                   const BarrierSpec& spec, int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("estimate_lipschitz: n_samples must be >= 2");
  if (!(box.dist_min > 0.0) || !(box.dist_max > box.dist_min) ||
      !(box.robot_v_max > box.robot_v_min) || !(box.human_speed_max > 0.0)) {
    throw std::invalid_argument("estimate_lipschitz: degenerate sample box");
  }
  const PairSystem sys{cfg.human_model, spec};
  const int dim = sys.dim();
  Rng rng(seed);

  auto sample_state = [&](Eigen::VectorXd& z) {
    z.resize(dim);
    z[0] = 0.0;
    z[1] = 0.0;
    z[2] = rng.uniform(-kPi, kPi);
    z[3] = rng.uniform(box.robot_v_min, box.robot_v_max);
    const double dist = rng.uniform(box.dist_min, box.dist_max);
    const double bearing = rng.uniform(-kPi, kPi);
    z[4] = dist * std::cos(bearing);
    z[5] = dist * std::sin(bearing);
    if (dim == 8) {
      z[6] = rng.uniform(-kPi, kPi);
      z[7] = rng.uniform(0.0, box.human_speed_max);
    }
  };
  auto sample_human_control = [&]() -> Control {
    return {rng.uniform(cfg.human_control_bounds.lo.x(), cfg.human_control_bounds.hi.x()),
            rng.uniform(cfg.human_control_bounds.lo.y(), cfg.human_control_bounds.hi.y())};
  };
  auto sample_robot_control = [&]() -> Control {
    return {rng.uniform(cfg.robot_control_bounds.lo.x(), cfg.robot_control_bounds.hi.x()),
            rng.uniform(cfg.robot_control_bounds.lo.y(), cfg.robot_control_bounds.hi.y())};
  };

  const double step = 1e-4;
  double max_speed = 0.0;  // sup ||xdot||
  double max_jac = 0.0;    // Lip(f)
  double max_dh = 0.0;     // Lip(h)
  double max_dg = 0.0;     // Lip(g), zero for constant control coupling
  Eigen::VectorXd z, dir;
  auto h_of = [&](const Eigen::VectorXd& zz) {
    const JointState xs = sys.decode(zz);
    return h_value(xs.robot, xs.humans[0], spec);
  };
  for (int i = 0; i < n_samples; ++i) {
    sample_state(z);
    const Control u_h = sample_human_control();
    const Control u_r = sample_robot_control();

    const Eigen::VectorXd xdot = sys.drift(z) + sys.control_velocity(z, u_r, u_h);
    max_speed = std::max(max_speed, xdot.norm());

    dir.resize(dim);
    double norm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) dir[j] = rng.normal();
      norm = dir.norm();
    } while (norm < 1e-12);
    dir /= norm;

    const Eigen::VectorXd zp = z + step * dir;
    const Eigen::VectorXd zm = z - step * dir;
    max_jac = std::max(max_jac, (sys.drift(zp) - sys.drift(zm)).norm() / (2.0 * step));
    max_dh = std::max(max_dh, std::abs(h_of(zp) - h_of(zm)) / (2.0 * step));
    max_dg = std::max(
        max_dg, (sys.control_velocity(zp, u_r, u_h) - sys.control_velocity(zm, u_r, u_h)).norm() /
                    (2.0 * step));
  }

  LipschitzBundle out;
  out.L_h = 1.2 * max_dh;
  out.L_x = 1.2 * max_speed;
  out.L_f = 1.2 * max_jac;
  out.L_g = 1.2 * max_dg;
  out.L_kh = spec.kappa * out.L_h;
  out.B_u = std::hypot(cfg.robot_control_bounds.max_norm(), cfg.human_control_bounds.max_norm());
  return out;
}

}  // namespace crcsf
