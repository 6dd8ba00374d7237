#pragma once

// Test-only oracles, kept independent of the library implementation paths
// they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "crcsf/barrier.hpp"
#include "crcsf/crc.hpp"
#include "crcsf/dynamics.hpp"
#include "crcsf/qp.hpp"
#include "crcsf/rng.hpp"

namespace crcsf::test {

/// Brute-force QP oracle: coarse grid over the box keeping the best feasible
/// point, then local refinement around it down to sub-tolerance resolution.
struct GridQpResult {
  Eigen::Vector2d u;
  double objective = std::numeric_limits<double>::infinity();
  bool found_feasible = false;
};

inline GridQpResult grid_qp_oracle(const QpProblem& p, int levels = 5, int pts = 81) {
  auto feasible = [&](const Eigen::Vector2d& u) {
    for (const auto& c : p.constraints) {
      if (c.a.dot(u) + c.b < -1e-12) return false;
    }
    return true;
  };
  GridQpResult best;
  Eigen::Vector2d lo = p.box.lo, hi = p.box.hi;
  for (int level = 0; level < levels; ++level) {
    Eigen::Vector2d found = best.u;
    for (int i = 0; i < pts; ++i) {
      for (int j = 0; j < pts; ++j) {
        Eigen::Vector2d u{lo.x() + (hi.x() - lo.x()) * i / (pts - 1),
                          lo.y() + (hi.y() - lo.y()) * j / (pts - 1)};
        if (!feasible(u)) continue;
        const double obj = (u - p.u_nom).squaredNorm();
        if (obj < best.objective) {
          best.objective = obj;
          best.u = u;
          best.found_feasible = true;
          found = u;
        }
      }
    }
    if (!best.found_feasible) return best;
    // shrink the window around the incumbent, clipped to the box
    const Eigen::Vector2d span = (hi - lo) * (2.5 / (pts - 1));
    lo = (found - span).cwiseMax(p.box.lo);
    hi = (found + span).cwiseMin(p.box.hi);
  }
  return best;
}

/// Bisection oracle for the optimal lambda on the empirical risk, to 1e-9.
inline double bisect_lambda(std::span<const CalibrationSample> samples, const CrcConfig& cfg) {
  if (empirical_risk(samples, 0.0, cfg) <= cfg.alpha) return 0.0;
  double lo = 0.0, hi = cfg.loss_bound;
  if (empirical_risk(samples, hi, cfg) > cfg.alpha) return cfg.loss_bound;  // unattainable
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (empirical_risk(samples, mid, cfg) <= cfg.alpha) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Finite-difference certificate oracle: evaluates psi1 along the held-control
/// flow and assembles d(psi1)/dt + hocbf_gain * psi1 - margin numerically.
inline double fd_certificate(const JointState& x, const Control& u_robot,
                             const Control& u_human, int human_index, const BarrierSpec& spec,
                             const DynamicsConfig& cfg, double margin) {
  const double h = 1e-6;
  DynamicsConfig tiny = cfg;
  tiny.dt = h;
  std::vector<Control> uh(x.humans.size(), Control::Zero());
  uh[static_cast<std::size_t>(human_index)] = u_human;
  const JointState fwd = step_joint(x, u_robot, uh, tiny);
  tiny.dt = -h;
  const JointState bwd = step_joint(x, u_robot, uh, tiny);
  const double psi_f = psi1(fwd, human_index, u_human, spec, cfg.human_model);
  const double psi_b = psi1(bwd, human_index, u_human, spec, cfg.human_model);
  const double psi_dot = (psi_f - psi_b) / (2.0 * h);
  const double psi = psi1(x, human_index, u_human, spec, cfg.human_model);
  return psi_dot + spec.hocbf_gain * psi - margin;
}

inline JointState random_pair_state(Rng& rng, double dist_lo, double dist_hi,
                                    HumanModel model, double robot_v_lo = -0.5,
                                    double robot_v_hi = 2.0, double human_speed_hi = 1.6) {
  JointState x;
  x.robot = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-kPi, kPi),
             rng.uniform(robot_v_lo, robot_v_hi)};
  const double dist = rng.uniform(dist_lo, dist_hi);
  const double ang = rng.uniform(-kPi, kPi);
  HumanState h;
  h.px = x.robot.px + dist * std::cos(ang);
  h.py = x.robot.py + dist * std::sin(ang);
  if (model == HumanModel::kUnicycle) {
    const double th = rng.uniform(-kPi, kPi);
    const double v = rng.uniform(0.0, human_speed_hi);
    h.vx = v * std::cos(th);
    h.vy = v * std::sin(th);
  } else {
    h.vx = rng.uniform(-human_speed_hi, human_speed_hi);
    h.vy = rng.uniform(-human_speed_hi, human_speed_hi);
  }
  x.humans.push_back(h);
  return x;
}

inline Control random_control(Rng& rng, const Box& box) {
  return {rng.uniform(box.lo.x(), box.hi.x()), rng.uniform(box.lo.y(), box.hi.y())};
}

}  // namespace crcsf::test
