#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "crcsf/barrier.hpp"
#include "crcsf/dynamics.hpp"

namespace crcsf {

/// min ||u - u_nom||^2  s.t.  a_i.dot(u) + b_i >= 0 for all i,  u in box.
struct QpProblem {
  Eigen::Vector2d u_nom = Eigen::Vector2d::Zero();
  std::vector<ConstraintCoeffs> constraints;
  Box box;
};

struct QpSolution {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  bool feasible = true;
  /// Indices of the constraints defining the optimum: 0..n-1 are the
  /// halfspaces, n..n+3 the box faces (x-lo, x-hi, y-lo, y-hi).
  std::vector<int> active_set;
  /// Lagrange multipliers matching active_set (gradient convention
  /// 2(u - u_nom) = sum mu_i a_i).
  std::vector<double> multipliers;
  /// Max violated amount of the original halfspace constraints at u;
  /// 0 when feasible.
  double violation = 0.0;
};

/// Exact minimizer by active-set enumeration over all subsets of size <= 2
/// (the control is 2-D, so at most two constraints can be active at a
/// vertex). When the feasible set is empty, falls back to a slack-relaxed
/// problem min ||u - u_nom||^2 + rho * sum(deficit_i^2) over the box and
/// reports the residual violation. Deterministic; ties broken by the
/// lexicographically smallest u.
QpSolution solve(const QpProblem& p);

enum class FilterVariant { kCbfQp, kRcbfQp, kCrcSf };

struct FilterResult {
  Control u = Control::Zero();
  bool feasible = true;
  double violation = 0.0;
  int constraint_count = 0;  // 0 means the neighborhood was empty
};

/// Builds one constraint per (neighborhood human, predicted action sample)
/// with margin 0 (cbf_qp), eta (rcbf_qp) or eta + lambda + eps (crc_sf) and
/// solves the safety-filter QP. action_samples is indexed
/// [sample][human]; crc_sf requires at least one sample.
FilterResult apply_filter(const JointState& x, const Control& u_nom,
                          std::span<const std::vector<Control>> action_samples,
                          FilterVariant variant, double margin_lambda, double eps,
                          const BarrierSpec& spec, const LipschitzBundle& bundle,
                          const DynamicsConfig& cfg);

}  // namespace crcsf
