#include "crcsf/qp.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace crcsf {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kMultTol = 1e-10;
constexpr double kSlackPenalty = 1e4;

struct Candidate {
  Eigen::Vector2d u;
  std::vector<int> active;
  std::vector<double> mu;
};

bool lex_less(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  return a.y() < b.y();
}

// Exact minimizer of ||u - u_nom||^2 + rho * sum_{i in S} (a_i.u + b_i)^2
// over the box, by enumerating the nine box-face configurations.
Eigen::Vector2d solve_penalized(const Eigen::Vector2d& u_nom,
                                const std::vector<ConstraintCoeffs>& cons,
                                const std::vector<int>& S, const Box& box, double rho) {
  Eigen::Matrix2d H = Eigen::Matrix2d::Identity();
  Eigen::Vector2d g = -u_nom;
  for (int i : S) {
    H += rho * cons[static_cast<std::size_t>(i)].a * cons[static_cast<std::size_t>(i)].a.transpose();
    g += rho * cons[static_cast<std::size_t>(i)].b * cons[static_cast<std::size_t>(i)].a;
  }
  // objective ~ u'Hu + 2g'u; minimize restricted to each face configuration
  auto objective = [&](const Eigen::Vector2d& u) { return u.dot(H * u) + 2.0 * g.dot(u); };
  Eigen::Vector2d best = box.clamp(u_nom);
  double best_obj = objective(best);
  auto consider = [&](double x, double y) {
    Eigen::Vector2d u{x, y};
    if (!box.contains(u, 1e-12)) return;
    const double obj = objective(u);
    if (obj < best_obj - 1e-15 || (std::abs(obj - best_obj) <= 1e-15 && lex_less(u, best))) {
      best = u;
      best_obj = obj;
    }
  };
  // interior
  Eigen::Vector2d inner = H.ldlt().solve(-g);
  consider(inner.x(), inner.y());
  // edges: fix one coordinate
  for (int axis = 0; axis < 2; ++axis) {
    for (double bound : {box.lo[axis], box.hi[axis]}) {
      const int other = 1 - axis;
      // minimize over u[other] with u[axis] = bound
      const double denom = H(other, other);
      if (denom <= 0.0) continue;
      const double val = -(g[other] + H(other, axis) * bound) / denom;
      Eigen::Vector2d u;
      u[axis] = bound;
      u[other] = std::clamp(val, box.lo[other], box.hi[other]);
      consider(u.x(), u.y());
    }
  }
  // corners
  for (double x : {box.lo.x(), box.hi.x()})
    for (double y : {box.lo.y(), box.hi.y()}) consider(x, y);
  return best;
}

QpSolution solve_infeasible(const QpProblem& p) {
  const auto& cons = p.constraints;
  Eigen::Vector2d u = p.box.clamp(p.u_nom);
  auto pattern = [&](const Eigen::Vector2d& v) {
    std::vector<int> S;
    for (std::size_t i = 0; i < cons.size(); ++i) {
      if (cons[i].a.dot(v) + cons[i].b < 0.0) S.push_back(static_cast<int>(i));
    }
    return S;
  };
  auto penalty_obj = [&](const Eigen::Vector2d& v) {
    double obj = (v - p.u_nom).squaredNorm();
    for (const auto& c : cons) {
      const double r = c.a.dot(v) + c.b;
      if (r < 0.0) obj += kSlackPenalty * r * r;
    }
    return obj;
  };
  double best_obj = penalty_obj(u);
  std::vector<int> S = pattern(u);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::Vector2d u_new = solve_penalized(p.u_nom, cons, S, p.box, kSlackPenalty);
    const std::vector<int> S_new = pattern(u_new);
    const double obj_new = penalty_obj(u_new);
    if (obj_new < best_obj - 1e-15) {
      u = u_new;
      best_obj = obj_new;
    }
    if (S_new == S) break;
    S = S_new;
  }
  QpSolution sol;
  sol.u = u;
  sol.feasible = false;
  double viol = 0.0;
  for (const auto& c : cons) viol = std::max(viol, -(c.a.dot(u) + c.b));
  sol.violation = std::max(viol, 0.0);
  return sol;
}

}  // namespace

QpSolution solve(const QpProblem& p) {
  if (p.box.degenerate()) throw std::invalid_argument("solve: degenerate box");
  // all constraints in a.u + b >= 0 form; box faces appended after halfspaces
  std::vector<ConstraintCoeffs> all = p.constraints;
  const int n_half = static_cast<int>(p.constraints.size());
  all.push_back({{1.0, 0.0}, -p.box.lo.x()});
  all.push_back({{-1.0, 0.0}, p.box.hi.x()});
  all.push_back({{0.0, 1.0}, -p.box.lo.y()});
  all.push_back({{0.0, -1.0}, p.box.hi.y()});
  const int n = static_cast<int>(all.size());

  auto feasible_at = [&](const Eigen::Vector2d& u) {
    for (const auto& c : all) {
      if (c.a.dot(u) + c.b < -kFeasTol) return false;
    }
    return true;
  };

  std::optional<Candidate> best;
  double best_obj = std::numeric_limits<double>::infinity();
  auto consider = [&](Candidate cand) {
    if (!feasible_at(cand.u)) return;
    const double obj = (cand.u - p.u_nom).squaredNorm();
    if (obj < best_obj - 1e-14 ||
        (std::abs(obj - best_obj) <= 1e-14 && (!best || lex_less(cand.u, best->u)))) {
      best = std::move(cand);
      best_obj = obj;
    }
  };

  // unconstrained optimum
  consider({p.u_nom, {}, {}});

  // one active constraint: projection onto the line a.u + b = 0
  for (int i = 0; i < n; ++i) {
    const auto& c = all[static_cast<std::size_t>(i)];
    const double nrm2 = c.a.squaredNorm();
    if (nrm2 < 1e-24) continue;
    const double resid = c.a.dot(p.u_nom) + c.b;
    const double mu = -2.0 * resid / nrm2;
    if (mu < -kMultTol) continue;  // constraint satisfied at u_nom; projection not optimal
    Candidate cand;
    cand.u = p.u_nom - (resid / nrm2) * c.a;
    cand.active = {i};
    cand.mu = {std::max(mu, 0.0)};
    consider(std::move(cand));
  }

  // two active constraints: vertex of two lines
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& ci = all[static_cast<std::size_t>(i)];
      const auto& cj = all[static_cast<std::size_t>(j)];
      Eigen::Matrix2d A;
      A.row(0) = ci.a.transpose();
      A.row(1) = cj.a.transpose();
      const double det = A.determinant();
      if (std::abs(det) < 1e-12) continue;
      const Eigen::Vector2d u = A.inverse() * Eigen::Vector2d(-ci.b, -cj.b);
      // stationarity: 2(u - u_nom) = mu_i a_i + mu_j a_j
      const Eigen::Vector2d rhs = 2.0 * (u - p.u_nom);
      Eigen::Matrix2d M;
      M.col(0) = ci.a;
      M.col(1) = cj.a;
      const Eigen::Vector2d mu = M.inverse() * rhs;
      if (mu.x() < -kMultTol || mu.y() < -kMultTol) continue;
      Candidate cand;
      cand.u = u;
      cand.active = {i, j};
      cand.mu = {std::max(mu.x(), 0.0), std::max(mu.y(), 0.0)};
      consider(std::move(cand));
    }
  }

  if (!best) {
    QpSolution sol = solve_infeasible(p);
    (void)n_half;
    return sol;
  }
  QpSolution sol;
  sol.u = best->u;
  sol.feasible = true;
  sol.active_set = best->active;
  sol.multipliers = best->mu;
  sol.violation = 0.0;
  return sol;
}

FilterResult apply_filter(const JointState& x, const Control& u_nom,
                          std::span<const std::vector<Control>> action_samples,
                          FilterVariant variant, double margin_lambda, double eps,
                          const BarrierSpec& spec, const LipschitzBundle& bundle,
                          const DynamicsConfig& cfg) {
  if (variant == FilterVariant::kCrcSf && action_samples.empty()) {
    throw std::invalid_argument("apply_filter: crc_sf requires at least one action sample");
  }
  const std::vector<int> nbrs = neighborhood(x, spec);
  FilterResult out;
  if (nbrs.empty()) {
    out.u = cfg.robot_control_bounds.clamp(u_nom);
    return out;
  }
  double margin = 0.0;
  switch (variant) {
    case FilterVariant::kCbfQp:
      margin = 0.0;
      break;
    case FilterVariant::kRcbfQp:
      margin = eta(bundle, cfg.dt);
      break;
    case FilterVariant::kCrcSf:
      margin = eta(bundle, cfg.dt) + margin_lambda + eps;
      break;
  }
  QpProblem qp;
  qp.u_nom = u_nom;
  qp.box = cfg.robot_control_bounds;
  for (const auto& sample : action_samples) {
    for (int i : nbrs) {
      qp.constraints.push_back(constraint_coefficients(
          x, i, sample[static_cast<std::size_t>(i)], spec, cfg.human_model, margin));
    }
  }
  const QpSolution sol = solve(qp);
  out.u = sol.u;
  out.feasible = sol.feasible;
  out.violation = sol.violation;
  out.constraint_count = static_cast<int>(qp.constraints.size());
  return out;
}

}  // namespace crcsf
