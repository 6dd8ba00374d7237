#include <doctest.h>

#include "crcsf/qp.hpp"
#include "crcsf/human_policy.hpp"
#include "crcsf/rng.hpp"
#include "oracles.hpp"

using namespace crcsf;

namespace {

QpProblem random_problem(Rng& rng, int max_halfspaces = 4) {
  QpProblem p;
  p.box = Box{{-1, -1}, {1, 1}};
  p.u_nom = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
  const int n = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_halfspaces) + 1));
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (a.norm() < 0.1) a = {1, 0};
    p.constraints.push_back({a, rng.uniform(-0.8, 0.8)});
  }
  return p;
}

}  // namespace

TEST_CASE("unconstrained optimum inside box and halfspaces") {
  QpProblem p;
  p.box = Box{{-1, -1}, {1, 1}};
  p.u_nom = {0.2, -0.3};
  p.constraints.push_back({{1, 0}, 0.9});
  const QpSolution s = solve(p);
  CHECK(s.feasible);
  CHECK(s.u.x() == doctest::Approx(0.2));
  CHECK(s.u.y() == doctest::Approx(-0.3));
  CHECK(s.active_set.empty());
}

TEST_CASE("single halfspace projection") {
  // u1 >= 0.5 from u_nom = 0: projection onto the halfspace boundary
  QpProblem p;
  p.box = Box{{-1, -1}, {1, 1}};
  p.u_nom = {0, 0};
  p.constraints.push_back({{1, 0}, -0.5});
  const QpSolution s = solve(p);
  CHECK(s.feasible);
  CHECK(s.u.x() == doctest::Approx(0.5));
  CHECK(s.u.y() == doctest::Approx(0.0));
}

TEST_CASE("box clipping of the nominal") {
  QpProblem p;
  p.box = Box{{-1, -1}, {1, 1}};
  p.u_nom = {2.0, -3.0};
  const QpSolution s = solve(p);
  CHECK(s.feasible);
  CHECK(s.u.x() == doctest::Approx(1.0));
  CHECK(s.u.y() == doctest::Approx(-1.0));
}

TEST_CASE("infeasible problem reports violation and stays in box") {
  QpProblem p;
  p.box = Box{{-1, -1}, {1, 1}};
  p.u_nom = {0, 0};
  p.constraints.push_back({{1, 0}, -2.0});   // u1 >= 2 impossible in box
  const QpSolution s = solve(p);
  CHECK(!s.feasible);
  CHECK(s.violation > 0.9);
  CHECK(p.box.contains(s.u));
  // the slack solution pushes toward the violated constraint
  CHECK(s.u.x() == doctest::Approx(1.0));
}

TEST_CASE("KKT residuals at reported active set") {
  Rng rng(41);
  int feasible_count = 0;
  for (int i = 0; i < 500; ++i) {
    const QpProblem p = random_problem(rng);
    const QpSolution s = solve(p);
    if (!s.feasible) continue;
    ++feasible_count;
    // stationarity: 2(u - u_nom) = sum mu_i a_i over the active set
    std::vector<ConstraintCoeffs> all = p.constraints;
    all.push_back({{1, 0}, -p.box.lo.x()});
    all.push_back({{-1, 0}, p.box.hi.x()});
    all.push_back({{0, 1}, -p.box.lo.y()});
    all.push_back({{0, -1}, p.box.hi.y()});
    Eigen::Vector2d grad = 2.0 * (s.u - p.u_nom);
    for (std::size_t j = 0; j < s.active_set.size(); ++j) {
      const auto& c = all[static_cast<std::size_t>(s.active_set[j])];
      grad -= s.multipliers[j] * c.a;
      CHECK(s.multipliers[j] >= -1e-10);
      // complementarity: active constraints are tight
      CHECK(std::abs(c.a.dot(s.u) + c.b) <= 1e-8);
    }
    CHECK(grad.norm() <= 1e-8);
  }
  CHECK(feasible_count > 300);
}

TEST_CASE("solve matches grid oracle") {
  Rng rng(43);
  int compared = 0;
  for (int i = 0; i < 300; ++i) {
    const QpProblem p = random_problem(rng);
    const QpSolution s = solve(p);
    const test::GridQpResult g = test::grid_qp_oracle(p);
    if (!s.feasible || !g.found_feasible) continue;
    ++compared;
    CHECK((s.u - g.u).norm() <= 2e-3);
    CHECK((s.u - p.u_nom).squaredNorm() <= g.objective + 1e-6);
  }
  CHECK(compared > 150);
}

TEST_CASE("determinism: identical problems give bit-identical solutions") {
  Rng rng(47);
  for (int i = 0; i < 50; ++i) {
    const QpProblem p = random_problem(rng);
    const QpSolution a = solve(p);
    const QpSolution b = solve(p);
    CHECK(a.u.x() == b.u.x());
    CHECK(a.u.y() == b.u.y());
    CHECK(a.feasible == b.feasible);
    CHECK(a.active_set == b.active_set);
  }
}

TEST_CASE("monotone restriction: larger margin never enlarges the feasible set") {
  Rng rng(53);
  const DynamicsConfig cfg = head_on_dynamics();
  const BarrierSpec spec = head_on_barrier();
  for (int i = 0; i < 40; ++i) {
    const JointState x =
        test::random_pair_state(rng, 1.2, 3.5, cfg.human_model, 0.0, 1.8, 1.4);
    const Control uh = test::random_control(rng, cfg.human_control_bounds);
    const double m1 = rng.uniform(0.0, 5.0);
    const double m2 = m1 + rng.uniform(0.5, 5.0);
    const ConstraintCoeffs c1 = constraint_coefficients(x, 0, uh, spec, cfg.human_model, m1);
    const ConstraintCoeffs c2 = constraint_coefficients(x, 0, uh, spec, cfg.human_model, m2);
    // grid membership: every control feasible under the larger margin is
    // feasible under the smaller one
    for (int gi = 0; gi <= 20; ++gi) {
      for (int gj = 0; gj <= 20; ++gj) {
        Control u{-0.3 + 0.6 * gi / 20.0, -1.0 + 2.0 * gj / 20.0};
        if (c2.a.dot(u) + c2.b >= 0.0) {
          CHECK(c1.a.dot(u) + c1.b >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("apply_filter behavior") {
  const DynamicsConfig cfg = head_on_dynamics();
  const BarrierSpec spec = head_on_barrier();
  LipschitzBundle bundle{1.0, 1.0, 0.0, 2.0, 4.0, 1.5};

  SUBCASE("empty neighborhood returns clamped nominal") {
    JointState x;
    x.robot = {0, 0, 0, 1};
    x.humans.push_back({20, 20, 0, 0});
    std::vector<std::vector<Control>> samples{{Control{0, 0}}};
    const FilterResult r = apply_filter(x, {0.1, 2.0}, samples, FilterVariant::kCbfQp, 0.0,
                                        0.0, spec, bundle, cfg);
    CHECK(r.constraint_count == 0);
    CHECK(r.u.x() == doctest::Approx(0.1));
    CHECK(r.u.y() == doctest::Approx(1.0));  // clamped to the box
  }

  SUBCASE("crc_sf with lambda=0, eps=0 equals rcbf_qp on the same sample") {
    Rng rng(59);
    for (int i = 0; i < 30; ++i) {
      const JointState x = test::random_pair_state(rng, 1.2, 3.5, cfg.human_model);
      const Control un = test::random_control(rng, cfg.robot_control_bounds);
      const Control uh = test::random_control(rng, cfg.human_control_bounds);
      std::vector<std::vector<Control>> samples{{uh}};
      const FilterResult a =
          apply_filter(x, un, samples, FilterVariant::kRcbfQp, 0.0, 0.0, spec, bundle, cfg);
      const FilterResult b =
          apply_filter(x, un, samples, FilterVariant::kCrcSf, 0.0, 0.0, spec, bundle, cfg);
      CHECK(a.u.x() == b.u.x());
      CHECK(a.u.y() == b.u.y());
    }
  }

  SUBCASE("crc_sf requires a sample") {
    JointState x;
    x.robot = {0, 0, 0, 1};
    x.humans.push_back({2, 0, -1, 0});
    std::vector<std::vector<Control>> none;
    CHECK_THROWS_AS(apply_filter(x, {0, 0}, none, FilterVariant::kCrcSf, 0.0, 0.0, spec,
                                 bundle, cfg),
                    std::invalid_argument);
  }

  SUBCASE("larger lambda shrinks the feasible set and keeps certificate nonnegative") {
    Rng rng(61);
    int checked = 0;
    for (int i = 0; i < 200 && checked < 30; ++i) {
      const JointState x = test::random_pair_state(rng, 1.5, 3.0, cfg.human_model, 0.5, 1.5);
      const Control un = test::random_control(rng, cfg.robot_control_bounds);
      const Control uh = test::random_control(rng, cfg.human_control_bounds);
      std::vector<std::vector<Control>> samples{{uh}};
      const double lam = rng.uniform(0.0, 2.0);
      const double lam2 = lam + rng.uniform(0.5, 2.0);
      const FilterResult a =
          apply_filter(x, un, samples, FilterVariant::kCrcSf, lam, 0.0, spec, bundle, cfg);
      const FilterResult b =
          apply_filter(x, un, samples, FilterVariant::kCrcSf, lam2, 0.0, spec, bundle, cfg);
      if (!a.feasible || !b.feasible) continue;
      ++checked;
      const double margin2 = eta(bundle, cfg.dt) + lam2;
      // returned control satisfies its own constraint
      CHECK(certificate_with_margin(x, b.u, uh, 0, spec, cfg.human_model, margin2) >= -1e-9);
      // C_{lambda2} subset of C_{lambda}: grid membership
      const double margin1 = eta(bundle, cfg.dt) + lam;
      for (int gi = 0; gi <= 15; ++gi) {
        for (int gj = 0; gj <= 15; ++gj) {
          Control u{-0.3 + 0.6 * gi / 15.0, -1.0 + 2.0 * gj / 15.0};
          if (certificate_with_margin(x, u, uh, 0, spec, cfg.human_model, margin2) >= 0.0) {
            CHECK(certificate_with_margin(x, u, uh, 0, spec, cfg.human_model, margin1) >=
                  0.0);
          }
        }
      }
    }
    CHECK(checked == 30);
  }
}
