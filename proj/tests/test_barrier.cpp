#include <doctest.h>

#include "crcsf/barrier.hpp"
#include "crcsf/human_policy.hpp"
#include "crcsf/rng.hpp"
#include "oracles.hpp"

using namespace crcsf;

TEST_CASE("h_value examples") {
  BarrierSpec spec;
  spec.safety_radius = 1.0;
  CHECK(h_value({0, 0, 0, 0}, {2, 0, 0, 0}, spec) == doctest::Approx(3.0));
  CHECK(h_value({0, 0, 0, 0}, {1, 0, 0, 0}, spec) == doctest::Approx(0.0));
  CHECK(h_value({1, 2, 0, 0}, {4, 6, 0, 0}, spec) == doctest::Approx(24.0));
}

TEST_CASE("h_value symmetric under swapping positions") {
  BarrierSpec spec;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double ax = rng.uniform(-5, 5), ay = rng.uniform(-5, 5);
    const double bx = rng.uniform(-5, 5), by = rng.uniform(-5, 5);
    CHECK(h_value({ax, ay, 0, 0}, {bx, by, 0, 0}, spec) ==
          doctest::Approx(h_value({bx, by, 0, 0}, {ax, ay, 0, 0}, spec)));
  }
}

TEST_CASE("eta formula") {
  SUBCASE("dt = 0 gives 0") {
    LipschitzBundle b{1, 1, 1, 1, 1, 1};
    CHECK(eta(b, 0.0) == doctest::Approx(0.0));
  }
  SUBCASE("hand computation") {
    // dt * L_x * (L_h*L_g*B_u + L_h*L_f + L_kh)
    // = 0.1 * 1 * (2*1*1 + 2*1 + 1) = 0.5
    LipschitzBundle b;
    b.L_x = 1;
    b.L_h = 2;
    b.L_g = 1;
    b.B_u = 1;
    b.L_f = 1;
    b.L_kh = 1;
    CHECK(eta(b, 0.1) == doctest::Approx(0.5));
  }
  SUBCASE("linear in dt") {
    LipschitzBundle b{1.3, 0.7, 0.2, 2.5, 4.0, 1.5};
    CHECK(eta(b, 0.2) == doctest::Approx(2.0 * eta(b, 0.1)));
  }
  SUBCASE("nondecreasing in every field") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      LipschitzBundle b{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3),
                        rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0.1, 3)};
      const double base = eta(b, 0.1);
      for (int f = 0; f < 6; ++f) {
        LipschitzBundle bb = b;
        const double bump = rng.uniform(0.0, 1.0);
        switch (f) {
          case 0: bb.L_x += bump; break;
          case 1: bb.L_f += bump; break;
          case 2: bb.L_g += bump; break;
          case 3: bb.L_h += bump; break;
          case 4: bb.L_kh += bump; break;
          case 5: bb.B_u += bump; break;
        }
        CHECK(eta(bb, 0.1) >= base - 1e-15);
      }
    }
  }
}

TEST_CASE("certificate affine identity: certificate == a.u + b exactly") {
  Rng rng(13);
  for (HumanModel model : {HumanModel::kSingleIntegrator, HumanModel::kUnicycle}) {
    BarrierSpec spec;
    spec.kappa = 1.7;
    spec.hocbf_gain = 2.3;
    for (int i = 0; i < 200; ++i) {
      const JointState x = test::random_pair_state(rng, 0.4, 6.0, model);
      const Control ur{rng.uniform(-0.3, 0.3), rng.uniform(-1, 1)};
      const Control uh{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
      const double margin = rng.uniform(-2, 2);
      const ConstraintCoeffs cc = constraint_coefficients(x, 0, uh, spec, model, margin);
      const double cert = certificate_with_margin(x, ur, uh, 0, spec, model, margin);
      CHECK(cert == doctest::Approx(cc.a.dot(ur) + cc.b).epsilon(1e-14));
    }
  }
}

TEST_CASE("certificate is affine in the robot control") {
  Rng rng(29);
  BarrierSpec spec;
  const HumanModel model = HumanModel::kSingleIntegrator;
  const JointState x = test::random_pair_state(rng, 1.0, 3.0, model);
  const Control uh{0.3, -0.2};
  const Control u0 = Control::Zero();
  const double c0 = certificate_with_margin(x, u0, uh, 0, spec, model, 0.0);
  for (int i = 0; i < 50; ++i) {
    const Control a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Control b{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double s = rng.uniform(-2, 2);
    const double ca = certificate_with_margin(x, a, uh, 0, spec, model, 0.0) - c0;
    const double cb = certificate_with_margin(x, b, uh, 0, spec, model, 0.0) - c0;
    const double cab = certificate_with_margin(x, a + s * b, uh, 0, spec, model, 0.0) - c0;
    CHECK(cab == doctest::Approx(ca + s * cb).epsilon(1e-12));
  }
}

TEST_CASE("constraint boundary control gives zero certificate") {
  Rng rng(31);
  BarrierSpec spec;
  const JointState x = test::random_pair_state(rng, 1.2, 2.5, HumanModel::kSingleIntegrator);
  const Control uh{0.4, 0.1};
  const ConstraintCoeffs cc =
      constraint_coefficients(x, 0, uh, spec, HumanModel::kSingleIntegrator, 0.0);
  REQUIRE(cc.a.norm() > 1e-9);
  // pick u on the line a.u + b = 0
  const Control u_boundary = -cc.b / cc.a.squaredNorm() * cc.a;
  CHECK(certificate_with_margin(x, u_boundary, uh, 0, spec, HumanModel::kSingleIntegrator,
                                0.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("far receding agents have positive constraint offset") {
  BarrierSpec spec;
  JointState x;
  x.robot = {0, 0, kPi, 1.0};  // driving away
  x.humans.push_back({10, 0, 0.5, 0});
  const Control uh{0.5, 0.0};  // human also receding
  const ConstraintCoeffs cc =
      constraint_coefficients(x, 0, uh, spec, HumanModel::kSingleIntegrator, 0.0);
  CHECK(cc.b > 0.0);
  CHECK(cc.a.dot(Control::Zero()) + cc.b > 0.0);  // u = 0 feasible
}

TEST_CASE("symmetric head-on with zero robot speed has no steering sensitivity") {
  BarrierSpec spec;
  JointState x;
  x.robot = {0, 0, 0, 0.0};
  x.humans.push_back({3, 0, -1, 0});
  const ConstraintCoeffs cc =
      constraint_coefficients(x, 0, {-1, 0}, spec, HumanModel::kSingleIntegrator, 0.0);
  CHECK(cc.a.x() == doctest::Approx(0.0));
}

TEST_CASE("constraint coefficients match finite-difference certificate oracle") {
  Rng rng(37);
  for (HumanModel model : {HumanModel::kSingleIntegrator, HumanModel::kUnicycle}) {
    DynamicsConfig cfg;
    cfg.human_model = model;
    BarrierSpec spec;
    spec.kappa = 2.0;
    spec.hocbf_gain = 3.0;
    for (int i = 0; i < 60; ++i) {
      const JointState x = test::random_pair_state(rng, 0.8, 4.0, model, 0.1, 2.0, 1.4);
      const Control ur = test::random_control(rng, cfg.robot_control_bounds);
      const Control uh = test::random_control(rng, cfg.human_control_bounds);
      const double fd = test::fd_certificate(x, ur, uh, 0, spec, cfg, 0.0);
      const double an = certificate_with_margin(x, ur, uh, 0, spec, model, 0.0);
      CHECK(an == doctest::Approx(fd).epsilon(1e-5));

      // directional sensitivity along each control axis
      const ConstraintCoeffs cc = constraint_coefficients(x, 0, uh, spec, model, 0.0);
      const double h = 1e-5;
      for (int axis = 0; axis < 2; ++axis) {
        Control up = ur, um = ur;
        up[axis] += h;
        um[axis] -= h;
        const double slope = (test::fd_certificate(x, up, uh, 0, spec, cfg, 0.0) -
                              test::fd_certificate(x, um, uh, 0, spec, cfg, 0.0)) /
                             (2.0 * h);
        CHECK(slope == doctest::Approx(cc.a[axis]).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("neighborhood ordering and membership") {
  BarrierSpec spec;
  spec.neighborhood_radius = 3.0;
  JointState x;
  x.robot = {0, 0, 0, 0};

  SUBCASE("no humans within radius") {
    x.humans = {{5, 0, 0, 0}, {0, -7, 0, 0}};
    CHECK(neighborhood(x, spec).empty());
  }
  SUBCASE("ascending distance order") {
    x.humans = {{2, 0, 0, 0}, {1, 0, 0, 0}};
    const auto nb = neighborhood(x, spec);
    REQUIRE(nb.size() == 2);
    CHECK(nb[0] == 1);
    CHECK(nb[1] == 0);
  }
  SUBCASE("closed ball includes boundary") {
    x.humans = {{3.0, 0, 0, 0}};
    CHECK(neighborhood(x, spec).size() == 1);
  }
  SUBCASE("ties broken by index") {
    x.humans = {{2, 0, 0, 0}, {0, 2, 0, 0}};
    const auto nb = neighborhood(x, spec);
    REQUIRE(nb.size() == 2);
    CHECK(nb[0] == 0);
    CHECK(nb[1] == 1);
  }
}

TEST_CASE("estimate_max_slope on known functions") {
  Eigen::VectorXd lo(2), hi(2);
  lo << -1, -1;
  hi << 1, 1;
  SUBCASE("constant function") {
    const double s = estimate_max_slope([](const Eigen::VectorXd&) { return 3.5; }, lo, hi,
                                        500, 11);
    CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("linear function with slope 3") {
    const double s = estimate_max_slope(
        [](const Eigen::VectorXd& z) { return 3.0 * z[0]; }, lo, hi, 500, 11);
    CHECK(s >= 3.0 - 1e-6);
    CHECK(s <= 3.6 + 1e-9);
  }
  SUBCASE("degenerate box throws") {
    Eigen::VectorXd bad = lo;
    CHECK_THROWS_AS(
        estimate_max_slope([](const Eigen::VectorXd&) { return 0.0; }, lo, bad, 10, 1),
        std::invalid_argument);
  }
  SUBCASE("too few samples throws") {
    CHECK_THROWS_AS(
        estimate_max_slope([](const Eigen::VectorXd&) { return 0.0; }, lo, hi, 1, 1),
        std::invalid_argument);
  }
}

TEST_CASE("estimate_lipschitz determinism and basic shape") {
  const DynamicsConfig cfg = head_on_dynamics();
  const BarrierSpec spec = head_on_barrier();
  const LipschitzSampleBox box;
  const LipschitzBundle a = estimate_lipschitz(box, cfg, spec, 2000, 77);
  const LipschitzBundle b = estimate_lipschitz(box, cfg, spec, 2000, 77);
  CHECK(a.L_x == b.L_x);
  CHECK(a.L_h == b.L_h);
  CHECK(a.L_f == b.L_f);
  CHECK(a.L_g == b.L_g);
  CHECK(a.L_kh == doctest::Approx(spec.kappa * a.L_h));
  CHECK(a.B_u == doctest::Approx(std::hypot(cfg.robot_control_bounds.max_norm(),
                                            cfg.human_control_bounds.max_norm())));
  // constant control coupling for these models
  CHECK(a.L_g == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(a.L_x > 0.0);
  CHECK(a.L_h > 0.0);

  LipschitzSampleBox bad = box;
  bad.dist_max = bad.dist_min;
  CHECK_THROWS_AS(estimate_lipschitz(bad, cfg, spec, 100, 1), std::invalid_argument);
}

TEST_CASE("inter-sample safety: certificate >= 0 implies h stays nonnegative") {
  // Lemma-1 style invariant at m = 50 subdivisions over 500 premise-conditioned
  // random instances; the HOCBF analog of "x in the safe set" is h >= 0 and
  // psi1 >= 0
  for (HumanModel model : {HumanModel::kUnicycle, HumanModel::kSingleIntegrator}) {
    DynamicsConfig cfg = (model == HumanModel::kUnicycle) ? head_on_dynamics() : crowd_dynamics();
    const BarrierSpec spec = (model == HumanModel::kUnicycle) ? head_on_barrier() : crowd_barrier();
    const LipschitzSampleBox box;
    const LipschitzBundle bundle = estimate_lipschitz(box, cfg, spec, 4000, 123);
    const double margin = eta(bundle, cfg.dt);

    Rng rng(1234);
    int accepted = 0;
    int attempts = 0;
    while (accepted < 500 && attempts < 4000000) {
      ++attempts;
      const JointState x = test::random_pair_state(rng, 1.0, box.dist_max - 0.2, model,
                                                   box.robot_v_min + 0.1, box.robot_v_max - 0.1,
                                                   box.human_speed_max - 0.2);
      const Control ur = test::random_control(rng, cfg.robot_control_bounds);
      const Control uh = test::random_control(rng, cfg.human_control_bounds);
      if (h_value(x.robot, x.humans[0], spec) < 0.0) continue;
      if (psi1(x, 0, uh, spec, model) < 0.0) continue;
      if (certificate_with_margin(x, ur, uh, 0, spec, model, margin) < 0.0) continue;
      ++accepted;
      std::vector<Control> uhv{uh};
      const auto traj = substep_trajectory(x, ur, uhv, cfg, 50);
      for (const auto& s : traj) {
        CHECK(h_value(s.robot, s.humans[0], spec) >= -1e-6);
      }
    }
    REQUIRE(accepted == 500);
  }
}
