#include <doctest.h>

#include "crcsf/human_policy.hpp"
#include "crcsf/rng.hpp"

using namespace crcsf;

TEST_CASE("integrator nominal: human at goal with zero noise gives zero control") {
  DynamicsConfig dyn = crowd_dynamics();
  JointState x;
  x.robot = {10, 10, 0, 0};
  x.humans.push_back({1.5, -2.0, 0, 0});
  HumanPolicyConfig cfg;
  cfg.goal = {1.5, -2.0};
  cfg.noise_sigma = 0.0;
  Rng rng(1);
  const Control u = realized_action(x, 0, cfg, dyn, rng);
  CHECK(u.norm() == doctest::Approx(0.0));
}

TEST_CASE("integrator nominal points at the goal with proportional magnitude") {
  DynamicsConfig dyn = crowd_dynamics();
  JointState x;
  x.robot = {10, 10, 0, 0};
  x.humans.push_back({0, 0, 0, 0});
  HumanPolicyConfig cfg;
  cfg.goal = {0.9, 0.0};  // due east, inside the box at gain 1
  cfg.gain = 1.0;
  cfg.noise_sigma = 0.0;
  Rng rng(1);
  const Control u = realized_action(x, 0, cfg, dyn, rng);
  CHECK(u.x() == doctest::Approx(0.9));
  CHECK(u.y() == doctest::Approx(0.0));

  // far goal saturates at the box bound
  cfg.goal = {9.0, 0.0};
  const Control u2 = realized_action(x, 0, cfg, dyn, rng);
  CHECK(u2.x() == doctest::Approx(dyn.human_control_bounds.hi.x()));
}

TEST_CASE("clipped noise magnitude and moments match the Monte-Carlo oracle") {
  // sigma = 1.2 clipped to +-0.5: clip always respected; the empirical std
  // matches an independent reference draw (analytically ~0.442)
  Rng oracle_rng(999);
  double oracle_m2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = std::clamp(1.2 * oracle_rng.normal(), -0.5, 0.5);
    oracle_m2 += x * x;
  }
  const double oracle_std = std::sqrt(oracle_m2 / n);

  DynamicsConfig dyn = head_on_dynamics();
  dyn.human_control_bounds = Box{{-10, -10}, {10, 10}};  // keep the box out of the way
  JointState x;
  x.robot = {100, 100, 0, 0};
  x.humans.push_back({2.0, 0.0, 1.0, 0.0});
  HumanPolicyConfig cfg;
  cfg.goal = {2.0, 0.0};  // at goal: nominal steering/accel ~ -accel_gain*v only
  cfg.noise_sigma = 1.2;
  cfg.noise_clip = 0.5;
  cfg.accel_gain = 0.0;
  cfg.heading_gain = 0.0;
  cfg.gain = 0.0;
  Rng rng(7);
  double m2 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Control u = realized_action(x, 0, cfg, dyn, rng);
    CHECK(std::abs(u.x()) <= 0.5 + 1e-12);
    CHECK(std::abs(u.y()) <= 0.5 + 1e-12);
    m2 += u.x() * u.x();
  }
  const double emp_std = std::sqrt(m2 / 10000);
  CHECK(emp_std == doctest::Approx(oracle_std).epsilon(0.05));
  CHECK(emp_std == doctest::Approx(0.442).epsilon(0.05));
}

TEST_CASE("sample_predicted with zero noise equals the nominal rollout") {
  DynamicsConfig dyn = crowd_dynamics();
  JointState x;
  x.robot = {10, 10, 0, 0};
  x.humans.push_back({0, 0, 0, 0});
  std::vector<HumanPolicyConfig> cfgs(1);
  cfgs[0].goal = {3.0, 1.0};
  cfgs[0].noise_sigma = 0.0;
  Rng rng(5);
  const PredictedActions pred = sample_predicted(x, 5, 3, cfgs, dyn, rng);
  REQUIRE(pred.sample_count == 3);
  REQUIRE(pred.horizon == 5);
  for (int s = 1; s < 3; ++s) {
    for (int t = 0; t < 5; ++t) {
      CHECK(pred.actions[static_cast<std::size_t>(s)][0][static_cast<std::size_t>(t)] ==
            pred.actions[0][0][static_cast<std::size_t>(t)]);
    }
  }
  // first step equals the realized action under sigma = 0
  Rng rng2(6);
  const Control real = realized_action(x, 0, cfgs[0], dyn, rng2);
  CHECK(pred.actions[0][0][0].x() == doctest::Approx(real.x()));
  CHECK(pred.actions[0][0][0].y() == doctest::Approx(real.y()));
}

TEST_CASE("matching seeds give identical prediction and realization") {
  DynamicsConfig dyn = crowd_dynamics();
  JointState x;
  x.robot = {10, 10, 0, 0};
  x.humans.push_back({0.5, 0.5, 0, 0});
  std::vector<HumanPolicyConfig> cfgs(1);
  cfgs[0].goal = {-2.0, 1.0};
  cfgs[0].noise_sigma = 0.8;
  cfgs[0].noise_clip = 0.5;
  Rng a(42), b(42);
  const PredictedActions pred = sample_predicted(x, 1, 1, cfgs, dyn, a);
  const Control real = realized_action(x, 0, cfgs[0], dyn, b);
  CHECK(pred.actions[0][0][0].x() == real.x());
  CHECK(pred.actions[0][0][0].y() == real.y());
}

TEST_CASE("independent streams produce spread matching a two-draw oracle") {
  DynamicsConfig dyn = crowd_dynamics();
  dyn.human_control_bounds = Box{{-10, -10}, {10, 10}};
  JointState x;
  x.robot = {10, 10, 0, 0};
  x.humans.push_back({0, 0, 0, 0});
  std::vector<HumanPolicyConfig> cfgs(1);
  cfgs[0].goal = {0.0, 0.0};
  cfgs[0].gain = 0.0;
  cfgs[0].noise_sigma = 0.9;
  cfgs[0].noise_clip = 0.5;
  Rng pred_rng(100), real_rng(200);
  double mean_abs = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const PredictedActions p = sample_predicted(x, 1, 1, cfgs, dyn, pred_rng);
    const Control r = realized_action(x, 0, cfgs[0], dyn, real_rng);
    mean_abs += std::abs(p.actions[0][0][0].x() - r.x());
  }
  mean_abs /= n;
  // oracle: mean |X - Y| of two independent clipped gaussians
  Rng o(300);
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = std::clamp(0.9 * o.normal(), -0.5, 0.5);
    const double b = std::clamp(0.9 * o.normal(), -0.5, 0.5);
    oracle += std::abs(a - b);
  }
  oracle /= n;
  CHECK(mean_abs > 0.1);
  CHECK(mean_abs == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("head_on scenario construction") {
  SUBCASE("mirrored goals for opposite side draws") {
    // find two seeds with opposite sides
    Scenario a = head_on_scenario(1);
    std::uint64_t seed_b = 2;
    Scenario b = head_on_scenario(seed_b);
    while ((a.humans[0].goal.y() > 0) == (b.humans[0].goal.y() > 0)) {
      b = head_on_scenario(++seed_b);
    }
    CHECK(a.humans[0].goal.y() == doctest::Approx(-b.humans[0].goal.y()));
    CHECK(a.humans[0].goal.x() == doctest::Approx(b.humans[0].goal.x()));
  }
  SUBCASE("side frequency is a fair coin") {
    int left = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      if (head_on_scenario(s).humans[0].goal.y() > 0) ++left;
    }
    CHECK(left > 450);
    CHECK(left < 550);
  }
  SUBCASE("initial separation equals the corridor length") {
    HeadOnParams p;
    const Scenario sc = head_on_scenario(3, p);
    const double sep = (sc.initial_state.robot.position() -
                        sc.initial_state.humans[0].position()).norm();
    CHECK(sep == doctest::Approx(p.corridor_length));
    CHECK(sc.dynamics.human_model == HumanModel::kUnicycle);
    // facing each other on the corridor axis
    CHECK(sc.initial_state.robot.theta == doctest::Approx(0.0));
    CHECK(human_as_unicycle(sc.initial_state.humans[0]).theta == doctest::Approx(kPi));
  }
}

TEST_CASE("crowd scenario construction") {
  SUBCASE("single human reduces to a crossing") {
    const Scenario sc = crowd_scenario(1, 1, 7);
    CHECK(sc.initial_state.humans.size() == 1);
    CHECK(sc.dynamics.human_model == HumanModel::kSingleIntegrator);
  }
  SUBCASE("pairwise start distances exceed 2R") {
    for (int preset = 1; preset <= 5; ++preset) {
      const Scenario sc = crowd_scenario(preset, 6, 11);
      const double min_sep = 2.0 * sc.barrier.safety_radius;
      for (std::size_t i = 0; i < sc.initial_state.humans.size(); ++i) {
        for (std::size_t j = i + 1; j < sc.initial_state.humans.size(); ++j) {
          const double d = (sc.initial_state.humans[i].position() -
                            sc.initial_state.humans[j].position()).norm();
          CHECK(d > min_sep);
        }
      }
    }
  }
  SUBCASE("presets are reproducible bit-exactly") {
    for (int preset = 1; preset <= 5; ++preset) {
      const Scenario a = crowd_scenario(preset, 5, 99);
      const Scenario b = crowd_scenario(preset, 5, 99);
      REQUIRE(a.initial_state.humans.size() == b.initial_state.humans.size());
      for (std::size_t i = 0; i < a.initial_state.humans.size(); ++i) {
        CHECK(a.initial_state.humans[i].px == b.initial_state.humans[i].px);
        CHECK(a.initial_state.humans[i].py == b.initial_state.humans[i].py);
        CHECK(a.humans[i].goal.x() == b.humans[i].goal.x());
      }
      CHECK(a.initial_state.robot.px == b.initial_state.robot.px);
    }
    // distinct presets differ
    CHECK(crowd_scenario(1, 5, 99).initial_state.robot.px !=
          crowd_scenario(2, 5, 99).initial_state.robot.px);
  }
  SUBCASE("invalid preset throws") {
    CHECK_THROWS_AS(crowd_scenario(0, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(crowd_scenario(6, 5, 1), std::invalid_argument);
  }
}

TEST_CASE("emitted controls always respect the control box") {
  Rng rng(17);
  for (HumanModel model : {HumanModel::kSingleIntegrator, HumanModel::kUnicycle}) {
    DynamicsConfig dyn = (model == HumanModel::kUnicycle) ? head_on_dynamics() : crowd_dynamics();
    std::vector<HumanPolicyConfig> cfgs(2);
    cfgs[0].goal = {3, 2};
    cfgs[1].goal = {-2, -1};
    cfgs[0].repulsion_gain = cfgs[1].repulsion_gain = 0.8;
    cfgs[0].repulsion_radius = cfgs[1].repulsion_radius = 1.4;
    JointState x;
    x.robot = {0, 0, 0, 1};
    x.humans.push_back({1, 0.5, 0.2, 0.1});
    x.humans.push_back({0.5, 1.2, -0.1, 0.3});
    Rng policy_rng(23);
    for (int step = 0; step < 300; ++step) {
      std::vector<Control> controls;
      for (int i = 0; i < 2; ++i) {
        const Control u = realized_action(x, i, cfgs[static_cast<std::size_t>(i)], dyn, policy_rng);
        CHECK(dyn.human_control_bounds.contains(u));
        controls.push_back(u);
      }
      x = step_joint(x, {0, 0}, controls, dyn);
    }
  }
}
