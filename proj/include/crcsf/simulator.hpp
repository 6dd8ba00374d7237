#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crcsf/calibration.hpp"
#include "crcsf/margin_model.hpp"
#include "crcsf/qp.hpp"

namespace crcsf {

struct PolicyVariant {
  enum class Kind { kCbfQp, kRcbfQp, kFixedCrcSf, kOnlineCrcSf };
  Kind kind = Kind::kCbfQp;
  double fixed_lambda_value = 0.0;       // fixed_crc_sf
  const MarginModel* model = nullptr;    // online_crc_sf

  static Kind parse_kind(const std::string& name);
  static std::string kind_name(Kind kind);
};

struct SimParams {
  LipschitzBundle bundle;
  CrcConfig crc;
  int sample_count = 10;
  int substeps = 10;  // collision-check subdivisions per interval
};

struct StepLog {
  Control u_robot = Control::Zero();
  double lambda_used = 0.0;
  double cert_true_min = 0.0;  // min realized certificate over the neighborhood
  double min_h_substep = 0.0;  // min h over all humans and substep states
  double h_next = 0.0;         // min h over humans at the next sampled instant
  bool feasible = true;
  bool constrained = false;    // at least one constraint was enforced
  double violation = 0.0;
};

struct EpisodeRecord {
  std::string scenario;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<JointState> states;  // horizon + 1 sampled states
  std::vector<StepLog> steps;
  bool collision = false;
  bool safety_violation = false;
  bool goal_success = false;
  int collision_step = -1;  // first step whose interval dips below R
  int goal_step = -1;       // first sampled instant within goal_radius
  double control_effort = 0.0;
  double control_smoothness = 0.0;
  int infeasible_steps = 0;
  double mean_lambda = 0.0;
};

/// One Algorithm-2 rollout: per step, sample predicted human actions, pick
/// the margin per variant, run the safety filter, advance the environment
/// with the realized human actions, and log substep safety.
EpisodeRecord run_episode(const Scenario& sc, const PolicyVariant& variant, const SimParams& p,
                          std::uint64_t seed);

struct MetricsSummary {
  double collision_rate = 0.0;
  double safety_violation_rate = 0.0;
  double goal_success_rate = 0.0;
  double mean_control_effort = 0.0;
  double mean_control_smoothness = 0.0;
  int trials = 0;
};

MetricsSummary summarize(const std::vector<EpisodeRecord>& records);

/// Frequency of h(x_{k+1}) < 0 over steps where the filter enforced at least
/// one constraint and reported feasibility.
double feasible_step_unsafe_rate(const std::vector<EpisodeRecord>& records);

std::vector<EpisodeRecord> evaluate(const ScenarioFactory& factory, const PolicyVariant& variant,
                                    int n_trials, std::uint64_t base_seed, const SimParams& p,
                                    int jobs = 0);

}  // namespace crcsf
