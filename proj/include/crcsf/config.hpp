#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crcsf/calibration.hpp"
#include "crcsf/crc.hpp"
#include "crcsf/margin_model.hpp"
#include "crcsf/simulator.hpp"

namespace crcsf {

inline constexpr const char* kToolVersion = "crcsf 1.0.0";

/// Config or input problem; the CLI maps this to exit code 2. what() names
/// the offending field as "section.field: reason".
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LipschitzSettings {
  std::string mode = "estimate";  // "estimate" or "explicit"
  // estimate mode
  LipschitzSampleBox box;
  int n_samples = 4000;
  std::uint64_t seed = 2024;
  // explicit mode
  LipschitzBundle bundle;
};

struct EvaluationConfig {
  std::vector<std::string> variants{"cbf_qp", "fixed_crc_sf", "online_crc_sf"};
  int n_trials = 100;
  std::uint64_t base_seed = 1000;
  int sample_count = 10;
  bool dump_trajectories = false;
};

struct ExperimentConfig {
  ScenarioFactory scenario;  // also carries dynamics + barrier
  LipschitzSettings lipschitz;
  CrcConfig crc;
  CalibrationConfig calibration;
  MarginHyperparams margin_model;
  EvaluationConfig evaluation;
  std::string output_dir = "out";
};

/// Parses and validates; throws ConfigError naming the field on any problem.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Canonical serialization: sorted keys, shortest round-trip numbers.
std::string canonical_config_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// Built-in experiment definitions mirroring configs/.
ExperimentConfig default_head_on_config();
ExperimentConfig default_crowd_config(int preset);

/// Resolves the bundle per the lipschitz settings (estimates it in
/// "estimate" mode; deterministic given the config).
LipschitzBundle resolve_bundle(const ExperimentConfig& cfg);

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string created_utc;
  std::vector<std::pair<std::string, std::string>> file_digests;  // name -> fnv1a64 hex

  std::string to_json() const;
};

/// Digests every named file under dir and writes manifest.json there.
void write_manifest(const std::string& dir, const std::string& cfg_hash,
                    const std::vector<std::string>& files);

/// Re-digests the files listed in a manifest; throws ConfigError on mismatch.
void verify_manifest(const std::string& dir);

}  // namespace crcsf
