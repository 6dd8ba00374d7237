#include "crcsf/config.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>

#include <json.hpp>

#include "crcsf/io.hpp"

namespace crcsf {

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& section, const std::string& field) {
  if (!j.contains(field)) throw ConfigError(section + "." + field + ": missing");
  return j.at(field);
}

double require_number(const json& j, const std::string& section, const std::string& field) {
  const json& v = require(j, section, field);
  if (!v.is_number()) throw ConfigError(section + "." + field + ": must be a number");
  return v.get<double>();
}

int require_int(const json& j, const std::string& section, const std::string& field) {
  const json& v = require(j, section, field);
  if (!v.is_number_integer()) throw ConfigError(section + "." + field + ": must be an integer");
  return v.get<int>();
}

std::uint64_t require_u64(const json& j, const std::string& section, const std::string& field) {
  const json& v = require(j, section, field);
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError(section + "." + field + ": must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string require_string(const json& j, const std::string& section, const std::string& field) {
  const json& v = require(j, section, field);
  if (!v.is_string()) throw ConfigError(section + "." + field + ": must be a string");
  return v.get<std::string>();
}

Box parse_box(const json& j, const std::string& path) {
  if (!j.contains("lo") || !j.contains("hi") || j.at("lo").size() != 2 || j.at("hi").size() != 2) {
    throw ConfigError(path + ": must have 2-element lo and hi arrays");
  }
  Box b;
  b.lo = {j.at("lo")[0].get<double>(), j.at("lo")[1].get<double>()};
  b.hi = {j.at("hi")[0].get<double>(), j.at("hi")[1].get<double>()};
  if (b.degenerate()) throw ConfigError(path + ": degenerate box");
  return b;
}

double opt_number(const json& j, const std::string& field, double fallback) {
  return j.contains(field) ? j.at(field).get<double>() : fallback;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;

  const json& sc = require(j, "config", "scenario");
  cfg.scenario.kind = require_string(sc, "scenario", "name");
  if (cfg.scenario.kind != "head_on" && cfg.scenario.kind != "crowd") {
    throw ConfigError("scenario.name: must be 'head_on' or 'crowd'");
  }
  cfg.scenario.n_humans = sc.contains("n_humans") ? sc.at("n_humans").get<int>() : 1;
  cfg.scenario.preset = sc.contains("preset") ? sc.at("preset").get<int>() : 1;
  if (cfg.scenario.kind == "crowd" && (cfg.scenario.preset < 1 || cfg.scenario.preset > 5)) {
    throw ConfigError("scenario.preset: must be in 1..5");
  }
  if (cfg.scenario.n_humans < 1) throw ConfigError("scenario.n_humans: must be >= 1");
  cfg.scenario.goal_radius = opt_number(sc, "goal_radius", 0.5);
  cfg.scenario.head_on.corridor_length = opt_number(sc, "corridor_length", 10.0);
  cfg.scenario.head_on.lateral_offset = opt_number(sc, "lateral_offset", 1.2);
  cfg.scenario.head_on.robot_speed = opt_number(sc, "robot_speed", 1.2);
  cfg.scenario.head_on.human_speed = opt_number(sc, "human_speed", 1.2);
  cfg.scenario.crowd.n_humans = cfg.scenario.n_humans;
  cfg.scenario.crowd.scene_half_extent = opt_number(sc, "scene_half_extent", 4.5);
  cfg.scenario.crowd.human_speed = opt_number(sc, "human_speed", 0.8);
  cfg.scenario.crowd.noise_sigma = opt_number(sc, "noise_sigma", 0.5);
  cfg.scenario.crowd.noise_clip = opt_number(sc, "noise_clip", 0.3);
  cfg.scenario.crowd.repulsion_gain = opt_number(sc, "repulsion_gain", 0.8);
  cfg.scenario.crowd.repulsion_radius = opt_number(sc, "repulsion_radius", 1.4);

  const json& dj = require(j, "config", "dynamics");
  DynamicsConfig& dyn = cfg.scenario.dynamics;
  dyn.dt = require_number(dj, "dynamics", "dt");
  if (!(dyn.dt > 0.0)) throw ConfigError("dynamics.dt: must be > 0");
  dyn.horizon_steps = require_int(dj, "dynamics", "horizon_steps");
  if (dyn.horizon_steps < 1) throw ConfigError("dynamics.horizon_steps: must be >= 1");
  dyn.robot_control_bounds =
      parse_box(require(dj, "dynamics", "robot_control_bounds"), "dynamics.robot_control_bounds");
  dyn.human_control_bounds =
      parse_box(require(dj, "dynamics", "human_control_bounds"), "dynamics.human_control_bounds");
  const std::string model = require_string(dj, "dynamics", "human_model");
  if (model == "single_integrator") {
    dyn.human_model = HumanModel::kSingleIntegrator;
  } else if (model == "unicycle") {
    dyn.human_model = HumanModel::kUnicycle;
  } else {
    throw ConfigError("dynamics.human_model: must be 'single_integrator' or 'unicycle'");
  }

  const json& bj = require(j, "config", "barrier");
  BarrierSpec& spec = cfg.scenario.barrier;
  spec.safety_radius = require_number(bj, "barrier", "safety_radius");
  spec.kappa = require_number(bj, "barrier", "kappa");
  spec.hocbf_gain = require_number(bj, "barrier", "hocbf_gain");
  spec.neighborhood_radius = require_number(bj, "barrier", "neighborhood_radius");
  if (!(spec.safety_radius > 0.0)) throw ConfigError("barrier.safety_radius: must be > 0");
  if (!(spec.kappa > 0.0)) throw ConfigError("barrier.kappa: must be > 0");
  if (!(spec.hocbf_gain > 0.0)) throw ConfigError("barrier.hocbf_gain: must be > 0");
  if (!(spec.neighborhood_radius >= spec.safety_radius)) {
    throw ConfigError("barrier.neighborhood_radius: must be >= safety_radius");
  }

  const json& lj = require(j, "config", "lipschitz");
  cfg.lipschitz.mode = require_string(lj, "lipschitz", "mode");
  if (cfg.lipschitz.mode == "estimate") {
    cfg.lipschitz.n_samples = require_int(lj, "lipschitz", "n_samples");
    cfg.lipschitz.seed = require_u64(lj, "lipschitz", "seed");
    if (lj.contains("box")) {
      const json& box = lj.at("box");
      cfg.lipschitz.box.dist_min = opt_number(box, "dist_min", cfg.lipschitz.box.dist_min);
      cfg.lipschitz.box.dist_max = opt_number(box, "dist_max", cfg.lipschitz.box.dist_max);
      cfg.lipschitz.box.robot_v_min = opt_number(box, "robot_v_min", cfg.lipschitz.box.robot_v_min);
      cfg.lipschitz.box.robot_v_max = opt_number(box, "robot_v_max", cfg.lipschitz.box.robot_v_max);
      cfg.lipschitz.box.human_speed_max =
          opt_number(box, "human_speed_max", cfg.lipschitz.box.human_speed_max);
    }
  } else if (cfg.lipschitz.mode == "explicit") {
    LipschitzBundle& b = cfg.lipschitz.bundle;
    b.L_x = require_number(lj, "lipschitz", "L_x");
    b.L_f = require_number(lj, "lipschitz", "L_f");
    b.L_g = require_number(lj, "lipschitz", "L_g");
    b.L_h = require_number(lj, "lipschitz", "L_h");
    b.L_kh = require_number(lj, "lipschitz", "L_kh");
    b.B_u = require_number(lj, "lipschitz", "B_u");
    if (b.L_x < 0 || b.L_f < 0 || b.L_g < 0 || b.L_h < 0 || b.L_kh < 0) {
      throw ConfigError("lipschitz: constants must be nonnegative");
    }
    const double joint_norm = std::hypot(dyn.robot_control_bounds.max_norm(),
                                         dyn.human_control_bounds.max_norm());
    if (!(b.B_u >= joint_norm - 1e-9)) {
      throw ConfigError("lipschitz.B_u: must cover the joint control box norm " +
                        format_double(joint_norm));
    }
  } else {
    throw ConfigError("lipschitz.mode: must be 'estimate' or 'explicit'");
  }

  const json& cj = require(j, "config", "crc");
  cfg.crc.alpha = require_number(cj, "crc", "alpha");
  cfg.crc.gamma = require_number(cj, "crc", "gamma");
  cfg.crc.beta = require_number(cj, "crc", "beta");
  cfg.crc.rho = require_number(cj, "crc", "rho");
  cfg.crc.loss_bound = require_number(cj, "crc", "loss_bound");
  if (!(cfg.crc.alpha > 0.0 && cfg.crc.alpha < 1.0)) throw ConfigError("crc.alpha: must be in (0,1)");
  if (!(cfg.crc.gamma > 0.0 && cfg.crc.gamma < 1.0)) throw ConfigError("crc.gamma: must be in (0,1)");
  if (!(cfg.crc.beta >= 0.0)) throw ConfigError("crc.beta: must be >= 0");
  if (!(cfg.crc.alpha + cfg.crc.beta < 1.0)) throw ConfigError("crc.beta: alpha + beta must be < 1");
  if (!(cfg.crc.rho > 0.0 && cfg.crc.rho < 1.0)) throw ConfigError("crc.rho: must be in (0,1)");

  const json& kj = require(j, "config", "calibration");
  cfg.calibration.total_trajectories = require_int(kj, "calibration", "total_trajectories");
  cfg.calibration.per_batch = require_int(kj, "calibration", "trajectories_per_batch");
  cfg.calibration.seed = require_u64(kj, "calibration", "seed");
  if (cfg.calibration.total_trajectories < 1 || cfg.calibration.per_batch < 1 ||
      cfg.calibration.total_trajectories % cfg.calibration.per_batch != 0) {
    throw ConfigError("calibration.trajectories_per_batch: must divide total_trajectories");
  }

  const json& mj = require(j, "config", "margin_model");
  cfg.margin_model.kind = require_string(mj, "margin_model", "kind");
  if (cfg.margin_model.kind != "mlp" && cfg.margin_model.kind != "table") {
    throw ConfigError("margin_model.kind: must be 'mlp' or 'table'");
  }
  cfg.margin_model.learning_rate = require_number(mj, "margin_model", "learning_rate");
  cfg.margin_model.epochs = require_int(mj, "margin_model", "epochs");
  cfg.margin_model.seed = require_u64(mj, "margin_model", "seed");
  cfg.margin_model.k_bins = mj.contains("k_bins") ? mj.at("k_bins").get<int>() : 16;
  cfg.margin_model.dist_bins = mj.contains("dist_bins") ? mj.at("dist_bins").get<int>() : 16;

  const json& ej = require(j, "config", "evaluation");
  const json& variants = require(ej, "evaluation", "variants");
  if (!variants.is_array() || variants.empty()) {
    throw ConfigError("evaluation.variants: must be a non-empty array");
  }
  cfg.evaluation.variants.clear();
  for (const auto& v : variants) {
    const std::string name = v.get<std::string>();
    PolicyVariant::parse_kind(name);  // validates
    cfg.evaluation.variants.push_back(name);
  }
  cfg.evaluation.n_trials = require_int(ej, "evaluation", "n_trials");
  if (cfg.evaluation.n_trials < 1) throw ConfigError("evaluation.n_trials: must be >= 1");
  cfg.evaluation.base_seed = require_u64(ej, "evaluation", "base_seed");
  cfg.evaluation.sample_count = require_int(ej, "evaluation", "sample_count");
  if (cfg.evaluation.sample_count < 1) throw ConfigError("evaluation.sample_count: must be >= 1");
  cfg.evaluation.dump_trajectories =
      ej.contains("dump_trajectories") ? ej.at("dump_trajectories").get<bool>() : false;

  cfg.output_dir = j.contains("output_dir") ? j.at("output_dir").get<std::string>() : "out";
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(text);
}

namespace {

json box_to_json(const Box& b) {
  return json{{"lo", {b.lo.x(), b.lo.y()}}, {"hi", {b.hi.x(), b.hi.y()}}};
}

}  // namespace

std::string canonical_config_json(const ExperimentConfig& cfg) {
  json j;
  json sc;
  sc["name"] = cfg.scenario.kind;
  sc["n_humans"] = cfg.scenario.n_humans;
  sc["preset"] = cfg.scenario.preset;
  sc["goal_radius"] = cfg.scenario.goal_radius;
  sc["corridor_length"] = cfg.scenario.head_on.corridor_length;
  sc["lateral_offset"] = cfg.scenario.head_on.lateral_offset;
  sc["robot_speed"] = cfg.scenario.head_on.robot_speed;
  sc["human_speed"] = (cfg.scenario.kind == "head_on") ? cfg.scenario.head_on.human_speed
                                                       : cfg.scenario.crowd.human_speed;
  sc["scene_half_extent"] = cfg.scenario.crowd.scene_half_extent;
  sc["noise_sigma"] = cfg.scenario.crowd.noise_sigma;
  sc["noise_clip"] = cfg.scenario.crowd.noise_clip;
  sc["repulsion_gain"] = cfg.scenario.crowd.repulsion_gain;
  sc["repulsion_radius"] = cfg.scenario.crowd.repulsion_radius;
  j["scenario"] = sc;

  const DynamicsConfig& dyn = cfg.scenario.dynamics;
  j["dynamics"] = json{{"dt", dyn.dt},
                       {"horizon_steps", dyn.horizon_steps},
                       {"robot_control_bounds", box_to_json(dyn.robot_control_bounds)},
                       {"human_control_bounds", box_to_json(dyn.human_control_bounds)},
                       {"human_model", dyn.human_model == HumanModel::kUnicycle
                                           ? "unicycle"
                                           : "single_integrator"}};
  const BarrierSpec& spec = cfg.scenario.barrier;
  j["barrier"] = json{{"safety_radius", spec.safety_radius},
                      {"kappa", spec.kappa},
                      {"hocbf_gain", spec.hocbf_gain},
                      {"neighborhood_radius", spec.neighborhood_radius}};
  json lj;
  lj["mode"] = cfg.lipschitz.mode;
  if (cfg.lipschitz.mode == "estimate") {
    lj["n_samples"] = cfg.lipschitz.n_samples;
    lj["seed"] = cfg.lipschitz.seed;
    lj["box"] = json{{"dist_min", cfg.lipschitz.box.dist_min},
                     {"dist_max", cfg.lipschitz.box.dist_max},
                     {"robot_v_min", cfg.lipschitz.box.robot_v_min},
                     {"robot_v_max", cfg.lipschitz.box.robot_v_max},
                     {"human_speed_max", cfg.lipschitz.box.human_speed_max}};
  } else {
    const LipschitzBundle& b = cfg.lipschitz.bundle;
    lj["L_x"] = b.L_x;
    lj["L_f"] = b.L_f;
    lj["L_g"] = b.L_g;
    lj["L_h"] = b.L_h;
    lj["L_kh"] = b.L_kh;
    lj["B_u"] = b.B_u;
  }
  j["lipschitz"] = lj;
  j["crc"] = json{{"alpha", cfg.crc.alpha},
                  {"gamma", cfg.crc.gamma},
                  {"beta", cfg.crc.beta},
                  {"rho", cfg.crc.rho},
                  {"loss_bound", cfg.crc.loss_bound}};
  j["calibration"] = json{{"total_trajectories", cfg.calibration.total_trajectories},
                          {"trajectories_per_batch", cfg.calibration.per_batch},
                          {"seed", cfg.calibration.seed}};
  j["margin_model"] = json{{"kind", cfg.margin_model.kind},
                           {"learning_rate", cfg.margin_model.learning_rate},
                           {"epochs", cfg.margin_model.epochs},
                           {"seed", cfg.margin_model.seed},
                           {"k_bins", cfg.margin_model.k_bins},
                           {"dist_bins", cfg.margin_model.dist_bins}};
  j["evaluation"] = json{{"variants", cfg.evaluation.variants},
                         {"n_trials", cfg.evaluation.n_trials},
                         {"base_seed", cfg.evaluation.base_seed},
                         {"sample_count", cfg.evaluation.sample_count},
                         {"dump_trajectories", cfg.evaluation.dump_trajectories}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  return to_hex(fnv1a64(canonical_config_json(cfg)));
}

ExperimentConfig default_head_on_config() {
  ExperimentConfig cfg;
  cfg.scenario.kind = "head_on";
  cfg.scenario.n_humans = 1;
  cfg.scenario.dynamics = head_on_dynamics();
  cfg.scenario.barrier = head_on_barrier();
  cfg.scenario.head_on = HeadOnParams{};
  cfg.scenario.goal_radius = 0.5;
  cfg.lipschitz.mode = "estimate";
  cfg.lipschitz.n_samples = 4000;
  cfg.lipschitz.seed = 2024;
  cfg.crc = CrcConfig{0.01, 0.99, 0.0, 0.9999, 0.0};
  cfg.calibration = CalibrationConfig{400, 100, 11};
  cfg.margin_model = MarginHyperparams{"mlp", 1e-2, 1500, 5, 16, 16};
  cfg.evaluation.variants = {"cbf_qp", "fixed_crc_sf", "online_crc_sf"};
  cfg.evaluation.n_trials = 100;
  cfg.evaluation.base_seed = 1000;
  cfg.evaluation.sample_count = 10;
  cfg.output_dir = "out/head_on";
  return cfg;
}

ExperimentConfig default_crowd_config(int preset) {
  ExperimentConfig cfg = default_head_on_config();
  cfg.scenario.kind = "crowd";
  cfg.scenario.preset = preset;
  cfg.scenario.n_humans = 4;
  cfg.scenario.crowd = CrowdParams{};
  cfg.scenario.crowd.n_humans = 4;
  cfg.scenario.dynamics = crowd_dynamics();
  cfg.scenario.barrier = crowd_barrier();
  cfg.calibration = CalibrationConfig{600, 200, 21};
  cfg.margin_model.epochs = 800;
  cfg.lipschitz.seed = 2025;
  cfg.output_dir = "out/crowd_" + std::to_string(preset);
  return cfg;
}

LipschitzBundle resolve_bundle(const ExperimentConfig& cfg) {
  if (cfg.lipschitz.mode == "explicit") return cfg.lipschitz.bundle;
  return estimate_lipschitz(cfg.lipschitz.box, cfg.scenario.dynamics, cfg.scenario.barrier,
                            cfg.lipschitz.n_samples, cfg.lipschitz.seed);
}

std::string RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["tool_version"] = tool_version;
  j["created_utc"] = created_utc;
  json files;
  for (const auto& [name, digest] : file_digests) files[name] = digest;
  j["files"] = files;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& dir, const std::string& cfg_hash,
                    const std::vector<std::string>& files) {
  RunManifest m;
  m.config_hash = cfg_hash;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  m.created_utc = buf;
  for (const auto& f : files) {
    m.file_digests.emplace_back(f, to_hex(fnv1a64(read_file(dir + "/" + f))));
  }
  write_file(dir + "/manifest.json", m.to_json());
}

void verify_manifest(const std::string& dir) {
  const json j = json::parse(read_file(dir + "/manifest.json"));
  for (const auto& [name, digest] : j.at("files").items()) {
    const std::string actual = to_hex(fnv1a64(read_file(dir + "/" + name)));
    if (actual != digest.get<std::string>()) {
      throw ConfigError("manifest: digest mismatch for " + name);
    }
  }
}

}  // namespace crcsf
