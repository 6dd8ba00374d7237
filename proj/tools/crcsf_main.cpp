#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "crcsf/artifacts.hpp"
#include "crcsf/config.hpp"
#include "crcsf/io.hpp"

namespace fs = std::filesystem;
using namespace crcsf;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
};

ExperimentConfig load_or_default(const GlobalOpts& g, const std::string& fallback_scenario) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    cfg = load_config(g.config_path);
  } else if (fallback_scenario == "head_on") {
    cfg = default_head_on_config();
  } else {
    throw ConfigError("config: --config is required for this subcommand");
  }
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  return cfg;
}

void apply_scenario_override(ExperimentConfig& cfg, const std::string& scenario) {
  if (scenario.empty()) return;
  if (scenario == "head_on") {
    const ExperimentConfig base = default_head_on_config();
    cfg.scenario = base.scenario;
  } else if (scenario.rfind("crowd_", 0) == 0) {
    const int preset = std::stoi(scenario.substr(6));
    const ExperimentConfig base = default_crowd_config(preset);
    cfg.scenario = base.scenario;
  } else {
    throw ConfigError("scenario: unknown name '" + scenario + "'");
  }
}

void run_calibrate(const ExperimentConfig& cfg, int jobs) {
  fs::create_directories(cfg.output_dir);
  const LipschitzBundle bundle = resolve_bundle(cfg);
  const CalibrationOutput out =
      run_calibration(cfg.scenario, cfg.calibration, cfg.crc, bundle, jobs);
  const LambdaResult fixed = fixed_lambda(out, cfg.crc);

  std::vector<std::string> files;
  write_file(cfg.output_dir + "/training_set.csv", training_set_csv(out.rows));
  files.push_back("training_set.csv");
  for (std::size_t b = 0; b < out.pairs.size(); ++b) {
    const std::string name = "certificates_batch_" + std::to_string(b) + ".csv";
    write_file(cfg.output_dir + "/" + name, certificates_csv(static_cast<int>(b), out.pairs[b]));
    files.push_back(name);
  }
  write_file(cfg.output_dir + "/fixed_lambda.json",
             fixed_lambda_json(fixed, out.loss_bound_used));
  files.push_back("fixed_lambda.json");
  write_file(cfg.output_dir + "/lipschitz.json", bundle_json(bundle));
  files.push_back("lipschitz.json");
  write_manifest(cfg.output_dir, config_hash(cfg), files);

  std::cout << "calibrate: " << out.rows.size() << " training rows, loss bound "
            << format_double(out.loss_bound_used) << ", clamped " << out.clamped_count << "/"
            << out.total_samples << ", fixed lambda " << format_double(fixed.lambda)
            << (fixed.alpha_unattainable ? " (alpha unattainable)" : "") << "\n";
}

void run_train_margin(const ExperimentConfig& cfg) {
  const std::string ts_path = cfg.output_dir + "/training_set.csv";
  if (!fs::exists(ts_path)) throw ConfigError("train-margin: missing " + ts_path);
  const std::vector<TrainingRow> rows = parse_training_set_csv(read_file(ts_path));
  auto [model, report] = train_margin_model(rows, cfg.margin_model);
  model.config_hash = config_hash(cfg);
  write_file(cfg.output_dir + "/margin_model.json", margin_model_to_json(model));
  nlohmann::json rj;
  rj["train_mse"] = report.train_mse;
  rj["validation_mse"] = report.validation_mse;
  rj["epochs"] = report.epochs;
  rj["seed"] = report.seed;
  write_file(cfg.output_dir + "/train_report.json", rj.dump(2) + "\n");
  std::cout << "train-margin: kind " << cfg.margin_model.kind << ", train MSE "
            << format_double(report.train_mse) << ", validation MSE "
            << format_double(report.validation_mse) << "\n";
}

struct EvalArtifacts {
  std::optional<LambdaResult> fixed;
  std::optional<MarginModel> model;
};

EvalArtifacts load_eval_artifacts(const ExperimentConfig& cfg,
                                  const std::vector<std::string>& variants) {
  EvalArtifacts art;
  for (const auto& v : variants) {
    const PolicyVariant::Kind kind = PolicyVariant::parse_kind(v);
    if (kind == PolicyVariant::Kind::kFixedCrcSf && !art.fixed) {
      const std::string path = cfg.output_dir + "/fixed_lambda.json";
      if (!fs::exists(path)) throw ConfigError("evaluate: missing " + path + " (run calibrate)");
      art.fixed = parse_fixed_lambda_json(read_file(path));
    }
    if (kind == PolicyVariant::Kind::kOnlineCrcSf && !art.model) {
      const std::string path = cfg.output_dir + "/margin_model.json";
      if (!fs::exists(path)) {
        throw ConfigError("evaluate: missing " + path + " (run train-margin)");
      }
      art.model = margin_model_from_json(read_file(path));
    }
  }
  return art;
}

std::vector<std::pair<std::string, MetricsSummary>> run_evaluate(
    const ExperimentConfig& cfg, const std::vector<std::string>& variants, int jobs,
    bool dump_trajectories, std::vector<EpisodeRecord>* all_records_out = nullptr) {
  fs::create_directories(cfg.output_dir);
  const LipschitzBundle bundle = resolve_bundle(cfg);
  const EvalArtifacts art = load_eval_artifacts(cfg, variants);

  SimParams params;
  params.bundle = bundle;
  params.crc = cfg.crc;
  params.sample_count = cfg.evaluation.sample_count;

  std::vector<EpisodeRecord> all_records;
  std::vector<std::pair<std::string, MetricsSummary>> summaries;
  for (const auto& vname : variants) {
    PolicyVariant variant;
    variant.kind = PolicyVariant::parse_kind(vname);
    if (variant.kind == PolicyVariant::Kind::kFixedCrcSf) {
      variant.fixed_lambda_value = art.fixed->lambda;
    }
    if (variant.kind == PolicyVariant::Kind::kOnlineCrcSf) variant.model = &*art.model;
    std::vector<EpisodeRecord> records = evaluate(cfg.scenario, variant, cfg.evaluation.n_trials,
                                                  cfg.evaluation.base_seed, params, jobs);
    summaries.emplace_back(vname, summarize(records));
    if (dump_trajectories) {
      for (const auto& r : records) {
        write_file(cfg.output_dir + "/trajectory_" + std::to_string(r.seed) + ".jsonl",
                   trajectory_jsonl(r));
      }
    }
    for (auto& r : records) all_records.push_back(std::move(r));
  }
  write_file(cfg.output_dir + "/episodes.csv", episodes_csv(all_records));
  write_file(cfg.output_dir + "/summary.csv", summary_csv(summaries));
  std::cout << format_summary_table(summaries);
  if (all_records_out) *all_records_out = std::move(all_records);
  return summaries;
}

void run_estimate_lipschitz(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const LipschitzBundle b = estimate_lipschitz(cfg.lipschitz.box, cfg.scenario.dynamics,
                                               cfg.scenario.barrier, cfg.lipschitz.n_samples,
                                               cfg.lipschitz.seed);
  const std::string text = bundle_json(b);
  write_file(cfg.output_dir + "/lipschitz.json", text);
  std::cout << text << "eta(dt=" << format_double(cfg.scenario.dynamics.dt)
            << ") = " << format_double(eta(b, cfg.scenario.dynamics.dt)) << "\n";
}

void run_repro_paper(const GlobalOpts& g) {
  const std::string root = g.out_dir.empty() ? std::string("out/repro") : g.out_dir;
  struct GroupRow {
    std::string group;
    std::string variant;
    MetricsSummary summary;
  };
  std::vector<GroupRow> report;

  auto pipeline = [&](ExperimentConfig cfg, const std::string& group,
                      std::vector<std::pair<std::string, MetricsSummary>>& acc) {
    if (g.seed) {
      cfg.evaluation.base_seed = *g.seed;
      cfg.calibration.seed = derive_seed(*g.seed, 0x5eed);
    }
    cfg.evaluation.n_trials = 100;
    std::cout << "== " << group << ": " << cfg.scenario.kind
              << (cfg.scenario.kind == "crowd" ? "_" + std::to_string(cfg.scenario.preset) : "")
              << " ==\n";
    run_calibrate(cfg, g.jobs);
    run_train_margin(cfg);
    auto summaries = run_evaluate(cfg, cfg.evaluation.variants, g.jobs, false);
    for (auto& s : summaries) acc.push_back(std::move(s));
  };

  {
    ExperimentConfig cfg = default_head_on_config();
    cfg.output_dir = root + "/head_on";
    std::vector<std::pair<std::string, MetricsSummary>> acc;
    pipeline(cfg, "single_agent", acc);
    for (const auto& [name, s] : acc) report.push_back({"single_agent", name, s});
  }
  {
    // five crowd presets; the multi-agent group reports per-variant averages
    std::vector<std::pair<std::string, MetricsSummary>> acc;
    for (int preset = 1; preset <= 5; ++preset) {
      ExperimentConfig cfg = default_crowd_config(preset);
      cfg.output_dir = root + "/crowd_" + std::to_string(preset);
      pipeline(cfg, "multi_agent", acc);
    }
    for (const auto& vname : default_crowd_config(1).evaluation.variants) {
      MetricsSummary avg;
      int count = 0;
      for (const auto& [name, s] : acc) {
        if (name != vname) continue;
        avg.collision_rate += s.collision_rate;
        avg.safety_violation_rate += s.safety_violation_rate;
        avg.goal_success_rate += s.goal_success_rate;
        avg.mean_control_effort += s.mean_control_effort;
        avg.mean_control_smoothness += s.mean_control_smoothness;
        avg.trials = s.trials;
        ++count;
      }
      avg.collision_rate /= count;
      avg.safety_violation_rate /= count;
      avg.goal_success_rate /= count;
      avg.mean_control_effort /= count;
      avg.mean_control_smoothness /= count;
      report.push_back({"multi_agent", vname, avg});
    }
  }

  std::ostringstream csv;
  csv << "group,variant,collision_rate,safety_violation_rate,goal_success_rate,"
         "mean_control_effort,mean_control_smoothness,trials\n";
  for (const auto& row : report) {
    csv << row.group << "," << row.variant << "," << format_double(row.summary.collision_rate)
        << "," << format_double(row.summary.safety_violation_rate) << ","
        << format_double(row.summary.goal_success_rate) << ","
        << format_double(row.summary.mean_control_effort) << ","
        << format_double(row.summary.mean_control_smoothness) << "," << row.summary.trials
        << "\n";
  }
  fs::create_directories(root);
  write_file(root + "/repro_report.csv", csv.str());

  std::cout << "\n== combined report ==\n";
  for (const std::string group : {"multi_agent", "single_agent"}) {
    std::vector<std::pair<std::string, MetricsSummary>> rows;
    for (const auto& r : report) {
      if (r.group == group) rows.emplace_back(r.variant, r.summary);
    }
    std::cout << group << ":\n" << format_summary_table(rows);
  }
  std::cout << "report written to " << root << "/repro_report.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal-risk-controlled CBF safety filtering benchmark"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--out", g.out_dir, "output directory override");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "seed override");
  app.add_option("--jobs", g.jobs, "parallel episode workers (0 = all cores)");

  auto* cal = app.add_subcommand("calibrate", "offline safety-margin calibration");
  auto* train = app.add_subcommand("train-margin", "train the margin regressor");
  auto* eval = app.add_subcommand("evaluate", "run benchmark episodes");
  auto* repro = app.add_subcommand("repro-paper", "full single+multi agent reproduction");
  auto* lip = app.add_subcommand("estimate-lipschitz", "estimate the Lipschitz bundle");

  std::string variants_csv, scenario_override;
  int n_trials_override = 0;
  bool dump_trajectories = false;
  eval->add_option("--variants", variants_csv, "comma-separated variant list");
  eval->add_option("--scenario", scenario_override, "head_on or crowd_<1..5>");
  eval->add_option("--n-trials", n_trials_override, "episodes per variant");
  eval->add_flag("--dump-trajectories", dump_trajectories, "write trajectory_<seed>.jsonl");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (cal->parsed()) {
      ExperimentConfig cfg = load_or_default(g, "head_on");
      if (g.seed) cfg.calibration.seed = *g.seed;
      run_calibrate(cfg, g.jobs);
    } else if (train->parsed()) {
      ExperimentConfig cfg = load_or_default(g, "head_on");
      if (g.seed) cfg.margin_model.seed = *g.seed;
      run_train_margin(cfg);
    } else if (eval->parsed()) {
      ExperimentConfig cfg = load_or_default(g, "head_on");
      apply_scenario_override(cfg, scenario_override);
      if (g.seed) cfg.evaluation.base_seed = *g.seed;
      if (n_trials_override > 0) cfg.evaluation.n_trials = n_trials_override;
      std::vector<std::string> variants = cfg.evaluation.variants;
      if (!variants_csv.empty()) {
        variants.clear();
        std::istringstream ss(variants_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) variants.push_back(item);
        }
        if (variants.empty()) throw ConfigError("evaluate.variants: empty list");
      }
      run_evaluate(cfg, variants, g.jobs, dump_trajectories || cfg.evaluation.dump_trajectories);
    } else if (repro->parsed()) {
      run_repro_paper(g);
    } else if (lip->parsed()) {
      ExperimentConfig cfg = load_or_default(g, "head_on");
      if (g.seed) cfg.lipschitz.seed = *g.seed;
      run_estimate_lipschitz(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
