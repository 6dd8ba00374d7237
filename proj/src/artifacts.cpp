#include "crcsf/artifacts.hpp"

#include <sstream>

#include <json.hpp>

#include "crcsf/io.hpp"

namespace crcsf {

namespace {

double parse_double_field(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("csv row " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

int parse_int_field(const std::string& s, std::size_t line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("csv row " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace

std::string training_set_csv(const std::vector<TrainingRow>& rows) {
  std::ostringstream out;
  out << "batch,k,lambda";
  for (int i = 0; i < 11; ++i) out << ",phi_" << i;
  out << "\n";
  for (const auto& r : rows) {
    out << r.batch << "," << r.k << "," << format_double(r.lambda);
    for (int i = 0; i < 11; ++i) out << "," << format_double(r.phi[i]);
    out << "\n";
  }
  return out.str();
}

std::vector<TrainingRow> parse_training_set_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<TrainingRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    const auto fields = split_csv_line(line);
    if (fields.size() != 14) {
      throw ConfigError("csv row " + std::to_string(line_no) + ": expected 14 fields, got " +
                        std::to_string(fields.size()));
    }
    TrainingRow r;
    r.batch = parse_int_field(fields[0], line_no, "batch");
    r.k = parse_int_field(fields[1], line_no, "k");
    r.lambda = parse_double_field(fields[2], line_no, "lambda");
    for (int i = 0; i < 11; ++i) {
      r.phi[i] = parse_double_field(fields[static_cast<std::size_t>(3 + i)], line_no, "phi");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("training_set.csv: no data rows");
  return rows;
}

std::string certificates_csv(int batch_index,
                             const std::vector<std::vector<CertificatePair>>& batch) {
  std::ostringstream out;
  out << "batch,k,b_true,b_pred\n";
  if (batch.empty()) return out.str();
  const std::size_t N = batch[0].size();
  for (std::size_t k = 0; k < N; ++k) {
    for (const auto& traj : batch) {
      const CertificatePair& p = traj[k];
      out << batch_index << "," << p.k << "," << format_double(p.b_true) << ","
          << format_double(p.b_pred) << "\n";
    }
  }
  return out.str();
}

std::vector<CertificatePair> parse_certificates_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<CertificatePair> pairs;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ConfigError("csv row " + std::to_string(line_no) + ": expected 4 fields");
    }
    CertificatePair p;
    p.k = parse_int_field(fields[1], line_no, "k");
    p.b_true = parse_double_field(fields[2], line_no, "b_true");
    p.b_pred = parse_double_field(fields[3], line_no, "b_pred");
    pairs.push_back(p);
  }
  return pairs;
}

std::string episodes_csv(const std::vector<EpisodeRecord>& records) {
  std::ostringstream out;
  out << "scenario,variant,index,seed,collision,safety_violation,goal_success,goal_step,"
         "collision_step,control_effort,control_smoothness,min_h,infeasible_steps,mean_lambda,"
         "constrained_feasible_steps,h_next_violations\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    double min_h = std::numeric_limits<double>::infinity();
    std::size_t cf_steps = 0, h_viol = 0;
    for (const auto& st : r.steps) {
      min_h = std::min(min_h, st.min_h_substep);
      if (st.constrained && st.feasible) {
        ++cf_steps;
        if (st.h_next < 0.0) ++h_viol;
      }
    }
    out << r.scenario << "," << r.variant << "," << i << "," << r.seed << ","
        << (r.collision ? 1 : 0) << "," << (r.safety_violation ? 1 : 0) << ","
        << (r.goal_success ? 1 : 0) << "," << r.goal_step << "," << r.collision_step << ","
        << format_double(r.control_effort) << "," << format_double(r.control_smoothness) << ","
        << format_double(min_h) << "," << r.infeasible_steps << ","
        << format_double(r.mean_lambda) << "," << cf_steps << "," << h_viol << "\n";
  }
  return out.str();
}

std::string summary_csv(const std::vector<std::pair<std::string, MetricsSummary>>& summaries) {
  std::ostringstream out;
  out << "variant,collision_rate,safety_violation_rate,goal_success_rate,mean_control_effort,"
         "mean_control_smoothness,trials\n";
  for (const auto& [name, s] : summaries) {
    out << name << "," << format_double(s.collision_rate) << ","
        << format_double(s.safety_violation_rate) << "," << format_double(s.goal_success_rate)
        << "," << format_double(s.mean_control_effort) << ","
        << format_double(s.mean_control_smoothness) << "," << s.trials << "\n";
  }
  return out.str();
}

std::string trajectory_jsonl(const EpisodeRecord& rec) {
  std::ostringstream out;
  for (std::size_t k = 0; k < rec.steps.size(); ++k) {
    nlohmann::json j;
    const JointState& x = rec.states[k];
    j["k"] = x.k;
    j["t"] = x.t;
    j["robot"] = {x.robot.px, x.robot.py, x.robot.theta, x.robot.v};
    nlohmann::json humans = nlohmann::json::array();
    for (const auto& h : x.humans) humans.push_back({h.px, h.py, h.vx, h.vy});
    j["humans"] = humans;
    const StepLog& st = rec.steps[k];
    j["u"] = {st.u_robot.x(), st.u_robot.y()};
    j["lambda"] = st.lambda_used;
    j["cert_true_min"] = st.cert_true_min;
    j["min_h_substep"] = st.min_h_substep;
    j["feasible"] = st.feasible;
    out << j.dump() << "\n";
  }
  return out.str();
}

std::string fixed_lambda_json(const LambdaResult& lr, double loss_bound) {
  nlohmann::json j;
  j["lambda"] = lr.lambda;
  j["alpha_unattainable"] = lr.alpha_unattainable;
  j["loss_bound"] = loss_bound;
  return j.dump(2) + "\n";
}

LambdaResult parse_fixed_lambda_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  LambdaResult lr;
  lr.lambda = j.at("lambda").get<double>();
  lr.alpha_unattainable = j.at("alpha_unattainable").get<bool>();
  return lr;
}

std::string bundle_json(const LipschitzBundle& b) {
  nlohmann::json j;
  j["L_x"] = b.L_x;
  j["L_f"] = b.L_f;
  j["L_g"] = b.L_g;
  j["L_h"] = b.L_h;
  j["L_kh"] = b.L_kh;
  j["B_u"] = b.B_u;
  return j.dump(2) + "\n";
}

LipschitzBundle parse_bundle_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  LipschitzBundle b;
  b.L_x = j.at("L_x").get<double>();
  b.L_f = j.at("L_f").get<double>();
  b.L_g = j.at("L_g").get<double>();
  b.L_h = j.at("L_h").get<double>();
  b.L_kh = j.at("L_kh").get<double>();
  b.B_u = j.at("B_u").get<double>();
  return b;
}

std::string format_summary_table(
    const std::vector<std::pair<std::string, MetricsSummary>>& summaries) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s %8s %8s %7s\n", "variant", "coll%", "viol%",
                "goal%", "effort", "smooth", "trials");
  out << buf;
  for (const auto& [name, s] : summaries) {
    std::snprintf(buf, sizeof(buf), "%-16s %8.1f %8.1f %8.1f %8.3f %8.3f %7d\n", name.c_str(),
                  100.0 * s.collision_rate, 100.0 * s.safety_violation_rate,
                  100.0 * s.goal_success_rate, s.mean_control_effort, s.mean_control_smoothness,
                  s.trials);
    out << buf;
  }
  return out.str();
}

}  // namespace crcsf
