#pragma once

#include <string>
#include <vector>

#include "crcsf/calibration.hpp"
#include "crcsf/config.hpp"
#include "crcsf/simulator.hpp"

namespace crcsf {

/// training_set.csv: batch,k,lambda,phi_0..phi_10
std::string training_set_csv(const std::vector<TrainingRow>& rows);
std::vector<TrainingRow> parse_training_set_csv(const std::string& text);

/// certificates_batch_<b>.csv: batch,k,b_true,b_pred — rows ordered by
/// (k, trajectory), matching the calibration pooling order.
std::string certificates_csv(int batch_index,
                             const std::vector<std::vector<CertificatePair>>& batch);
std::vector<CertificatePair> parse_certificates_csv(const std::string& text);

/// episodes.csv: one row per episode with flags and metrics.
std::string episodes_csv(const std::vector<EpisodeRecord>& records);

/// summary.csv: one row per variant.
std::string summary_csv(const std::vector<std::pair<std::string, MetricsSummary>>& summaries);

/// One JSON object per step.
std::string trajectory_jsonl(const EpisodeRecord& rec);

std::string fixed_lambda_json(const LambdaResult& lr, double loss_bound);
LambdaResult parse_fixed_lambda_json(const std::string& text);

std::string bundle_json(const LipschitzBundle& b);
LipschitzBundle parse_bundle_json(const std::string& text);

std::string format_summary_table(
    const std::vector<std::pair<std::string, MetricsSummary>>& summaries);

}  // namespace crcsf
