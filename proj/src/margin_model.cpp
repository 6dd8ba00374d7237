#include "crcsf/margin_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "crcsf/io.hpp"
#include "crcsf/rng.hpp"

namespace crcsf {

namespace {

constexpr int kHidden = 32;
constexpr int kInput = 11;

Eigen::VectorXd normalize(const MarginModel& m, const FeatureVector& phi) {
  return (phi - m.feat_mean).cwiseQuotient(m.feat_scale);
}

double mlp_raw(const MarginModel& m, const Eigen::VectorXd& z) {
  const Eigen::VectorXd h1 = (m.w1 * z + m.b1).array().tanh();
  const Eigen::VectorXd h2 = (m.w2 * h1 + m.b2).array().tanh();
  return m.w3.dot(h2) + m.b3;
}

std::pair<int, int> table_bin(const MarginModel& m, const FeatureVector& phi) {
  const double k = phi[10];
  const double d = phi[8];
  auto bin = [](double v, double lo, double hi, int n) {
    if (hi <= lo) return 0;
    const int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
    return std::clamp(i, 0, n - 1);
  };
  return {bin(k, m.k_lo, m.k_hi, m.k_bins), bin(d, m.d_lo, m.d_hi, m.dist_bins)};
}

double validation_mse(const MarginModel& m, const std::vector<TrainingRow>& rows,
                      const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i : idx) {
    const double e = predict(m, rows[i].phi) - rows[i].lambda;
    acc += e * e;
  }
  return acc / static_cast<double>(idx.size());
}

}  // namespace

double predict(const MarginModel& m, const FeatureVector& phi) {
  double raw = 0.0;
  if (m.kind == "mlp") {
    raw = mlp_raw(m, normalize(m, phi));
  } else {
    const auto [bi, bj] = table_bin(m, phi);
    raw = (m.bin_count(bi, bj) > 0) ? m.bin_mean(bi, bj) : m.global_mean;
  }
  return std::clamp(raw, 0.0, m.lambda_max);
}

std::pair<MarginModel, TrainReport> train_margin_model(const std::vector<TrainingRow>& rows,
                                                       const MarginHyperparams& hp) {
  if (rows.empty()) throw std::invalid_argument("train_margin_model: empty training set");
  if (hp.kind != "mlp" && hp.kind != "table") {
    throw std::invalid_argument("train_margin_model: kind must be 'mlp' or 'table'");
  }

  std::set<int> batch_ids;
  for (const auto& r : rows) batch_ids.insert(r.batch);
  if (batch_ids.size() < 2) {
    throw std::invalid_argument("train_margin_model: need at least 2 batches for the split");
  }
  const int n_val_batches =
      std::max(1, static_cast<int>(std::llround(0.1 * static_cast<double>(batch_ids.size()))));
  std::set<int> val_ids;
  for (auto it = batch_ids.rbegin(); it != batch_ids.rend() && static_cast<int>(val_ids.size()) < n_val_batches; ++it) {
    val_ids.insert(*it);
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (val_ids.count(rows[i].batch) ? val_idx : train_idx).push_back(i);
  }

  MarginModel m;
  m.kind = hp.kind;
  double max_label = 0.0;
  for (const auto& r : rows) max_label = std::max(max_label, r.lambda);
  m.lambda_max = 1.5 * max_label;

  // normalization statistics from the training split
  Eigen::Matrix<double, 11, 1> mean = Eigen::Matrix<double, 11, 1>::Zero();
  for (std::size_t i : train_idx) mean += rows[i].phi;
  mean /= static_cast<double>(train_idx.size());
  Eigen::Matrix<double, 11, 1> var = Eigen::Matrix<double, 11, 1>::Zero();
  for (std::size_t i : train_idx) var += (rows[i].phi - mean).cwiseAbs2();
  var /= static_cast<double>(train_idx.size());
  m.feat_mean = mean;
  m.feat_scale = var.cwiseSqrt().cwiseMax(1e-9);

  TrainReport report;
  report.seed = hp.seed;

  if (hp.kind == "table") {
    m.k_bins = hp.k_bins;
    m.dist_bins = hp.dist_bins;
    double k_lo = rows[train_idx[0]].phi[10], k_hi = k_lo;
    double d_lo = rows[train_idx[0]].phi[8], d_hi = d_lo;
    for (std::size_t i : train_idx) {
      k_lo = std::min(k_lo, rows[i].phi[10]);
      k_hi = std::max(k_hi, rows[i].phi[10]);
      d_lo = std::min(d_lo, rows[i].phi[8]);
      d_hi = std::max(d_hi, rows[i].phi[8]);
    }
    m.k_lo = k_lo;
    m.k_hi = std::max(k_hi, k_lo + 1e-9);
    m.d_lo = d_lo;
    m.d_hi = std::max(d_hi, d_lo + 1e-9);
    m.bin_mean = Eigen::MatrixXd::Zero(m.k_bins, m.dist_bins);
    m.bin_count = Eigen::MatrixXi::Zero(m.k_bins, m.dist_bins);
    double total = 0.0;
    for (std::size_t i : train_idx) {
      const auto [bi, bj] = table_bin(m, rows[i].phi);
      m.bin_mean(bi, bj) += rows[i].lambda;
      m.bin_count(bi, bj) += 1;
      total += rows[i].lambda;
    }
    m.global_mean = total / static_cast<double>(train_idx.size());
    for (int i = 0; i < m.k_bins; ++i) {
      for (int j = 0; j < m.dist_bins; ++j) {
        if (m.bin_count(i, j) > 0) m.bin_mean(i, j) /= m.bin_count(i, j);
      }
    }
    report.epochs = 0;
  } else {
    Rng rng(derive_seed(hp.seed, 0x3317));
    auto init = [&rng](Eigen::Index rows_, Eigen::Index cols_) {
      Eigen::MatrixXd w(rows_, cols_);
      const double limit = std::sqrt(6.0 / static_cast<double>(rows_ + cols_));
      for (Eigen::Index r = 0; r < rows_; ++r)
        for (Eigen::Index c = 0; c < cols_; ++c) w(r, c) = rng.uniform(-limit, limit);
      return w;
    };
    m.w1 = init(kHidden, kInput);
    m.w2 = init(kHidden, kHidden);
    m.w3 = init(kHidden, 1);
    m.b1 = Eigen::VectorXd::Zero(kHidden);
    m.b2 = Eigen::VectorXd::Zero(kHidden);
    m.b3 = 0.0;

    const Eigen::Index n = static_cast<Eigen::Index>(train_idx.size());
    Eigen::MatrixXd X(kInput, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      X.col(c) = normalize(m, rows[train_idx[static_cast<std::size_t>(c)]].phi);
      y[c] = rows[train_idx[static_cast<std::size_t>(c)]].lambda;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double last_mse = 0.0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
      const Eigen::MatrixXd a1 = ((m.w1 * X).colwise() + m.b1).array().tanh();
      const Eigen::MatrixXd a2 = ((m.w2 * a1).colwise() + m.b2).array().tanh();
      const Eigen::VectorXd out = (a2.transpose() * m.w3).array() + m.b3;
      const Eigen::VectorXd err = out - y;
      last_mse = err.squaredNorm() * inv_n;

      const Eigen::VectorXd dout = 2.0 * inv_n * err;  // dL/dout per sample
      const Eigen::VectorXd gw3 = a2 * dout;
      const double gb3 = dout.sum();
      const Eigen::MatrixXd da2 =
          (m.w3 * dout.transpose()).cwiseProduct((1.0 - a2.array().square()).matrix());
      const Eigen::MatrixXd gw2 = da2 * a1.transpose();
      const Eigen::VectorXd gb2 = da2.rowwise().sum();
      const Eigen::MatrixXd da1 =
          (m.w2.transpose() * da2).cwiseProduct((1.0 - a1.array().square()).matrix());
      const Eigen::MatrixXd gw1 = da1 * X.transpose();
      const Eigen::VectorXd gb1 = da1.rowwise().sum();

      m.w3 -= hp.learning_rate * gw3;
      m.b3 -= hp.learning_rate * gb3;
      m.w2 -= hp.learning_rate * gw2;
      m.b2 -= hp.learning_rate * gb2;
      m.w1 -= hp.learning_rate * gw1;
      m.b1 -= hp.learning_rate * gb1;
    }
    report.epochs = hp.epochs;
    report.train_mse = last_mse;
  }

  if (hp.kind == "table") {
    double acc = 0.0;
    for (std::size_t i : train_idx) {
      const double e = predict(m, rows[i].phi) - rows[i].lambda;
      acc += e * e;
    }
    report.train_mse = acc / static_cast<double>(train_idx.size());
  }
  report.validation_mse = validation_mse(m, rows, val_idx);
  return {m, report};
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return {};
  const Eigen::Index c = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

std::string margin_model_to_json(const MarginModel& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["kind"] = m.kind;
  j["config_hash"] = m.config_hash;
  j["feat_mean"] = vector_to_json(m.feat_mean);
  j["feat_scale"] = vector_to_json(m.feat_scale);
  j["lambda_max"] = m.lambda_max;
  if (m.kind == "mlp") {
    j["w1"] = matrix_to_json(m.w1);
    j["b1"] = vector_to_json(m.b1);
    j["w2"] = matrix_to_json(m.w2);
    j["b2"] = vector_to_json(m.b2);
    j["w3"] = vector_to_json(m.w3);
    j["b3"] = m.b3;
  } else {
    j["k_bins"] = m.k_bins;
    j["dist_bins"] = m.dist_bins;
    j["k_lo"] = m.k_lo;
    j["k_hi"] = m.k_hi;
    j["d_lo"] = m.d_lo;
    j["d_hi"] = m.d_hi;
    j["bin_mean"] = matrix_to_json(m.bin_mean);
    nlohmann::json counts = nlohmann::json::array();
    for (int r = 0; r < m.k_bins; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < m.dist_bins; ++c) row.push_back(m.bin_count(r, c));
      counts.push_back(row);
    }
    j["bin_count"] = counts;
    j["global_mean"] = m.global_mean;
  }
  return j.dump(2) + "\n";
}

MarginModel margin_model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MarginModel m;
  m.version = j.at("version").get<int>();
  m.kind = j.at("kind").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.feat_mean = vector_from_json(j.at("feat_mean"));
  m.feat_scale = vector_from_json(j.at("feat_scale"));
  m.lambda_max = j.at("lambda_max").get<double>();
  if (m.kind == "mlp") {
    m.w1 = matrix_from_json(j.at("w1"));
    m.b1 = vector_from_json(j.at("b1"));
    m.w2 = matrix_from_json(j.at("w2"));
    m.b2 = vector_from_json(j.at("b2"));
    m.w3 = vector_from_json(j.at("w3"));
    m.b3 = j.at("b3").get<double>();
  } else {
    m.k_bins = j.at("k_bins").get<int>();
    m.dist_bins = j.at("dist_bins").get<int>();
    m.k_lo = j.at("k_lo").get<double>();
    m.k_hi = j.at("k_hi").get<double>();
    m.d_lo = j.at("d_lo").get<double>();
    m.d_hi = j.at("d_hi").get<double>();
    m.bin_mean = matrix_from_json(j.at("bin_mean"));
    const auto& counts = j.at("bin_count");
    m.bin_count = Eigen::MatrixXi::Zero(m.k_bins, m.dist_bins);
    for (int r = 0; r < m.k_bins; ++r)
      for (int c = 0; c < m.dist_bins; ++c) m.bin_count(r, c) = counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<int>();
    m.global_mean = j.at("global_mean").get<double>();
  }
  return m;
}

}  // namespace crcsf
