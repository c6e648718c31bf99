#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gamenet/data.hpp"

namespace gamenet {

/// Per-visit output of a recommender for one patient. `probabilities` may be
/// empty for methods that only emit sets; PR-AUC then scores the indicator of
/// the predicted set.
struct PatientPredictions {
  std::vector<CodeSet> labels;
  std::vector<Eigen::VectorXd> probabilities;
};

/// Mean over visits of |Y n Yhat| / |Y u Yhat|. Two empty sets count as 1.
double jaccard(std::span<const CodeSet> truth, std::span<const CodeSet> predicted);

/// Mean over visits of 2PR/(P+R), with P = |Y n Yhat|/|Y|, R = |Y n Yhat|/|Yhat|
/// and 0 when P + R = 0.
double f1(std::span<const CodeSet> truth, std::span<const CodeSet> predicted);

/// Micro-averaged average precision over pooled (visit, label) pairs. Tied
/// scores share one threshold. Returns 0 when there are no positives.
double prauc(std::span<const Eigen::VectorXd> scores, std::span<const Eigen::VectorXd> truth);

/// Interacting unordered pairs over all unordered pairs in the predicted
/// sets, summed over visits. 0 when no set has two or more labels.
double ddi_rate(std::span<const CodeSet> predicted, const Eigen::MatrixXd& ddi_adjacency);

/// 100 (rate - base) / base. Throws std::domain_error when base <= 0.
double delta_ddi_rate(double rate, double base_rate);

double average_label_count(std::span<const CodeSet> predicted);

struct PatientMetrics {
  std::string patient_id;
  std::size_t visits = 0;
  double jaccard = 0;
  double f1 = 0;
  double avg_med_count = 0;
};

struct EvalReport {
  std::string method;
  double jaccard = 0;
  double f1 = 0;
  double prauc = 0;
  double ddi_rate = 0;
  double base_ddi_rate = 0;
  std::optional<double> delta_ddi_rate_pct;  // absent when the base rate is 0
  double avg_med_count = 0;
  std::size_t patients = 0;
  std::size_t visits = 0;
  std::vector<PatientMetrics> per_patient;
};

/// All metrics for `predictions` against the ground truth of `patients`, with
/// the ground-truth DDI rate of the same patients as base.
EvalReport evaluate(std::string method, std::span<const PatientRecord> patients,
                    std::span<const PatientPredictions> predictions, const Eigen::MatrixXd& ddi_adjacency);

/// Ground truth scored against itself.
std::vector<PatientPredictions> ground_truth_predictions(std::span<const PatientRecord> patients, int num_medications);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// Fixed-width table: Method, DDI Rate, Delta DDI Rate %, Jaccard, PR-AUC, F1, Avg # of Med.
std::string format_report_table(std::span<const EvalReport> reports);

}  // namespace gamenet
