#include "gamenet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace gamenet {
namespace {

std::size_t intersection_size(const CodeSet& a, const CodeSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " ground-truth visits vs " + std::to_string(b) +
                         " predicted");
  }
}

double visit_jaccard(const CodeSet& y, const CodeSet& yhat) {
  const auto inter = static_cast<double>(intersection_size(y, yhat));
  const auto uni = static_cast<double>(y.size() + yhat.size()) - inter;
  return uni == 0.0 ? 1.0 : inter / uni;
}

double visit_f1(const CodeSet& y, const CodeSet& yhat) {
  const auto inter = static_cast<double>(intersection_size(y, yhat));
  const double p = y.empty() ? 0.0 : inter / static_cast<double>(y.size());
  const double r = yhat.empty() ? 0.0 : inter / static_cast<double>(yhat.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Eigen::VectorXd indicator(const CodeSet& set, int size) { return multi_hot(set, size); }

}  // namespace

double jaccard(std::span<const CodeSet> truth, std::span<const CodeSet> predicted) {
  require_aligned(truth.size(), predicted.size(), "jaccard");
  if (truth.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += visit_jaccard(truth[i], predicted[i]);
  return total / static_cast<double>(truth.size());
}

double f1(std::span<const CodeSet> truth, std::span<const CodeSet> predicted) {
  require_aligned(truth.size(), predicted.size(), "f1");
  if (truth.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) total += visit_f1(truth[i], predicted[i]);
  return total / static_cast<double>(truth.size());
}

double prauc(std::span<const Eigen::VectorXd> scores, std::span<const Eigen::VectorXd> truth) {
  require_aligned(truth.size(), scores.size(), "prauc");
  std::vector<std::pair<double, bool>> pooled;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (scores[v].size() != truth[v].size()) throw DimensionError("prauc: score/label length mismatch");
    for (Eigen::Index i = 0; i < scores[v].size(); ++i) pooled.emplace_back(scores[v](i), truth[v](i) > 0.5);
  }
  const auto positives = std::count_if(pooled.begin(), pooled.end(), [](const auto& p) { return p.second; });
  if (positives == 0) return 0.0;
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  double ap = 0.0;
  std::size_t seen = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t group_hits = 0;
    std::size_t j = i;
    for (; j < pooled.size() && pooled[j].first == pooled[i].first; ++j) group_hits += pooled[j].second ? 1 : 0;
    seen += j - i;
    hits += group_hits;
    if (group_hits > 0) {
      ap += (static_cast<double>(group_hits) / static_cast<double>(positives)) *
            (static_cast<double>(hits) / static_cast<double>(seen));
    }
    i = j;
  }
  return ap;
}

double ddi_rate(std::span<const CodeSet> predicted, const Eigen::MatrixXd& ddi_adjacency) {
  double interacting = 0.0;
  double pairs = 0.0;
  for (const auto& set : predicted) {
    if (set.size() < 2) continue;
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t j = i + 1; j < set.size(); ++j) {
        if (ddi_adjacency(set[i], set[j]) > 0.0) interacting += 1.0;
      }
    }
    pairs += static_cast<double>(set.size() * (set.size() - 1) / 2);
  }
  return pairs == 0.0 ? 0.0 : interacting / pairs;
}

double delta_ddi_rate(double rate, double base_rate) {
  if (!(base_rate > 0.0)) throw std::domain_error("delta_ddi_rate: ground-truth DDI rate must be positive");
  return 100.0 * (rate - base_rate) / base_rate;
}

double average_label_count(std::span<const CodeSet> predicted) {
  if (predicted.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : predicted) total += static_cast<double>(s.size());
  return total / static_cast<double>(predicted.size());
}

EvalReport evaluate(std::string method, std::span<const PatientRecord> patients,
                    std::span<const PatientPredictions> predictions, const Eigen::MatrixXd& ddi_adjacency) {
  if (patients.empty()) throw std::invalid_argument("evaluate: empty split");
  if (patients.size() != predictions.size()) {
    throw DimensionError("evaluate: " + std::to_string(patients.size()) + " patients vs " +
                         std::to_string(predictions.size()) + " predictions");
  }
  const auto n_meds = static_cast<int>(ddi_adjacency.rows());

  EvalReport report;
  report.method = std::move(method);
  report.patients = patients.size();

  std::vector<CodeSet> truth, predicted;
  std::vector<Eigen::VectorXd> truth_hot, scores;
  for (std::size_t k = 0; k < patients.size(); ++k) {
    const auto& visits = patients[k].visits;
    const auto& pred = predictions[k];
    require_aligned(visits.size(), pred.labels.size(), "evaluate");
    if (!pred.probabilities.empty()) require_aligned(visits.size(), pred.probabilities.size(), "evaluate");

    std::vector<CodeSet> y, yhat;
    for (std::size_t t = 0; t < visits.size(); ++t) {
      y.push_back(visits[t].medications);
      yhat.push_back(pred.labels[t]);
      truth_hot.push_back(multi_hot(visits[t].medications, n_meds));
      scores.push_back(pred.probabilities.empty() ? indicator(pred.labels[t], n_meds) : pred.probabilities[t]);
    }
    report.per_patient.push_back(PatientMetrics{patients[k].patient_id, visits.size(), jaccard(y, yhat), f1(y, yhat),
                                                average_label_count(yhat)});
    std::move(y.begin(), y.end(), std::back_inserter(truth));
    std::move(yhat.begin(), yhat.end(), std::back_inserter(predicted));
  }
  report.visits = truth.size();
  report.jaccard = jaccard(truth, predicted);
  report.f1 = f1(truth, predicted);
  report.prauc = prauc(scores, truth_hot);
  report.ddi_rate = ddi_rate(predicted, ddi_adjacency);
  report.base_ddi_rate = ddi_rate(truth, ddi_adjacency);
  if (report.base_ddi_rate > 0.0) report.delta_ddi_rate_pct = delta_ddi_rate(report.ddi_rate, report.base_ddi_rate);
  report.avg_med_count = average_label_count(predicted);
  return report;
}

std::vector<PatientPredictions> ground_truth_predictions(std::span<const PatientRecord> patients, int num_medications) {
  std::vector<PatientPredictions> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    PatientPredictions pred;
    for (const auto& v : p.visits) {
      pred.labels.push_back(v.medications);
      pred.probabilities.push_back(multi_hot(v.medications, num_medications));
    }
    out.push_back(std::move(pred));
  }
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["jaccard"] = r.jaccard;
  j["f1"] = r.f1;
  j["prauc"] = r.prauc;
  j["ddi_rate"] = r.ddi_rate;
  j["base_ddi_rate"] = r.base_ddi_rate;
  j["delta_ddi_rate_pct"] = r.delta_ddi_rate_pct ? nlohmann::json(*r.delta_ddi_rate_pct) : nlohmann::json(nullptr);
  j["avg_med_count"] = r.avg_med_count;
  j["patients"] = r.patients;
  j["visits"] = r.visits;
  j["per_patient"] = nlohmann::json::array();
  for (const auto& p : r.per_patient) {
    j["per_patient"].push_back({{"patient_id", p.patient_id},
                                {"visits", p.visits},
                                {"jaccard", p.jaccard},
                                {"f1", p.f1},
                                {"avg_med_count", p.avg_med_count}});
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.jaccard = j.at("jaccard").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.prauc = j.at("prauc").get<double>();
  r.ddi_rate = j.at("ddi_rate").get<double>();
  r.base_ddi_rate = j.at("base_ddi_rate").get<double>();
  if (!j.at("delta_ddi_rate_pct").is_null()) r.delta_ddi_rate_pct = j.at("delta_ddi_rate_pct").get<double>();
  r.avg_med_count = j.at("avg_med_count").get<double>();
  r.patients = j.at("patients").get<std::size_t>();
  r.visits = j.at("visits").get<std::size_t>();
  for (const auto& p : j.at("per_patient")) {
    r.per_patient.push_back(PatientMetrics{p.at("patient_id").get<std::string>(), p.at("visits").get<std::size_t>(),
                                           p.at("jaccard").get<double>(), p.at("f1").get<double>(),
                                           p.at("avg_med_count").get<double>()});
  }
  return r;
}

std::string format_report_table(std::span<const EvalReport> reports) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-20s %9s %16s %9s %9s %9s %14s\n", "Methods", "DDI Rate", "Delta DDI Rate %",
                "Jaccard", "PR-AUC", "F1", "Avg # of Med.");
  out << buf << std::string(92, '-') << '\n';
  for (const auto& r : reports) {
    char delta[32];
    if (r.delta_ddi_rate_pct) {
      std::snprintf(delta, sizeof(delta), "%+.2f%%", *r.delta_ddi_rate_pct);
    } else {
      std::snprintf(delta, sizeof(delta), "n/a");
    }
    std::snprintf(buf, sizeof(buf), "%-20s %9.4f %16s %9.4f %9.4f %9.4f %14.2f\n", r.method.c_str(), r.ddi_rate, delta,
                  r.jaccard, r.prauc, r.f1, r.avg_med_count);
    out << buf;
  }
  if (!reports.empty()) {
    std::snprintf(buf, sizeof(buf), "base DDI rate of ground truth: %.4f\n", reports.front().base_ddi_rate);
    out << buf;
  }
  return out.str();
}

}  // namespace gamenet
