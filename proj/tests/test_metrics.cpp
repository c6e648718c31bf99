#include <doctest.h>

#include <numeric>
#include <random>

#include "gamenet/errors.hpp"
#include "gamenet/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gamenet;

namespace {

CodeSet random_set(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  CodeSet s;
  for (int i = 0; i < n; ++i)
    if (coin(rng)) s.push_back(i);
  return s;
}

double ap(std::vector<double> scores, std::vector<double> labels) {
  std::vector<Eigen::VectorXd> s{Eigen::Map<Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()))};
  std::vector<Eigen::VectorXd> y{Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()))};
  return prauc(s, y);
}

}  // namespace

TEST_CASE("set metric examples") {
  const std::vector<CodeSet> y{{0, 1}};
  CHECK(jaccard(y, y) == 1.0);
  CHECK(jaccard(y, std::vector<CodeSet>{{1, 2}}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(jaccard(y, std::vector<CodeSet>{{}}) == 0.0);
  CHECK(jaccard(std::vector<CodeSet>{{}}, std::vector<CodeSet>{{}}) == 1.0);
  CHECK(f1(y, y) == 1.0);
  CHECK(f1(y, std::vector<CodeSet>{{1, 2}}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f1(y, std::vector<CodeSet>{{2, 3}}) == 0.0);
  CHECK(f1(y, std::vector<CodeSet>{{}}) == 0.0);
  CHECK_THROWS_AS(jaccard(y, std::vector<CodeSet>{}), DimensionError);
}

TEST_CASE("DDI rate examples") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a(0, 1) = a(1, 0) = 1.0;
  CHECK(ddi_rate(std::vector<CodeSet>{{0, 1, 2}}, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ddi_rate(std::vector<CodeSet>{{0, 1, 2}}, Eigen::MatrixXd::Zero(4, 4)) == 0.0);
  CHECK(ddi_rate(std::vector<CodeSet>{{0, 1}}, a) == 1.0);
  CHECK(ddi_rate(std::vector<CodeSet>{{0}, {}}, a) == 0.0);
  // Pairs are pooled across visits, not averaged per visit.
  CHECK(ddi_rate(std::vector<CodeSet>{{0, 1}, {0, 2, 3}}, a) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("delta DDI rate") {
  CHECK(delta_ddi_rate(0.0749, 0.0777) == doctest::Approx(-3.60).epsilon(0.01 / 3.60));
  CHECK(std::abs(delta_ddi_rate(0.0749, 0.0777) - -3.60) < 0.01);
  CHECK(std::abs(delta_ddi_rate(0.0532, 0.0777) - -31.53) < 0.01);
  CHECK(delta_ddi_rate(0.0777, 0.0777) == 0.0);
  CHECK_THROWS_AS(delta_ddi_rate(0.1, 0.0), std::domain_error);
}

TEST_CASE("PR-AUC examples") {
  CHECK(ap({0.9, 0.8, 0.7}, {1, 0, 1}) == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(ap({0.9, 0.8, 0.7}, {1, 0, 1}) == doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)).epsilon(1e-15));
  CHECK(ap({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(ap({0.3}, {1}) == 1.0);
  CHECK(ap({0.3, 0.4}, {0, 0}) == 0.0);
  // Tied scores share one threshold.
  CHECK(ap({0.5, 0.5}, {1, 0}) == 0.5);
}

TEST_CASE("metrics agree with brute-force enumeration") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 9;
    const auto graph = test_util::random_graph(n, 0.3, rng);
    std::vector<CodeSet> truth, pred;
    std::vector<Eigen::VectorXd> scores, hot;
    std::vector<double> flat_scores;
    std::vector<bool> flat_labels;
    const int visits = 1 + trial % 5;
    for (int v = 0; v < visits; ++v) {
      truth.push_back(random_set(n, 0.4, rng));
      pred.push_back(random_set(n, 0.4, rng));
      Eigen::VectorXd s(n);
      for (int i = 0; i < n; ++i) s(i) = trial % 3 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
      scores.push_back(s);
      hot.push_back(multi_hot(truth.back(), n));
      for (int i = 0; i < n; ++i) {
        flat_scores.push_back(s(i));
        flat_labels.push_back(hot.back()(i) > 0);
      }
    }
    CHECK(jaccard(truth, pred) == oracle::jaccard(truth, pred));
    CHECK(f1(truth, pred) == oracle::f1(truth, pred));
    CHECK(ddi_rate(pred, graph) == oracle::ddi_rate(pred, graph));
    CHECK(std::abs(prauc(scores, hot) - oracle::average_precision(flat_scores, flat_labels)) <= 1e-12);
  }
}

TEST_CASE("DDI rate is invariant under consistent relabelling") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 8;
    const auto graph = test_util::random_graph(n, 0.4, rng);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd permuted(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) permuted(perm[i], perm[j]) = graph(i, j);
    std::vector<CodeSet> sets, relabelled;
    for (int v = 0; v < 4; ++v) {
      sets.push_back(random_set(n, 0.5, rng));
      CodeSet r;
      for (int c : sets.back()) r.push_back(perm[c]);
      relabelled.push_back(make_code_set(r));
    }
    CHECK(ddi_rate(sets, graph) == ddi_rate(relabelled, permuted));
  }
}

TEST_CASE("PR-AUC of random scores tends to the positive rate") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double rho : {0.1, 0.3, 0.6}) {
    std::bernoulli_distribution coin(rho);
    Eigen::VectorXd s(10000), y(10000);
    for (int i = 0; i < 10000; ++i) {
      s(i) = u(rng);
      y(i) = coin(rng) ? 1.0 : 0.0;
    }
    CHECK(std::abs(prauc(std::vector<Eigen::VectorXd>{s}, std::vector<Eigen::VectorXd>{y}) - rho) < 0.02);
  }
}

TEST_CASE("ground truth evaluated against itself") {
  std::mt19937_64 rng(4);
  std::vector<PatientRecord> patients;
  for (int p = 0; p < 10; ++p) {
    auto r = test_util::random_patient("p" + std::to_string(p), 3, 4, 4, 8, rng);
    for (auto& v : r.visits) v.medications = {0, 1, 5};
    patients.push_back(r);
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(8, 8);
  a(1, 5) = a(5, 1) = 1.0;
  const auto report = evaluate("truth", patients, ground_truth_predictions(patients, 8), a);
  CHECK(report.jaccard == 1.0);
  CHECK(report.f1 == 1.0);
  CHECK(report.prauc == 1.0);
  CHECK(report.ddi_rate == report.base_ddi_rate);
  REQUIRE(report.delta_ddi_rate_pct.has_value());
  CHECK(*report.delta_ddi_rate_pct == 0.0);
  CHECK(report.avg_med_count == 3.0);
  CHECK(report.visits == 30);
  CHECK(report.per_patient.size() == 10);

  const auto again = report_from_json(to_json(report));
  CHECK(to_json(again) == to_json(report));

  const auto none = evaluate("truth", patients, ground_truth_predictions(patients, 8), Eigen::MatrixXd::Zero(8, 8));
  CHECK_FALSE(none.delta_ddi_rate_pct.has_value());
  const std::vector<EvalReport> rows{report, none};
  const auto table = format_report_table(rows);
  CHECK(table.find("Avg # of Med.") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
  CHECK_THROWS_AS(evaluate("x", std::span<const PatientRecord>{}, {}, a), std::invalid_argument);
}
