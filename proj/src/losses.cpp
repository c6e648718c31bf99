#include "gamenet/losses.hpp"

#include <stdexcept>
#include <vector>

namespace gamenet {

void LossConfig::validate() const {
  if (pi_bce < 0 || pi_margin < 0 || std::abs(pi_bce + pi_margin - 1.0) > 1e-12) {
    throw std::invalid_argument("loss config: mixture weights must be non-negative and sum to 1");
  }
  if (!(temperature_decay > 0 && temperature_decay < 1)) {
    throw std::invalid_argument("loss config: temperature decay must lie in (0, 1)");
  }
  if (!(initial_temperature > 0)) throw std::invalid_argument("loss config: initial temperature must be positive");
  if (target_ddi_rate < 0) throw std::invalid_argument("loss config: target DDI rate must be non-negative");
}

namespace {

Var sum_all(std::span<const Var> terms) {
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

Var zero_like_scalar(Var anchor) { return anchor.tape()->constant(Eigen::MatrixXd::Zero(1, 1)); }

/// Margin hinge for one visit, recorded as a single node.
Var visit_margin(Var probabilities, const CodeSet& truth) {
  const auto& p = probabilities.value();
  const auto n = p.rows();
  const double inv_l = 1.0 / static_cast<double>(n);
  std::vector<bool> is_true(static_cast<std::size_t>(n), false);
  for (int j : truth) is_true[static_cast<std::size_t>(j)] = true;

  double total = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 1);
  for (int j : truth) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_true[static_cast<std::size_t>(i)]) continue;
      const double slack = 1.0 - (p(j, 0) - p(i, 0));
      if (slack > 0.0) {
        total += slack * inv_l;
        grad(j, 0) -= inv_l;
        grad(i, 0) += inv_l;
      }
    }
  }
  return probabilities.tape()->record(
      "margin_loss", Eigen::MatrixXd::Constant(1, 1, total), {probabilities},
      [probabilities, grad](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(probabilities, g(0, 0) * grad); });
}

}  // namespace

Var bce_loss(std::span<const Var> logits, std::span<const Eigen::VectorXd> targets) {
  if (logits.empty() || logits.size() != targets.size()) {
    throw DimensionError("bce_loss: need one target vector per visit");
  }
  std::vector<Var> terms;
  terms.reserve(logits.size());
  for (std::size_t t = 0; t < logits.size(); ++t) terms.push_back(ad::bce_with_logits(logits[t], targets[t]));
  return sum_all(terms);
}

Var margin_loss(std::span<const Var> probabilities, std::span<const CodeSet> truth) {
  if (probabilities.empty() || probabilities.size() != truth.size()) {
    throw DimensionError("margin_loss: need one label set per visit");
  }
  std::vector<Var> terms;
  for (std::size_t t = 0; t < probabilities.size(); ++t) {
    if (truth[t].empty()) continue;
    for (int j : truth[t]) {
      if (j < 0 || j >= probabilities[t].rows()) throw DimensionError("margin_loss: label outside output range");
    }
    terms.push_back(visit_margin(probabilities[t], truth[t]));
  }
  return terms.empty() ? zero_like_scalar(probabilities.front()) : sum_all(terms);
}

Var ddi_loss(std::span<const Var> probabilities, const Eigen::MatrixXd& ddi_adjacency) {
  if (probabilities.empty()) throw DimensionError("ddi_loss: no visits");
  Tape& tape = *probabilities.front().tape();
  Var adjacency = tape.constant(ddi_adjacency);
  std::vector<Var> terms;
  terms.reserve(probabilities.size());
  for (const auto& p : probabilities) {
    if (p.rows() != ddi_adjacency.rows() || p.cols() != 1) {
      throw DimensionError("ddi_loss: probabilities " + ad::shape_string(p.rows(), p.cols()) + " vs adjacency " +
                           ad::shape_string(ddi_adjacency.rows(), ddi_adjacency.cols()));
    }
    terms.push_back(ad::sum(ad::mul(p, ad::matmul(adjacency, p))));
  }
  return sum_all(terms);
}

Var prediction_loss(Var bce, Var margin, const LossConfig& config) {
  return ad::add(ad::scale(bce, config.pi_bce), ad::scale(margin, config.pi_margin));
}

double ddi_branch_probability(double current_ddi_rate, double target_ddi_rate, double temperature) {
  if (!(temperature > 0)) throw std::invalid_argument("ddi_branch_probability: temperature must be positive");
  if (current_ddi_rate <= target_ddi_rate) return 0.0;
  return std::exp(-(current_ddi_rate - target_ddi_rate) / temperature);
}

}  // namespace gamenet
