#pragma once

#include <cmath>
#include <random>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "gamenet/encoder.hpp"

namespace gamenet {

struct LossConfig {
  double pi_bce = 0.9;            // mixture weight of the BCE term
  double pi_margin = 0.1;         // mixture weight of the margin term
  double target_ddi_rate = 0.05;  // s
  double initial_temperature = 0.5;
  double temperature_decay = 0.85;  // Temp <- decay * Temp after every patient update

  void validate() const;
};

/// Sum over visits and labels of the binary cross entropy, from logits.
Var bce_loss(std::span<const Var> logits, std::span<const Eigen::VectorXd> targets);

/// Hinge sum_t sum_{j in Y_t} sum_{i not in Y_t} max(0, 1 - (p_t[j] - p_t[i])) / L
/// on probabilities, with L = number of labels. Visits with an empty ground
/// truth are skipped.
Var margin_loss(std::span<const Var> probabilities, std::span<const CodeSet> truth);

/// sum_t sum_{i,j} A[i,j] p_t[i] p_t[j] over ordered pairs.
Var ddi_loss(std::span<const Var> probabilities, const Eigen::MatrixXd& ddi_adjacency);

/// pi_bce * bce + pi_margin * margin.
Var prediction_loss(Var bce, Var margin, const LossConfig& config);

enum class LossBranch { prediction, ddi };

/// exp(-(s' - s) / temp) when s' > s, otherwise 0.
double ddi_branch_probability(double current_ddi_rate, double target_ddi_rate, double temperature);

/// Annealed choice between the prediction and DDI losses. Only draws from
/// `rng` when the current rate exceeds the target.
template <typename Rng>
LossBranch select_loss_branch(double current_ddi_rate, const LossConfig& config, double temperature, Rng& rng) {
  if (!(temperature > 0)) throw std::invalid_argument("select_loss_branch: temperature must be positive");
  if (current_ddi_rate <= config.target_ddi_rate) return LossBranch::prediction;
  const double p = ddi_branch_probability(current_ddi_rate, config.target_ddi_rate, temperature);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return uniform(rng) < p ? LossBranch::ddi : LossBranch::prediction;
}

template <typename Rng>
std::pair<Var, LossBranch> combined_loss(Var prediction, Var ddi, double current_ddi_rate, const LossConfig& config,
                                         double temperature, Rng& rng) {
  const auto branch = select_loss_branch(current_ddi_rate, config, temperature, rng);
  return {branch == LossBranch::ddi ? ddi : prediction, branch};
}

}  // namespace gamenet
