#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gamenet/data.hpp"
#include "gamenet/metrics.hpp"

namespace gamenet {

/// Repeats the previous visit's prescription; nothing at the first visit.
PatientPredictions nearest_baseline(const PatientRecord& patient);

struct LrConfig {
  double l2_penalty = 1.1;
  int max_iterations = 5000;
  double tolerance = 1e-3;  // on the max-norm of the objective gradient
};

/// Binary relevance over the current visit's [diagnosis; procedure] multi-hot.
/// Each medication has an independent logistic regression trained on
///   sum_n BCE(sigmoid(w_m . x_n + b_m), y_nm) + (l2 / 2) |w_m|^2
/// (bias unpenalised). Labels that are constant in the training data get a
/// constant-probability classifier.
class LrModel {
 public:
  LrModel() = default;
  LrModel(Eigen::MatrixXd weights, Eigen::VectorXd bias, int num_diagnoses, int num_procedures);

  Eigen::VectorXd features(const Visit& visit) const;
  Eigen::VectorXd predict_proba(const Visit& visit) const;
  CodeSet predict(const Visit& visit) const;
  PatientPredictions predict_patient(const PatientRecord& patient) const;

  const Eigen::MatrixXd& weights() const { return weights_; }  // features x labels
  const Eigen::VectorXd& bias() const { return bias_; }
  int iterations = 0;
  bool converged = false;

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  int num_diagnoses_ = 0;
  int num_procedures_ = 0;
};

struct LrTrainingData {
  Eigen::MatrixXd inputs;  // visits x features
  Eigen::MatrixXd labels;  // visits x medications
  int num_diagnoses = 0;
  int num_procedures = 0;
};

LrTrainingData lr_training_data(std::span<const PatientRecord> patients, int num_diagnoses, int num_procedures,
                                int num_medications);

/// Accelerated gradient descent with adaptive restart, run on all labels
/// jointly (the objective separates by label).
LrModel lr_train(const LrTrainingData& data, const LrConfig& config = {});
LrModel lr_train(std::span<const PatientRecord> patients, int num_diagnoses, int num_procedures, int num_medications,
                 const LrConfig& config = {});

}  // namespace gamenet
