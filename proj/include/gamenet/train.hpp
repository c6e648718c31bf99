#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gamenet/adam.hpp"
#include "gamenet/checkpoint.hpp"
#include "gamenet/losses.hpp"
#include "gamenet/model.hpp"

namespace gamenet {

struct TrainConfig {
  int epochs = 40;
  double learning_rate = 0.0002;
  double dropout = 0.4;
  std::uint64_t seed = 0;
  bool use_ddi_loss = true;
  LossConfig loss;
  int threads = 1;  // validation only; updates are strictly sequential

  void validate() const;
};

struct ValidationSummary {
  double jaccard = 0;
  double f1 = 0;
  double prauc = 0;
  double ddi_rate = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_prediction_loss = 0;
  double mean_ddi_loss = 0;
  std::size_t prediction_branch_count = 0;
  std::size_t ddi_branch_count = 0;
  double temperature = 0;  // after the epoch's last update
  ValidationSummary validation;
  bool best = false;
};

nlohmann::ordered_json to_json(const EpochLog& log);

struct PatientStep {
  double prediction_loss = 0;
  double ddi_loss = 0;
  double current_ddi_rate = 0;  // s' from this patient's thresholded predictions
  LossBranch branch = LossBranch::prediction;
  std::vector<std::size_t> memory_rows;  // dynamic memory size at each visit's prediction
};

/// Per-patient optimisation state: parameters, Adam moments, annealing
/// temperature and the independent random streams for initialisation,
/// visiting order, dropout and branch selection.
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig config, GraphSet graphs);

  /// One update on one patient: forward all visits, pick the loss branch,
  /// back-propagate, step Adam, decay the temperature.
  PatientStep train_patient(const PatientRecord& patient);

  /// One pass over `train` in a freshly shuffled order, followed by
  /// validation. Tracks the best parameters by validation Jaccard.
  EpochLog run_epoch(std::span<const PatientRecord> train, std::span<const PatientRecord> validation);

  const ParameterSet<double>& parameters() const { return params_; }
  ParameterSet<double>& parameters() { return params_; }
  const ParameterSet<double>& best_parameters() const { return best_params_; }
  int best_epoch() const { return best_epoch_; }
  double best_validation_jaccard() const { return best_jaccard_; }
  double temperature() const { return temperature_; }
  std::int64_t updates() const { return adam_.step_count(); }
  const ModelConfig& model_config() const { return model_; }
  const TrainConfig& config() const { return config_; }
  const GraphSet& graphs() const { return graphs_; }

 private:
  ModelConfig model_;
  TrainConfig config_;
  GraphSet graphs_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 order_rng_;
  std::mt19937_64 dropout_rng_;
  std::mt19937_64 anneal_rng_;
  ParameterSet<double> params_;
  ParameterSet<double> best_params_;
  Adam<double> adam_;
  double temperature_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_jaccard_ = -1;
};

ValidationSummary validate_model(const ParameterSet<double>& params, const GraphSet& graphs,
                                 std::span<const PatientRecord> patients, int threads = 1);

struct TrainResult {
  ModelConfig model;
  ParameterSet<double> best_parameters;
  int best_epoch = 0;
  double best_validation_jaccard = 0;
  std::vector<EpochLog> log;
};

TrainResult train(const DatasetSplit& split, const GraphSet& graphs, const ModelConfig& model,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Checkpoint tensors are the model parameters plus the raw adjacency
/// matrices ("graph.ehr_adjacency", "graph.ddi_adjacency").
Checkpoint make_checkpoint(const TrainResult& result, const GraphSet& graphs, const TrainConfig& config);

struct TrainingArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
};

/// Writes checkpoint.bin and train_log.jsonl into `out_dir`.
TrainingArtifacts save_training(const std::filesystem::path& out_dir, const TrainResult& result, const GraphSet& graphs,
                                const TrainConfig& config);

struct LoadedModel {
  ParameterSet<double> parameters;
  GraphSet graphs;
  ModelConfig model;
  nlohmann::ordered_json metadata;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace gamenet
