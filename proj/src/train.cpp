#include "gamenet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gamenet {
namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

constexpr const char* kEhrAdjacency = "graph.ehr_adjacency";
constexpr const char* kDdiAdjacency = "graph.ddi_adjacency";

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("train config: dropout must lie in [0, 1)");
  if (threads <= 0) throw std::invalid_argument("train config: threads must be positive");
  loss.validate();
}

nlohmann::ordered_json to_json(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["mean_prediction_loss"] = log.mean_prediction_loss;
  j["mean_ddi_loss"] = log.mean_ddi_loss;
  j["prediction_branch_count"] = log.prediction_branch_count;
  j["ddi_branch_count"] = log.ddi_branch_count;
  j["temperature"] = log.temperature;
  j["validation"] = {{"jaccard", log.validation.jaccard},
                     {"f1", log.validation.f1},
                     {"prauc", log.validation.prauc},
                     {"ddi_rate", log.validation.ddi_rate}};
  j["best"] = log.best;
  return j;
}

Trainer::Trainer(ModelConfig model, TrainConfig config, GraphSet graphs)
    : model_(model),
      config_(config),
      graphs_(std::move(graphs)),
      init_rng_(stream(config.seed, 1)),
      order_rng_(stream(config.seed, 2)),
      dropout_rng_(stream(config.seed, 3)),
      anneal_rng_(stream(config.seed, 4)),
      adam_(AdamConfig<double>{config.learning_rate}),
      temperature_(config.loss.initial_temperature) {
  config_.validate();
  model_.validate();
  if (graphs_.ehr_adjacency.rows() != model_.num_medications) {
    throw DimensionError("trainer: graphs cover " + std::to_string(graphs_.ehr_adjacency.rows()) +
                         " medications, model expects " + std::to_string(model_.num_medications));
  }
  params_ = init_parameters(model_, init_rng_);
  best_params_ = params_;
}

PatientStep Trainer::train_patient(const PatientRecord& patient) {
  if (patient.visits.empty()) throw std::invalid_argument("train_patient: patient has no visits");
  Tape tape;
  Bindings<double> bound(tape, params_);
  const ModelVars vars = ModelVars::bind(bound);
  Var bank =
      build_memory_bank(tape.constant(graphs_.ehr_normalized), tape.constant(graphs_.ddi_normalized), vars.memory);
  const auto out = forward_patient(patient, vars, bank, ForwardMode::train(config_.dropout, dropout_rng_));

  std::vector<Var> logits, probabilities;
  std::vector<Eigen::VectorXd> targets;
  std::vector<CodeSet> truth, predicted;
  PatientStep step;
  for (std::size_t t = 0; t < out.visits.size(); ++t) {
    const auto& v = out.visits[t];
    logits.push_back(v.logits);
    probabilities.push_back(v.probabilities);
    targets.push_back(multi_hot(patient.visits[t].medications, model_.num_medications));
    truth.push_back(patient.visits[t].medications);
    predicted.push_back(make_prediction(v.probabilities.value()).labels);
    step.memory_rows.push_back(v.memory_rows);
  }

  Var lp = prediction_loss(bce_loss(logits, targets), margin_loss(probabilities, truth), config_.loss);
  Var lddi = ddi_loss(probabilities, graphs_.ddi_adjacency);
  step.prediction_loss = lp.value()(0, 0);
  step.ddi_loss = lddi.value()(0, 0);
  step.current_ddi_rate = ddi_rate(predicted, graphs_.ddi_adjacency);

  Var chosen = lp;
  // Once the temperature underflows to 0 the branch probability is its limit, 0.
  if (config_.use_ddi_loss && temperature_ > 0) {
    std::tie(chosen, step.branch) =
        combined_loss(lp, lddi, step.current_ddi_rate, config_.loss, temperature_, anneal_rng_);
  }
  tape.backward(chosen);
  adam_.step(params_, bound.gradients(tape));
  temperature_ = config_.loss.initial_temperature *
                 std::pow(config_.loss.temperature_decay, static_cast<double>(adam_.step_count()));
  return step;
}

EpochLog Trainer::run_epoch(std::span<const PatientRecord> train, std::span<const PatientRecord> validation) {
  ++epoch_;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), order_rng_);

  EpochLog log;
  log.epoch = epoch_;
  for (std::size_t k : order) {
    PatientStep step;
    try {
      step = train_patient(train[k]);
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch_) + ", patient '" + train[k].patient_id + "': " + e.what());
    }
    log.mean_prediction_loss += step.prediction_loss;
    log.mean_ddi_loss += step.ddi_loss;
    (step.branch == LossBranch::ddi ? log.ddi_branch_count : log.prediction_branch_count) += 1;
  }
  if (!train.empty()) {
    log.mean_prediction_loss /= static_cast<double>(train.size());
    log.mean_ddi_loss /= static_cast<double>(train.size());
  }
  log.temperature = temperature_;
  if (!validation.empty()) {
    log.validation = validate_model(params_, graphs_, validation, config_.threads);
  }
  if (log.validation.jaccard > best_jaccard_) {
    best_jaccard_ = log.validation.jaccard;
    best_epoch_ = epoch_;
    best_params_ = params_;
    log.best = true;
  }
  return log;
}

ValidationSummary validate_model(const ParameterSet<double>& params, const GraphSet& graphs,
                                 std::span<const PatientRecord> patients, int threads) {
  const auto preds = predict_patients(params, graphs, patients, threads);
  const auto report = evaluate("validation", patients, preds, graphs.ddi_adjacency);
  return ValidationSummary{report.jaccard, report.f1, report.prauc, report.ddi_rate};
}

TrainResult train(const DatasetSplit& split, const GraphSet& graphs, const ModelConfig& model,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");
  Trainer trainer(model, config, graphs);
  TrainResult result;
  result.model = model;
  for (int e = 0; e < config.epochs; ++e) {
    result.log.push_back(trainer.run_epoch(split.train, split.validation));
    if (on_epoch) on_epoch(result.log.back());
  }
  result.best_parameters = trainer.best_parameters();
  result.best_epoch = trainer.best_epoch();
  result.best_validation_jaccard = trainer.best_validation_jaccard();
  return result;
}

Checkpoint make_checkpoint(const TrainResult& result, const GraphSet& graphs, const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.tensors = result.best_parameters;
  ckpt.tensors.add(kEhrAdjacency, graphs.ehr_adjacency);
  ckpt.tensors.add(kDdiAdjacency, graphs.ddi_adjacency);
  auto& meta = ckpt.metadata;
  meta["vocab_sizes"] = {{"diagnosis", result.model.num_diagnoses},
                         {"procedure", result.model.num_procedures},
                         {"medication", result.model.num_medications}};
  meta["dim"] = result.model.dim;
  meta["beta"] = result.best_parameters.at(names::kBeta)(0, 0);
  meta["seed"] = config.seed;
  meta["best_epoch"] = result.best_epoch;
  meta["best_validation_jaccard"] = result.best_validation_jaccard;
  meta["train_config"] = {{"epochs", config.epochs},
                          {"learning_rate", config.learning_rate},
                          {"dropout", config.dropout},
                          {"use_ddi_loss", config.use_ddi_loss},
                          {"pi", {config.loss.pi_bce, config.loss.pi_margin}},
                          {"target_ddi_rate", config.loss.target_ddi_rate},
                          {"initial_temperature", config.loss.initial_temperature},
                          {"temperature_decay", config.loss.temperature_decay},
                          {"init_range", result.model.init_range},
                          {"beta_init", result.model.beta_init}};
  return ckpt;
}

TrainingArtifacts save_training(const std::filesystem::path& out_dir, const TrainResult& result, const GraphSet& graphs,
                                const TrainConfig& config) {
  std::filesystem::create_directories(out_dir);
  TrainingArtifacts paths{out_dir / "checkpoint.bin", out_dir / "train_log.jsonl"};
  save_checkpoint(paths.checkpoint, make_checkpoint(result, graphs, config));
  std::ofstream log(paths.log, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write training log: " + paths.log.string());
  for (const auto& e : result.log) log << to_json(e).dump() << '\n';
  return paths;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  LoadedModel out;
  if (!ckpt.tensors.contains(kEhrAdjacency) || !ckpt.tensors.contains(kDdiAdjacency)) {
    throw DataError("checkpoint lacks graph tensors: " + checkpoint.string());
  }
  for (const auto& [name, m] : ckpt.tensors) {
    if (name != kEhrAdjacency && name != kDdiAdjacency) out.parameters.add(name, m);
  }
  out.graphs = GraphSet::from_adjacency(ckpt.tensors.at(kEhrAdjacency), ckpt.tensors.at(kDdiAdjacency));
  try {
    out.model = infer_model_config(out.parameters);
  } catch (const std::out_of_range& e) {
    throw DataError("checkpoint is missing model tensors: " + std::string(e.what()));
  }
  out.metadata = std::move(ckpt.metadata);
  return out;
}

}  // namespace gamenet
