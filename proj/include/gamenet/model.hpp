#pragma once

#include <random>
#include <span>
#include <vector>

#include "gamenet/encoder.hpp"
#include "gamenet/graphs.hpp"
#include "gamenet/memory.hpp"
#include "gamenet/metrics.hpp"

namespace gamenet {

namespace names {
inline constexpr const char* kDiagnosisEmbedding = "encoder.diagnosis_embedding";
inline constexpr const char* kProcedureEmbedding = "encoder.procedure_embedding";
inline constexpr const char* kDiagnosisRnn = "encoder.diagnosis_rnn";
inline constexpr const char* kProcedureRnn = "encoder.procedure_rnn";
inline constexpr const char* kQueryWeight = "encoder.query_weight";
inline constexpr const char* kQueryBias = "encoder.query_bias";
inline constexpr const char* kEhrFeatures = "memory.ehr_features";
inline constexpr const char* kDdiFeatures = "memory.ddi_features";
inline constexpr const char* kEhrWeight = "memory.ehr_weight";
inline constexpr const char* kDdiWeight = "memory.ddi_weight";
inline constexpr const char* kBeta = "memory.beta";
inline constexpr const char* kOutputWeight = "head.weight";
inline constexpr const char* kOutputBias = "head.bias";
}  // namespace names

struct ModelConfig {
  int num_diagnoses = 0;
  int num_procedures = 0;
  int num_medications = 0;
  int dim = 64;
  double beta_init = 0.1;
  double init_range = 0.2;  // trainable tensors start from U(-init_range, init_range)

  void validate() const;
};

/// Every trainable tensor, in checkpoint order.
ParameterSet<double> init_parameters(const ModelConfig& config, std::mt19937_64& rng);

/// Recovers vocabulary sizes and d from tensor shapes.
ModelConfig infer_model_config(const ParameterSet<double>& params);

struct HeadVars {
  Var weight;  // 3d x |C_m|
  Var bias;    // |C_m| x 1

  static HeadVars bind(const Bindings<double>& vars);
};

struct ModelVars {
  EncoderVars encoder;
  MemoryBankVars memory;
  HeadVars head;

  static ModelVars bind(const Bindings<double>& vars);
};

/// Pre-sigmoid scores W^T [q; o_b; o_d] + b.
Var output_logits(Var query, Var bank_output, Var dynamic_output, const HeadVars& head);

struct Prediction {
  Eigen::VectorXd probabilities;
  CodeSet labels;  // {j : probabilities[j] > 0.5}
};

Prediction make_prediction(const Eigen::VectorXd& probabilities);
Prediction predict_visit(Var query, Var bank_output, Var dynamic_output, const HeadVars& head);

struct VisitOutput {
  Var logits;
  Var probabilities;
  AttentionRecord attention;
  std::size_t memory_rows = 0;  // dynamic memory size when this visit was predicted
};

struct PatientOutput {
  EncoderTrace trace;
  std::vector<VisitOutput> visits;
};

/// Full forward pass over one patient: encode, read both memories, predict,
/// then insert (q^t, c_m^t) into the dynamic memory. The memory always holds
/// recorded prescriptions, so a visit with an empty medication list inserts a
/// zero row.
PatientOutput forward_patient(const PatientRecord& patient, const ModelVars& vars, Var memory_bank,
                              const ForwardMode& mode);

/// Memory bank evaluated once for fixed parameters.
Eigen::MatrixXd compute_memory_bank(const ParameterSet<double>& params, const GraphSet& graphs);

/// Evaluation-mode predictions for every patient; `threads` > 1 splits the
/// patients across workers with results in input order.
std::vector<PatientPredictions> predict_patients(const ParameterSet<double>& params, const GraphSet& graphs,
                                                 std::span<const PatientRecord> patients, int threads = 1);

/// Evaluation-mode forward with attention records for every visit.
struct Recommendation {
  std::vector<Prediction> visits;
  std::vector<AttentionRecord> attention;
};

Recommendation recommend(const ParameterSet<double>& params, const GraphSet& graphs, const PatientRecord& patient);

}  // namespace gamenet
