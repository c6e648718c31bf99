#include "gamenet/model.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace gamenet {

void ModelConfig::validate() const {
  if (num_diagnoses <= 0 || num_procedures <= 0 || num_medications <= 0) {
    throw std::invalid_argument("model config: vocabulary sizes must be positive");
  }
  if (dim <= 0) throw std::invalid_argument("model config: dim must be positive");
  if (!(init_range > 0)) throw std::invalid_argument("model config: init_range must be positive");
}

ParameterSet<double> init_parameters(const ModelConfig& c, std::mt19937_64& rng) {
  c.validate();
  std::uniform_real_distribution<double> uniform(-c.init_range, c.init_range);
  ParameterSet<double> params;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
    params.add(std::move(name), std::move(m));
  };
  const int d = c.dim;
  add(names::kDiagnosisEmbedding, c.num_diagnoses, d);
  add(names::kProcedureEmbedding, c.num_procedures, d);
  for (const char* rnn : {names::kDiagnosisRnn, names::kProcedureRnn}) {
    for (const char* t : kGruTensorNames) add(std::string(rnn) + "." + t, d, t[0] == 'b' ? 1 : d);
  }
  add(names::kQueryWeight, 2 * d, d);
  add(names::kQueryBias, d, 1);
  add(names::kEhrFeatures, c.num_medications, d);
  add(names::kDdiFeatures, c.num_medications, d);
  add(names::kEhrWeight, d, d);
  add(names::kDdiWeight, d, d);
  params.add(names::kBeta, Eigen::MatrixXd::Constant(1, 1, c.beta_init));
  add(names::kOutputWeight, 3 * d, c.num_medications);
  add(names::kOutputBias, c.num_medications, 1);
  return params;
}

ModelConfig infer_model_config(const ParameterSet<double>& params) {
  ModelConfig c;
  c.num_diagnoses = static_cast<int>(params.at(names::kDiagnosisEmbedding).rows());
  c.num_procedures = static_cast<int>(params.at(names::kProcedureEmbedding).rows());
  c.num_medications = static_cast<int>(params.at(names::kEhrFeatures).rows());
  c.dim = static_cast<int>(params.at(names::kDiagnosisEmbedding).cols());
  c.beta_init = params.at(names::kBeta)(0, 0);
  return c;
}

HeadVars HeadVars::bind(const Bindings<double>& vars) {
  return HeadVars{vars[names::kOutputWeight], vars[names::kOutputBias]};
}

ModelVars ModelVars::bind(const Bindings<double>& vars) {
  return ModelVars{EncoderVars::bind(vars), MemoryBankVars::bind(vars), HeadVars::bind(vars)};
}

Var output_logits(Var query, Var bank_output, Var dynamic_output, const HeadVars& head) {
  if (query.rows() != bank_output.rows() || query.rows() != dynamic_output.rows()) {
    throw DimensionError("output_logits: query, o_b and o_d must share dimension d");
  }
  Var joined = ad::concat({query, bank_output, dynamic_output});
  return ad::add(ad::matmul(ad::transpose(head.weight), joined), head.bias);
}

Prediction make_prediction(const Eigen::VectorXd& probabilities) {
  Prediction p{probabilities, {}};
  for (Eigen::Index j = 0; j < probabilities.size(); ++j) {
    if (probabilities(j) > 0.5) p.labels.push_back(static_cast<int>(j));
  }
  return p;
}

Prediction predict_visit(Var query, Var bank_output, Var dynamic_output, const HeadVars& head) {
  return make_prediction(ad::sigmoid(output_logits(query, bank_output, dynamic_output, head)).value());
}

PatientOutput forward_patient(const PatientRecord& patient, const ModelVars& vars, Var memory_bank,
                              const ForwardMode& mode) {
  const auto n_meds = static_cast<int>(memory_bank.rows());
  PatientOutput out;
  out.trace = encode_history(patient.visits, vars.encoder, mode);
  DynamicMemory dm;
  for (std::size_t t = 0; t < patient.visits.size(); ++t) {
    Var q = out.trace.query[t];
    MemoryRead read = read_memory(q, memory_bank, dm);
    Var logits = output_logits(q, read.bank_output, read.dynamic_output, vars.head);
    out.visits.push_back(VisitOutput{logits, ad::sigmoid(logits), std::move(read.attention), dm.size()});
    dm = dm_insert(std::move(dm), q, multi_hot(patient.visits[t].medications, n_meds));
  }
  return out;
}

Eigen::MatrixXd compute_memory_bank(const ParameterSet<double>& params, const GraphSet& graphs) {
  Tape tape;
  Bindings<double> vars(tape, params, /*trainable=*/false);
  return build_memory_bank(tape.constant(graphs.ehr_normalized), tape.constant(graphs.ddi_normalized),
                           MemoryBankVars::bind(vars))
      .value();
}

namespace {

PatientOutput eval_patient(Tape& tape, const ParameterSet<double>& params, const Eigen::MatrixXd& bank,
                           const PatientRecord& patient) {
  Bindings<double> vars(tape, params, /*trainable=*/false);
  return forward_patient(patient, ModelVars::bind(vars), tape.constant(bank), ForwardMode::eval());
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<PatientPredictions> predict_patients(const ParameterSet<double>& params, const GraphSet& graphs,
                                                 std::span<const PatientRecord> patients, int threads) {
  const Eigen::MatrixXd bank = compute_memory_bank(params, graphs);
  std::vector<PatientPredictions> out(patients.size());
  parallel_for(patients.size(), threads, [&](std::size_t k) {
    Tape tape;
    const auto result = eval_patient(tape, params, bank, patients[k]);
    for (const auto& v : result.visits) {
      auto pred = make_prediction(v.probabilities.value());
      out[k].labels.push_back(std::move(pred.labels));
      out[k].probabilities.push_back(std::move(pred.probabilities));
    }
  });
  return out;
}

Recommendation recommend(const ParameterSet<double>& params, const GraphSet& graphs, const PatientRecord& patient) {
  const Eigen::MatrixXd bank = compute_memory_bank(params, graphs);
  Tape tape;
  const auto result = eval_patient(tape, params, bank, patient);
  Recommendation rec;
  for (const auto& v : result.visits) {
    rec.visits.push_back(make_prediction(v.probabilities.value()));
    rec.attention.push_back(v.attention);
  }
  return rec;
}

}  // namespace gamenet
