#include "gamenet/encoder.hpp"

#include "gamenet/model.hpp"

namespace gamenet {

EncoderVars EncoderVars::bind(const Bindings<double>& vars) {
  return EncoderVars{vars[names::kDiagnosisEmbedding],
                     vars[names::kProcedureEmbedding],
                     GruVars<double>::bind(vars, names::kDiagnosisRnn),
                     GruVars<double>::bind(vars, names::kProcedureRnn),
                     vars[names::kQueryWeight],
                     vars[names::kQueryBias]};
}

std::pair<Var, Var> embed_visit(const Visit& visit, const EncoderVars& p, const ForwardMode& mode) {
  Var e_d = ad::embedding_sum(p.diagnosis_embedding, std::span<const int>(visit.diagnoses));
  Var e_p = ad::embedding_sum(p.procedure_embedding, std::span<const int>(visit.procedures));
  if (mode.training && mode.dropout > 0.0) {
    e_d = ad::dropout(e_d, mode.dropout, true, *mode.rng);
    e_p = ad::dropout(e_p, mode.dropout, true, *mode.rng);
  }
  return {e_d, e_p};
}

Var query(Var diagnosis_state, Var procedure_state, const EncoderVars& p) {
  if (diagnosis_state.rows() != procedure_state.rows() || diagnosis_state.cols() != 1 || procedure_state.cols() != 1) {
    throw DimensionError("query: hidden states " + ad::shape_string(diagnosis_state.rows(), diagnosis_state.cols()) +
                         " and " + ad::shape_string(procedure_state.rows(), procedure_state.cols()));
  }
  Var joined = ad::concat({diagnosis_state, procedure_state});
  return ad::add(ad::matmul(ad::transpose(p.query_weight), joined), p.query_bias);
}

EncoderTrace encode_history(std::span<const Visit> visits, const EncoderVars& p, const ForwardMode& mode) {
  Tape& tape = *p.diagnosis_embedding.tape();
  const Eigen::Index d = p.diagnosis_embedding.cols();
  Var h_d = tape.constant(Eigen::MatrixXd::Zero(d, 1));
  Var h_p = tape.constant(Eigen::MatrixXd::Zero(d, 1));

  EncoderTrace trace;
  for (const auto& visit : visits) {
    auto [e_d, e_p] = embed_visit(visit, p, mode);
    h_d = gru_cell(e_d, h_d, p.diagnosis_rnn);
    h_p = gru_cell(e_p, h_p, p.procedure_rnn);
    trace.diagnosis_embedding.push_back(e_d);
    trace.procedure_embedding.push_back(e_p);
    trace.diagnosis_state.push_back(h_d);
    trace.procedure_state.push_back(h_p);
    trace.query.push_back(query(h_d, h_p, p));
  }
  return trace;
}

}  // namespace gamenet
