#include "gamenet/memory.hpp"

#include "gamenet/model.hpp"

namespace gamenet {

MemoryBankVars MemoryBankVars::bind(const Bindings<double>& vars) {
  return MemoryBankVars{vars[names::kEhrFeatures], vars[names::kDdiFeatures], vars[names::kEhrWeight],
                        vars[names::kDdiWeight], vars[names::kBeta]};
}

Var build_memory_bank(Var ehr_normalized, Var ddi_normalized, const MemoryBankVars& p) {
  using ad::matmul;
  Var z1 = matmul(matmul(ehr_normalized, ad::tanh(matmul(ehr_normalized, p.ehr_features))), p.ehr_weight);
  Var z2 = matmul(matmul(ddi_normalized, ad::tanh(matmul(ddi_normalized, p.ddi_features))), p.ddi_weight);
  return ad::sub(z1, ad::scalar_mul(p.beta, z2));
}

DynamicMemory dm_insert(DynamicMemory dm, Var query, Eigen::VectorXd medications) {
  if (!dm.empty() && (query.rows() != dm.keys.front().rows() || medications.size() != dm.values.front().size())) {
    throw DimensionError("dm_insert: entry shape differs from stored entries");
  }
  dm.keys.push_back(query);
  dm.values.push_back(std::move(medications));
  return dm;
}

MemoryRead read_memory(Var query, Var memory_bank, const DynamicMemory& dm) {
  if (query.cols() != 1 || query.rows() != memory_bank.cols()) {
    throw DimensionError("read_memory: query " + ad::shape_string(query.rows(), query.cols()) + " vs memory bank " +
                         ad::shape_string(memory_bank.rows(), memory_bank.cols()));
  }
  Tape& tape = *memory_bank.tape();
  Var bank_t = ad::transpose(memory_bank);

  MemoryRead out;
  Var content = ad::softmax(ad::matmul(memory_bank, query));
  out.bank_output = ad::matmul(bank_t, content);
  out.attention.content = content.value();

  if (dm.empty()) {
    out.dynamic_output = tape.constant(Eigen::MatrixXd::Zero(memory_bank.cols(), 1));
    return out;
  }
  Var keys = ad::stack_rows(std::span<const Var>(dm.keys));
  Eigen::MatrixXd values_t(memory_bank.rows(), static_cast<Eigen::Index>(dm.values.size()));
  for (std::size_t i = 0; i < dm.values.size(); ++i) values_t.col(static_cast<Eigen::Index>(i)) = dm.values[i];
  Var temporal = ad::softmax(ad::matmul(keys, query));
  Var medication = ad::matmul(tape.constant(std::move(values_t)), temporal);
  out.dynamic_output = ad::matmul(bank_t, medication);
  out.attention.temporal = temporal.value();
  out.attention.medication = medication.value();
  return out;
}

}  // namespace gamenet
