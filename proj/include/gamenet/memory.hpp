#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gamenet/encoder.hpp"

namespace gamenet {

struct MemoryBankVars {
  Var ehr_features;  // W_e1, |C_m| x d
  Var ddi_features;  // W_e2, |C_m| x d
  Var ehr_weight;    // W_1, d x d
  Var ddi_weight;    // W_2, d x d
  Var beta;          // 1 x 1

  static MemoryBankVars bind(const Bindings<double>& vars);
};

/// Two-layer GCN per graph, fused as
///   Z_1 = A_e tanh(A_e W_e1) W_1
///   Z_2 = A_d tanh(A_d W_e2) W_2
///   M_b = Z_1 - beta Z_2
/// `ehr_normalized` and `ddi_normalized` are the renormalised adjacencies.
Var build_memory_bank(Var ehr_normalized, Var ddi_normalized, const MemoryBankVars& p);

/// Per-patient key/value store: keys are past queries, values the past
/// prescriptions as multi-hot rows, both in visit order.
struct DynamicMemory {
  std::vector<Var> keys;
  std::vector<Eigen::VectorXd> values;

  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
};

DynamicMemory dm_insert(DynamicMemory dm, Var query, Eigen::VectorXd medications);

/// Attention weights from one read, kept for explanations.
struct AttentionRecord {
  Eigen::VectorXd content;     // a_c over medications
  Eigen::VectorXd temporal;    // a_s over past visits (empty on the first visit)
  Eigen::VectorXd medication;  // a_m = M_{d,v}^T a_s (empty on the first visit)
};

struct MemoryRead {
  Var bank_output;     // o_b
  Var dynamic_output;  // o_d
  AttentionRecord attention;
};

/// o_b = M_b^T softmax(M_b q); o_d = M_b^T M_{d,v}^T softmax(M_{d,k} q), or 0
/// while the dynamic memory is empty.
MemoryRead read_memory(Var query, Var memory_bank, const DynamicMemory& dm);

}  // namespace gamenet
