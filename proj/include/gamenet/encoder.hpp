#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "gamenet/autodiff.hpp"
#include "gamenet/data.hpp"
#include "gamenet/gru.hpp"
#include "gamenet/parameters.hpp"

namespace gamenet {

using Tape = ad::Tape<double>;
using Var = ad::Var<double>;

/// Dropout switch threaded through a forward pass. Evaluation mode never
/// touches the generator.
struct ForwardMode {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  static ForwardMode eval() { return {}; }
  static ForwardMode train(double p, std::mt19937_64& rng) { return {true, p, &rng}; }
};

struct EncoderVars {
  Var diagnosis_embedding;  // |C_d| x d
  Var procedure_embedding;  // |C_p| x d
  GruVars<double> diagnosis_rnn;
  GruVars<double> procedure_rnn;
  Var query_weight;  // 2d x d
  Var query_bias;    // d x 1

  static EncoderVars bind(const Bindings<double>& vars);
};

/// Hidden states and queries for visits 1..T.
struct EncoderTrace {
  std::vector<Var> diagnosis_embedding;
  std::vector<Var> procedure_embedding;
  std::vector<Var> diagnosis_state;
  std::vector<Var> procedure_state;
  std::vector<Var> query;

  std::size_t size() const { return query.size(); }
};

/// Sum of the embedding rows of the active codes of each stream, followed by
/// dropout in training mode. An empty code list gives the zero vector.
std::pair<Var, Var> embed_visit(const Visit& visit, const EncoderVars& p, const ForwardMode& mode);

/// q = W^T [h_d; h_p] + b
Var query(Var diagnosis_state, Var procedure_state, const EncoderVars& p);

/// Runs both GRU chains from a zero state over `visits` and emits a query per
/// prefix.
EncoderTrace encode_history(std::span<const Visit> visits, const EncoderVars& p, const ForwardMode& mode);

}  // namespace gamenet
