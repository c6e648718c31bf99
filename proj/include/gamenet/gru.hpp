#pragma once

#include <string>

#include "gamenet/autodiff.hpp"
#include "gamenet/parameters.hpp"

namespace gamenet {

/// Gate weights for one GRU chain. W_* act on the input, U_* on the hidden
/// state; all square d x d, biases d x 1.
template <typename Scalar>
struct GruVars {
  ad::Var<Scalar> W_z, U_z, b_z;
  ad::Var<Scalar> W_r, U_r, b_r;
  ad::Var<Scalar> W_h, U_h, b_h;

  static GruVars bind(const Bindings<Scalar>& vars, const std::string& prefix) {
    return GruVars{vars[prefix + ".W_z"], vars[prefix + ".U_z"], vars[prefix + ".b_z"],
                   vars[prefix + ".W_r"], vars[prefix + ".U_r"], vars[prefix + ".b_r"],
                   vars[prefix + ".W_h"], vars[prefix + ".U_h"], vars[prefix + ".b_h"]};
  }
};

inline constexpr const char* kGruTensorNames[] = {"W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h"};

/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// n = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * n  ==  h + z * (n - h)
template <typename Scalar>
ad::Var<Scalar> gru_cell(ad::Var<Scalar> x, ad::Var<Scalar> h, const GruVars<Scalar>& p) {
  if (x.cols() != 1 || h.cols() != 1 || x.rows() != p.W_z.cols() || h.rows() != p.U_z.cols() ||
      p.W_z.rows() != h.rows()) {
    throw DimensionError("gru_cell: input " + ad::shape_string(x.rows(), x.cols()) + ", hidden " +
                         ad::shape_string(h.rows(), h.cols()) + ", W_z " +
                         ad::shape_string(p.W_z.rows(), p.W_z.cols()));
  }
  using ad::add;
  using ad::matmul;
  auto z = ad::sigmoid(add(add(matmul(p.W_z, x), matmul(p.U_z, h)), p.b_z));
  auto r = ad::sigmoid(add(add(matmul(p.W_r, x), matmul(p.U_r, h)), p.b_r));
  auto n = ad::tanh(add(add(matmul(p.W_h, x), matmul(p.U_h, ad::mul(r, h))), p.b_h));
  return add(h, ad::mul(z, ad::sub(n, h)));
}

}  // namespace gamenet
