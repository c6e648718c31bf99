#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gamenet/parameters.hpp"

namespace gamenet {

template <typename Scalar>
struct GradCheckReport {
  /// max over tensors of |analytic - numeric|_2 / (|analytic|_2 + |numeric|_2)
  Scalar max_relative_error = 0;
  std::vector<std::pair<std::string, Scalar>> per_tensor;
  // Coordinate with the largest absolute disagreement.
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
};

/// Compares tape gradients of a scalar loss against central differences.
/// `loss(tape, bindings)` must return a 1x1 Var and be deterministic in the
/// parameters (no dropout).
template <typename Scalar, typename LossFn>
GradCheckReport<Scalar> finite_difference_check(LossFn&& loss, ParameterSet<Scalar>& params,
                                                Scalar step = Scalar(1e-5)) {
  ParameterSet<Scalar> analytic;
  {
    ad::Tape<Scalar> tape;
    Bindings<Scalar> vars(tape, params);
    auto root = loss(tape, vars);
    tape.backward(root);
    analytic = vars.gradients(tape);
  }

  auto evaluate = [&]() {
    ad::Tape<Scalar> tape;
    Bindings<Scalar> vars(tape, params, /*trainable=*/false);
    return loss(tape, vars).value()(0, 0);
  };

  GradCheckReport<Scalar> report;
  Scalar worst_abs = -1;
  for (auto& [name, theta] : params) {
    const auto& a = analytic.at(name);
    ad::Matrix<Scalar> numeric(theta.rows(), theta.cols());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const Scalar saved = theta.data()[i];
      theta.data()[i] = saved + step;
      const Scalar plus = evaluate();
      theta.data()[i] = saved - step;
      const Scalar minus = evaluate();
      theta.data()[i] = saved;
      numeric.data()[i] = (plus - minus) / (Scalar(2) * step);
      const Scalar diff = std::abs(numeric.data()[i] - a.data()[i]);
      if (diff > worst_abs) {
        worst_abs = diff;
        report.worst_tensor = name;
        report.worst_index = i;
        report.worst_analytic = a.data()[i];
        report.worst_numeric = numeric.data()[i];
      }
    }
    const Scalar denom = a.norm() + numeric.norm();
    const Scalar rel = denom > std::numeric_limits<Scalar>::min() ? (a - numeric).norm() / denom : Scalar(0);
    report.per_tensor.emplace_back(name, rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  return report;
}

}  // namespace gamenet
