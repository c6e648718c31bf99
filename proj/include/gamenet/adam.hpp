#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "gamenet/parameters.hpp"

namespace gamenet {

template <typename Scalar>
struct AdamConfig {
  Scalar learning_rate = Scalar(0.0002);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

/// Bias-corrected Adam. Moment buffers are created on the first step and keep
/// the layout of the parameter set they were created for.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig<Scalar> config = {}) : config_(config) {}

  void step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads) {
    if (!params.same_layout(grads)) {
      throw DimensionError("adam: gradient layout does not match parameters");
    }
    // All gradients are checked before any state changes.
    for (const auto& [name, g] : grads) {
      if (!g.allFinite()) throw NumericalError("adam: non-finite gradient for parameter '" + name + "'");
    }
    if (first_.empty()) {
      first_ = params.zeros_like();
      second_ = params.zeros_like();
    } else if (!first_.same_layout(params)) {
      throw DimensionError("adam: parameter layout changed between steps");
    }
    ++step_;
    const Scalar c1 = Scalar(1) - std::pow(config_.beta1, static_cast<Scalar>(step_));
    const Scalar c2 = Scalar(1) - std::pow(config_.beta2, static_cast<Scalar>(step_));
    auto m_it = first_.begin();
    auto v_it = second_.begin();
    auto g_it = grads.begin();
    for (auto p_it = params.begin(); p_it != params.end(); ++p_it, ++m_it, ++v_it, ++g_it) {
      auto& m = m_it->second;
      auto& v = v_it->second;
      const auto& g = g_it->second;
      m = config_.beta1 * m + (Scalar(1) - config_.beta1) * g;
      v = config_.beta2 * v + (Scalar(1) - config_.beta2) * g.cwiseProduct(g);
      p_it->second.array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    }
  }

  std::int64_t step_count() const { return step_; }
  const AdamConfig<Scalar>& config() const { return config_; }
  const ParameterSet<Scalar>& first_moment() const { return first_; }
  const ParameterSet<Scalar>& second_moment() const { return second_; }

 private:
  AdamConfig<Scalar> config_;
  ParameterSet<Scalar> first_;
  ParameterSet<Scalar> second_;
  std::int64_t step_ = 0;
};

}  // namespace gamenet
