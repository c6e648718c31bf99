#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gamenet/autodiff.hpp"

namespace gamenet {

/// Named, ordered collection of dense tensors. Insertion order is the
/// checkpoint order.
template <typename Scalar>
class ParameterSet {
 public:
  using MatrixType = ad::Matrix<Scalar>;
  using Entry = std::pair<std::string, MatrixType>;

  void add(std::string name, MatrixType value) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  MatrixType& at(const std::string& name) { return entries_[lookup(name)].second; }
  const MatrixType& at(const std::string& name) const { return entries_[lookup(name)].second; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& [_, m] : entries_) n += m.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, m] : entries_) out.add(name, MatrixType::Zero(m.rows(), m.cols()));
    return out;
  }

  bool same_layout(const ParameterSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& [name, m] = entries_[i];
      const auto& [oname, om] = other.entries_[i];
      if (name != oname || m.rows() != om.rows() || m.cols() != om.cols()) return false;
    }
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters placed on a tape, looked up by name.
template <typename Scalar>
class Bindings {
 public:
  Bindings() = default;

  /// Records every parameter on `tape`; as constants when `trainable` is false.
  Bindings(ad::Tape<Scalar>& tape, const ParameterSet<Scalar>& params, bool trainable = true) {
    for (const auto& [name, m] : params) {
      vars_.emplace(name, trainable ? tape.variable(m) : tape.constant(m));
      order_.push_back(name);
    }
  }

  ad::Var<Scalar> operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw std::out_of_range("unbound parameter '" + name + "'");
    return it->second;
  }

  void set(const std::string& name, ad::Var<Scalar> v) {
    if (!vars_.contains(name)) order_.push_back(name);
    vars_[name] = v;
  }

  /// Gradients of the last backward pass, in parameter order.
  ParameterSet<Scalar> gradients(const ad::Tape<Scalar>& tape) const {
    ParameterSet<Scalar> out;
    for (const auto& name : order_) out.add(name, tape.gradient(vars_.at(name)));
    return out;
  }

 private:
  std::unordered_map<std::string, ad::Var<Scalar>> vars_;
  std::vector<std::string> order_;
};

}  // namespace gamenet
