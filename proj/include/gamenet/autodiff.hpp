#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gamenet/errors.hpp"

namespace gamenet::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape<Scalar>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode record. Nodes are appended in evaluation order, so parents
/// always precede children and a single reverse sweep visits each node once.
template <typename Scalar>
class Tape {
 public:
  using MatrixType = Matrix<Scalar>;
  using VarType = Var<Scalar>;
  using BackwardFn = std::function<void(Tape&, const MatrixType&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  VarType variable(MatrixType value) { return push(std::move(value), {}, nullptr, true, "variable"); }
  VarType constant(MatrixType value) { return push(std::move(value), {}, nullptr, false, "constant"); }

  VarType record(std::string_view op, MatrixType value, std::initializer_list<VarType> parents, BackwardFn backward) {
    return record(op, std::move(value), std::span<const VarType>(parents.begin(), parents.size()), std::move(backward));
  }

  VarType record(std::string_view op, MatrixType value, std::span<const VarType> parents, BackwardFn backward) {
    std::vector<std::size_t> ids;
    ids.reserve(parents.size());
    bool needs_grad = false;
    for (const auto& p : parents) {
      if (p.tape() != this) {
        throw DimensionError(std::string(op) + ": operand recorded on a different tape");
      }
      ids.push_back(p.id());
      needs_grad = needs_grad || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), std::move(ids), needs_grad ? std::move(backward) : nullptr, needs_grad, op);
  }

  const MatrixType& value(VarType v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(VarType v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& parents(VarType v) const { return nodes_.at(v.id()).parents; }

  /// Adds a gradient contribution for `v`. Multiple uses of one node sum.
  template <typename Derived>
  void accumulate(VarType v, const Eigen::MatrixBase<Derived>& g) {
    auto& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (node.value.size() == 0) return;
    auto& acc = grads_[v.id()];
    if (acc.size() == 0) {
      acc = g;
    } else {
      acc += g;
    }
  }

  /// Seeds d(root)/d(root) = 1 and sweeps the tape backwards. `root` must be
  /// a 1x1 scalar. Previous gradients are discarded.
  void backward(VarType root) {
    const auto& r = value(root);
    if (r.rows() != 1 || r.cols() != 1) {
      throw DimensionError("backward: root must be scalar, got " + shape_string(r.rows(), r.cols()));
    }
    grads_.assign(nodes_.size(), MatrixType());
    grads_[root.id()] = MatrixType::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.backward || grads_[i].size() == 0) continue;
      const MatrixType g = grads_[i];
      node.backward(*this, g);
    }
  }

  /// Gradient of the last backward() root w.r.t. `v`; zeros when `v` did not
  /// influence the root.
  MatrixType gradient(VarType v) const {
    const auto& val = value(v);
    if (v.id() < grads_.size() && grads_[v.id()].size() != 0) return grads_[v.id()];
    return MatrixType::Zero(val.rows(), val.cols());
  }

 private:
  struct Node {
    MatrixType value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  VarType push(MatrixType value, std::vector<std::size_t> parents, BackwardFn backward, bool requires_grad,
               std::string_view op) {
    if (!value.allFinite()) {
      throw NumericalError(std::string(op) + ": produced a non-finite value");
    }
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), requires_grad});
    grads_.emplace_back();
    return VarType(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<MatrixType> grads_;
};

namespace detail {

template <typename Scalar>
void require_same_shape(std::string_view op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

template <typename Scalar>
void require_vector(std::string_view op, const Var<Scalar>& a) {
  if (a.cols() != 1) {
    throw DimensionError(std::string(op) + ": expected a column vector, got " + shape_string(a.rows(), a.cols()));
  }
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.rows(), a.cols()) + " * " +
                         shape_string(b.rows(), b.cols()));
  }
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape()->record("matmul", std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().transpose();
  return a.tape()->record("transpose", std::move(out), {a},
                          [a](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, g.transpose()); });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("add", a, b);
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape()->record("add", std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("sub", a, b);
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape()->record("sub", std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("mul", a, b);
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record("mul", std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  Matrix<Scalar> out = c * a.value();
  return a.tape()->record("scale", std::move(out), {a},
                          [a, c](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, c * g); });
}

/// Multiplies every entry of `a` by the 1x1 variable `s`.
template <typename Scalar>
Var<Scalar> scalar_mul(Var<Scalar> s, Var<Scalar> a) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("scalar_mul: expected a 1x1 factor, got " + shape_string(s.rows(), s.cols()));
  }
  Matrix<Scalar> out = s.value()(0, 0) * a.value();
  return a.tape()->record("scalar_mul", std::move(out), {s, a}, [s, a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (t.requires_grad(s)) {
      t.accumulate(s, Matrix<Scalar>::Constant(1, 1, g.cwiseProduct(t.value(a)).sum()));
    }
    if (t.requires_grad(a)) t.accumulate(a, t.value(s)(0, 0) * g);
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar z) { return detail::stable_sigmoid(z); });
  return a.tape()->record("sigmoid", out, {a}, [a, out](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(out.cwiseProduct((Matrix<Scalar>::Ones(out.rows(), out.cols()) - out))));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape()->record("tanh", out, {a}, [a, out](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, (g.array() * (Scalar(1) - out.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, a.value().sum());
  const auto rows = a.rows();
  const auto cols = a.cols();
  return a.tape()->record("sum", std::move(out), {a}, [a, rows, cols](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, Matrix<Scalar>::Constant(rows, cols, g(0, 0)));
  });
}

/// Softmax over a column vector, shifted by the max logit.
template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> x) {
  detail::require_vector("softmax", x);
  if (x.rows() == 0) throw DimensionError("softmax: empty input");
  const auto& v = x.value();
  Matrix<Scalar> out = (v.array() - v.maxCoeff()).exp().matrix();
  out /= out.sum();
  return x.tape()->record("softmax", out, {x}, [x, out](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Scalar dot = out.col(0).dot(g.col(0));
    t.accumulate(x, (out.array() * (g.array() - dot)).matrix());
  });
}

/// Order-preserving concatenation of column vectors.
template <typename Scalar>
Var<Scalar> concat(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat: empty list");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    detail::require_vector("concat", p);
    total += p.rows();
  }
  Matrix<Scalar> out(total, 1);
  std::vector<Eigen::Index> offsets;
  offsets.reserve(parts.size());
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    out.block(offset, 0, p.rows(), 1) = p.value();
    offset += p.rows();
  }
  std::vector<Var<Scalar>> held(parts.begin(), parts.end());
  return parts.front().tape()->record("concat", std::move(out), std::span<const Var<Scalar>>(held),
                                      [held, offsets](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                        for (std::size_t i = 0; i < held.size(); ++i) {
                                          t.accumulate(held[i], g.block(offsets[i], 0, held[i].rows(), 1));
                                        }
                                      });
}

template <typename Scalar>
Var<Scalar> concat(std::initializer_list<Var<Scalar>> parts) {
  return concat(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

/// Stacks k column vectors of length n into a k x n matrix (one row each).
template <typename Scalar>
Var<Scalar> stack_rows(std::span<const Var<Scalar>> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: empty list");
  const Eigen::Index n = rows.front().rows();
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require_vector("stack_rows", rows[i]);
    if (rows[i].rows() != n) {
      throw DimensionError("stack_rows: row " + std::to_string(i) + " has length " + std::to_string(rows[i].rows()) +
                           ", expected " + std::to_string(n));
    }
    out.row(static_cast<Eigen::Index>(i)) = rows[i].value().transpose();
  }
  std::vector<Var<Scalar>> held(rows.begin(), rows.end());
  return rows.front().tape()->record("stack_rows", std::move(out), std::span<const Var<Scalar>>(held),
                                     [held](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                       for (std::size_t i = 0; i < held.size(); ++i) {
                                         t.accumulate(held[i], g.row(static_cast<Eigen::Index>(i)).transpose());
                                       }
                                     });
}

/// Sum of the selected rows of `table`, as a column vector. Equivalent to
/// table^T * multi_hot(rows) without materialising the multi-hot.
template <typename Scalar>
Var<Scalar> embedding_sum(Var<Scalar> table, std::span<const int> rows) {
  const auto& w = table.value();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(w.cols(), 1);
  for (int r : rows) {
    if (r < 0 || r >= w.rows()) {
      throw DimensionError("embedding_sum: row " + std::to_string(r) + " outside table " +
                           shape_string(w.rows(), w.cols()));
    }
    out.col(0) += w.row(r).transpose();
  }
  std::vector<int> held(rows.begin(), rows.end());
  return table.tape()->record("embedding_sum", std::move(out), {table},
                              [table, held](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                const auto& w = t.value(table);
                                Matrix<Scalar> d = Matrix<Scalar>::Zero(w.rows(), w.cols());
                                for (int r : held) d.row(r) += g.col(0).transpose();
                                t.accumulate(table, d);
                              });
}

/// Inverted dropout: kept entries are scaled by 1/(1-p) so evaluation mode is
/// the identity.
template <typename Scalar, typename Rng>
Var<Scalar> dropout(Var<Scalar> x, Scalar p, bool training, Rng& rng) {
  if (!(p >= Scalar(0) && p < Scalar(1))) {
    throw std::invalid_argument("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == Scalar(0)) return x;
  std::uniform_real_distribution<Scalar> uniform(Scalar(0), Scalar(1));
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - p);
  Matrix<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform(rng) < p ? Scalar(0) : keep_scale;
  }
  Matrix<Scalar> out = x.value().cwiseProduct(mask);
  return x.tape()->record("dropout", std::move(out), {x}, [x, mask](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g.cwiseProduct(mask));
  });
}

/// Sum over entries of the binary cross entropy between sigmoid(logits) and
/// `targets`, evaluated as softplus(z) - y*z.
template <typename Scalar>
Var<Scalar> bce_with_logits(Var<Scalar> logits, const Vector<Scalar>& targets) {
  detail::require_vector("bce_with_logits", logits);
  if (targets.size() != logits.rows()) {
    throw DimensionError("bce_with_logits: " + std::to_string(logits.rows()) + " logits vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const auto& z = logits.value();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar zi = z(i, 0);
    total += std::max(zi, Scalar(0)) - targets(i) * zi + std::log1p(std::exp(-std::abs(zi)));
  }
  return logits.tape()->record("bce_with_logits", Matrix<Scalar>::Constant(1, 1, total), {logits},
                               [logits, targets](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                                 const auto& z = t.value(logits);
                                 Matrix<Scalar> d(z.rows(), 1);
                                 for (Eigen::Index i = 0; i < z.rows(); ++i) {
                                   d(i, 0) = g(0, 0) * (detail::stable_sigmoid(z(i, 0)) - targets(i));
                                 }
                                 t.accumulate(logits, d);
                               });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  return sub(a, b);
}

}  // namespace gamenet::ad
