#pragma once

// Matrix-valued reverse-mode automatic differentiation.
//
// A BasicTape records every primitive applied during a forward pass as a node
// holding its value and a closure that pushes the node's adjoint into its
// parents. backward() replays the closures in reverse creation order, so
// contributions from multiple uses of a value add up. Parameters enter the
// tape once per (name, tracking mode); their adjoints are accumulated into the
// owning ParameterStore's gradient buffers.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcnet/core/errors.hpp"
#include "mcnet/core/parameter_store.hpp"

namespace mcnet {

/// One availability bit per batch row.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

template <typename Scalar>
class BasicTape;

template <typename Scalar>
class BasicVar {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicVar() = default;
  BasicVar(BasicTape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const {
    require(rows() == 1 && cols() == 1, "scalar() on a non-scalar node");
    return value()(0, 0);
  }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  BasicTape<Scalar>& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Whether a parameter leaf propagates gradient into the store.
enum class Track { Yes, No };

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = MatrixX<Scalar>;
  using Var = BasicVar<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, const Matrix& adjoint)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr, {}); }

  /// A leaf whose adjoint is kept and can be read back with grad().
  Var variable(Matrix value) { return push(std::move(value), true, nullptr, {}); }

  /// Leaf bound to a stored parameter. With Track::No the current value is
  /// copied in as a constant (stop-gradient).
  Var param(BasicParameterStore<Scalar>& store, const std::string& name, Track track = Track::Yes) {
    const auto key = std::make_pair(name, track == Track::Yes);
    if (auto it = param_cache_.find(key); it != param_cache_.end()) return Var(this, it->second);
    auto& entry = store.at(name);
    const bool tracked = track == Track::Yes && !frozen(name);
    Var v = push(entry.value, tracked, tracked ? &entry : nullptr, {});
    param_cache_.emplace(key, v.id());
    return v;
  }

  /// Parameters matching the predicate enter as constants from now on.
  void freeze(ParamFilter filter) { freeze_ = std::move(filter); }
  bool frozen(const std::string& name) const { return freeze_ && freeze_(name); }

  /// Records an op. The closure is dropped when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : BackwardFn{});
  }
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : BackwardFn{});
  }

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Adjoint of a node after backward(); zero if the loss does not depend on it.
  Matrix grad(const Var& v) const {
    const auto& n = nodes_[v.id()];
    if (n.adjoint.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.adjoint;
  }

  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& contribution) {
    auto& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.adjoint.size() == 0)
      n.adjoint = contribution;
    else
      n.adjoint += contribution;
  }

  /// Reverse sweep from a 1x1 loss node. Parameter gradients are added to
  /// (not assigned into) the store's buffers.
  void backward(const Var& loss) {
    require(loss.rows() == 1 && loss.cols() == 1, "backward() needs a scalar loss");
    clear_adjoints();
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].adjoint = Matrix::Constant(1, 1, Scalar(1));
    for (int i = loss.id(); i >= 0; --i) {
      auto& n = nodes_[i];
      if (n.adjoint.size() == 0) continue;
      if (n.backward) n.backward(*this, n.adjoint);
      if (n.param) n.param->grad += n.adjoint;
    }
  }

  void clear_adjoints() {
    for (auto& n : nodes_) n.adjoint.resize(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    bool requires_grad = false;
    ParameterEntry<Scalar>* param = nullptr;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, ParameterEntry<Scalar>* param, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, param, std::move(backward)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  std::map<std::pair<std::string, bool>, int> param_cache_;
  ParamFilter freeze_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;

// ---------------------------------------------------------------------------
// Primitives. Batches are laid out one subject per row.

namespace detail {
template <typename Scalar>
void same_shape(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}
}  // namespace detail

template <typename Scalar>
BasicVar<Scalar> operator+(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

template <typename Scalar>
BasicVar<Scalar> operator*(Scalar s, const BasicVar<Scalar>& a) {
  return a.tape().record(s * a.value(), {a}, [a, s](auto& t, const auto& g) { t.accumulate(a, s * g); });
}

template <typename Scalar>
BasicVar<Scalar> hadamard(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::same_shape(a, b, "hadamard");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

/// 1 - a
template <typename Scalar>
BasicVar<Scalar> one_minus(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> v = (Scalar(1) - a.value().array()).matrix();
  return a.tape().record(std::move(v), {a}, [a](auto& t, const auto& g) { t.accumulate(a, -g); });
}

template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.cols() != b.rows()) throw ContractViolation("matmul: inner dimension mismatch");
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](auto& t, const auto& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

/// Adds a 1 x n bias row to every row of a.
template <typename Scalar>
BasicVar<Scalar> add_row(const BasicVar<Scalar>& a, const BasicVar<Scalar>& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ContractViolation("add_row: bias shape mismatch");
  MatrixX<Scalar> v = a.value().rowwise() + bias.value().row(0);
  return a.tape().record(std::move(v), {a, bias}, [a, bias](auto& t, const auto& g) {
    t.accumulate(a, g);
    if (bias.requires_grad()) t.accumulate(bias, g.colwise().sum());
  });
}

/// x W + b
template <typename Scalar>
BasicVar<Scalar> affine(const BasicVar<Scalar>& x, const BasicVar<Scalar>& w, const BasicVar<Scalar>& b) {
  return add_row(matmul(x, w), b);
}

template <typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> v = a.value().array().tanh().matrix();
  return a.tape().record(v, {a}, [a, v](auto& t, const auto& g) {
    t.accumulate(a, (g.array() * (Scalar(1) - v.array().square())).matrix());
  });
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> v = (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  return a.tape().record(v, {a}, [a, v](auto& t, const auto& g) {
    t.accumulate(a, (g.array() * v.array() * (Scalar(1) - v.array())).matrix());
  });
}

template <typename Scalar>
BasicVar<Scalar> abs(const BasicVar<Scalar>& a) {
  return a.tape().record(a.value().cwiseAbs(), {a}, [a](auto& t, const auto& g) {
    t.accumulate(a, (g.array() * a.value().array().sign()).matrix());
  });
}

/// log(clamp(a, lo, hi)); the gradient is zero where the clamp is active.
template <typename Scalar>
BasicVar<Scalar> log_clamped(const BasicVar<Scalar>& a, Scalar lo, Scalar hi) {
  MatrixX<Scalar> c = a.value().cwiseMax(lo).cwiseMin(hi);
  MatrixX<Scalar> v = c.array().log().matrix();
  return a.tape().record(std::move(v), {a}, [a, c, lo, hi](auto& t, const auto& g) {
    const auto& x = a.value().array();
    auto inside = (x >= lo && x <= hi).template cast<Scalar>();
    t.accumulate(a, (g.array() * inside / c.array()).matrix());
  });
}

/// Elementwise a^p for a >= 0.
template <typename Scalar>
BasicVar<Scalar> pow(const BasicVar<Scalar>& a, Scalar p) {
  return a.tape().record(a.value().array().pow(p).matrix(), {a}, [a, p](auto& t, const auto& g) {
    t.accumulate(a, (g.array() * p * a.value().array().pow(p - Scalar(1))).matrix());
  });
}

/// Row-wise softmax (each row is a distribution over columns).
template <typename Scalar>
MatrixX<Scalar> softmax_rows_value(const MatrixX<Scalar>& x) {
  MatrixX<Scalar> e = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  return (e.array().colwise() / e.rowwise().sum().array()).matrix();
}

template <typename Scalar>
BasicVar<Scalar> softmax_rows(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> y = softmax_rows_value<Scalar>(a.value());
  return a.tape().record(y, {a}, [a, y](auto& t, const auto& g) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(a, (y.array() * (g.colwise() - dot).array()).matrix());
  });
}

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::span<const BasicVar<Scalar>> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  MatrixX<Scalar> v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<BasicVar<Scalar>> keep(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(v), parts, [keep](auto& t, const auto& g) {
    Eigen::Index o = 0;
    for (const auto& p : keep) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

template <typename Scalar>
BasicVar<Scalar> concat_cols(std::initializer_list<BasicVar<Scalar>> parts) {
  return concat_cols(std::span<const BasicVar<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicVar<Scalar> slice_cols(const BasicVar<Scalar>& a, Eigen::Index start, Eigen::Index n) {
  require(start >= 0 && n >= 0 && start + n <= a.cols(), "slice_cols: range out of bounds");
  return a.tape().record(a.value().middleCols(start, n), {a}, [a, start, n](auto& t, const auto& g) {
    MatrixX<Scalar> full = MatrixX<Scalar>::Zero(a.rows(), a.cols());
    full.middleCols(start, n) = g;
    t.accumulate(a, full);
  });
}

/// Per-row dot product: (B x d, B x d) -> B x 1.
template <typename Scalar>
BasicVar<Scalar> rowwise_dot(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::same_shape(a, b, "rowwise_dot");
  MatrixX<Scalar> v = a.value().cwiseProduct(b.value()).rowwise().sum();
  return a.tape().record(std::move(v), {a, b}, [a, b](auto& t, const auto& g) {
    if (a.requires_grad()) t.accumulate(a, (b.value().array().colwise() * g.col(0).array()).matrix());
    if (b.requires_grad()) t.accumulate(b, (a.value().array().colwise() * g.col(0).array()).matrix());
  });
}

/// Multiplies row i of a by w(i, 0).
template <typename Scalar>
BasicVar<Scalar> scale_rows(const BasicVar<Scalar>& a, const BasicVar<Scalar>& w) {
  require(w.cols() == 1 && w.rows() == a.rows(), "scale_rows: weight must be B x 1");
  MatrixX<Scalar> v = (a.value().array().colwise() * w.value().col(0).array()).matrix();
  return a.tape().record(std::move(v), {a, w}, [a, w](auto& t, const auto& g) {
    if (a.requires_grad()) t.accumulate(a, (g.array().colwise() * w.value().col(0).array()).matrix());
    if (w.requires_grad()) t.accumulate(w, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

/// s * a for a 1 x 1 node s.
template <typename Scalar>
BasicVar<Scalar> scalar_mul(const BasicVar<Scalar>& s, const BasicVar<Scalar>& a) {
  require(s.rows() == 1 && s.cols() == 1, "scalar_mul: s must be 1 x 1");
  return a.tape().record(s.scalar() * a.value(), {s, a}, [s, a](auto& t, const auto& g) {
    if (s.requires_grad()) t.accumulate(s, MatrixX<Scalar>::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    if (a.requires_grad()) t.accumulate(a, s.scalar() * g);
  });
}

template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar>& a) {
  return a.tape().record(MatrixX<Scalar>::Constant(1, 1, a.value().sum()), {a}, [a](auto& t, const auto& g) {
    t.accumulate(a, MatrixX<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

template <typename Scalar>
BasicVar<Scalar> mean(const BasicVar<Scalar>& a) {
  require(a.value().size() > 0, "mean: empty input");
  return Scalar(1) / Scalar(a.value().size()) * sum(a);
}

/// Stop-gradient copy.
template <typename Scalar>
BasicVar<Scalar> detach(const BasicVar<Scalar>& a) {
  return a.tape().constant(a.value());
}

/// Row i is observed.row(i) where mask(i), else estimate.row(i). Rows of
/// `observed` whose mask bit is clear are never read, so they may hold NaN.
template <typename Scalar>
BasicVar<Scalar> select_rows(const Mask& mask, const BasicVar<Scalar>& observed, const BasicVar<Scalar>& estimate) {
  detail::same_shape(observed, estimate, "select_rows");
  require(mask.size() == observed.rows(), "select_rows: mask length mismatch");
  MatrixX<Scalar> v(observed.rows(), observed.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) = mask(i) ? observed.value().row(i) : estimate.value().row(i);
  return observed.tape().record(std::move(v), {observed, estimate}, [mask, observed, estimate](auto& t, const auto& g) {
    MatrixX<Scalar> go = MatrixX<Scalar>::Zero(g.rows(), g.cols());
    MatrixX<Scalar> ge = MatrixX<Scalar>::Zero(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) (mask(i) ? go : ge).row(i) = g.row(i);
    t.accumulate(observed, go);
    t.accumulate(estimate, ge);
  });
}

/// Sum over rows with mask set of |observed - estimate|, as a 1 x 1 node.
/// Unmasked rows of `observed` are never read.
template <typename Scalar>
BasicVar<Scalar> masked_abs_sum(const MatrixX<Scalar>& observed, const Mask& mask, const BasicVar<Scalar>& estimate) {
  require(observed.rows() == estimate.rows() && observed.cols() == estimate.cols(), "masked_abs_sum: shape mismatch");
  require(mask.size() == observed.rows(), "masked_abs_sum: mask length mismatch");
  MatrixX<Scalar> sign = MatrixX<Scalar>::Zero(observed.rows(), observed.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < observed.rows(); ++i) {
    if (!mask(i)) continue;
    auto diff = (estimate.value().row(i) - observed.row(i)).array();
    total += diff.abs().sum();
    sign.row(i) = diff.sign().matrix();
  }
  return estimate.tape().record(MatrixX<Scalar>::Constant(1, 1, total), {estimate},
                                [estimate, sign](auto& t, const auto& g) { t.accumulate(estimate, g(0, 0) * sign); });
}

}  // namespace mcnet
