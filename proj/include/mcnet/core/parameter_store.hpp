#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mcnet/core/errors.hpp"

namespace mcnet {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// One learnable tensor. Vectors are stored as 1 x n row matrices so that a
/// batch of row inputs can be shifted by a bias with a row broadcast.
template <typename Scalar>
struct ParameterEntry {
  MatrixX<Scalar> value;
  MatrixX<Scalar> grad;
  // Adam first/second moments; sized lazily by the optimizer.
  MatrixX<Scalar> moment1;
  MatrixX<Scalar> moment2;
};

/// Named collection of learnable tensors. Names are hierarchical with '.'
/// separators ("rnn.mri.l0.w_x"); the first component is the namespace used
/// by training stages to decide what may move.
template <typename Scalar>
class BasicParameterStore {
 public:
  using Matrix = MatrixX<Scalar>;
  using Entry = ParameterEntry<Scalar>;

  Entry& add(const std::string& name, Matrix value) {
    if (entries_.count(name)) throw ContractViolation("duplicate parameter '" + name + "'");
    Entry e;
    e.grad = Matrix::Zero(value.rows(), value.cols());
    e.value = std::move(value);
    return entries_.emplace(name, std::move(e)).first->second;
  }

  Entry& add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    return add(name, Matrix::Zero(rows, cols));
  }

  // Xavier/Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  template <typename Rng>
  Entry& add_xavier(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const Scalar a = std::sqrt(Scalar(6) / Scalar(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-double(a), double(a));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(dist(rng));
    return add(name, std::move(w));
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw LookupError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw LookupError("unknown parameter '" + name + "'");
    return it->second;
  }

  Matrix& value(const std::string& name) { return at(name).value; }
  const Matrix& value(const std::string& name) const { return at(name).value; }
  const Matrix& grad(const std::string& name) const { return at(name).grad; }

  void zero_grad() {
    for (auto& [_, e] : entries_) e.grad.setZero();
  }

  void reset_moments() {
    for (auto& [_, e] : entries_) {
      e.moment1.resize(0, 0);
      e.moment2.resize(0, 0);
    }
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [n, _] : entries_) out.push_back(n);
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const BasicParameterStore& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (const auto& [n, e] : entries_) {
      auto it = o.entries_.find(n);
      if (it == o.entries_.end()) return false;
      const auto& f = it->second.value;
      if (f.rows() != e.value.rows() || f.cols() != e.value.cols()) return false;
      if (!(f.array() == e.value.array()).all()) return false;
    }
    return true;
  }

 private:
  // std::map keeps iteration order deterministic, which the checkpoint
  // writer and the optimizer both rely on.
  std::map<std::string, Entry> entries_;
};

using ParameterStore = BasicParameterStore<double>;

/// First dotted component of a parameter name.
inline std::string_view namespace_of(std::string_view name) {
  const auto dot = name.find('.');
  return dot == std::string_view::npos ? name : name.substr(0, dot);
}

/// Predicate selecting parameters by namespace.
using ParamFilter = std::function<bool(const std::string&)>;

inline ParamFilter in_namespaces(std::vector<std::string> spaces) {
  return [spaces = std::move(spaces)](const std::string& name) {
    const auto ns = namespace_of(name);
    for (const auto& s : spaces)
      if (ns == s) return true;
    return false;
  };
}

inline ParamFilter all_params() {
  return [](const std::string&) { return true; };
}

}  // namespace mcnet
