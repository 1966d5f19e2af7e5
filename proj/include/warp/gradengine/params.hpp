// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "warp/errors.hpp"
#include "warp/numkit/matrix.hpp"

namespace warp::grad {

using numkit::Matrix;
using numkit::Vector;

struct NamedArray {
  std::string name;
  Matrix value;
};

/// Learnable arrays in a fixed enumeration order. The slot index returned by
/// add() is the array's identity on tapes, in gradient stores and in files.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value) {
    if (find(name)) throw ContractViolation("ParamSet: duplicate array '" + name + "'");
    arrays_.push_back({std::move(name), std::move(value)});
    return arrays_.size() - 1;
  }

  std::size_t size() const noexcept { return arrays_.size(); }
  const NamedArray& operator[](std::size_t i) const { return arrays_.at(i); }
  Matrix& value(std::size_t i) { return arrays_.at(i).value; }
  const Matrix& value(std::size_t i) const { return arrays_.at(i).value; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t slot(std::string_view name) const {
    auto s = find(name);
    if (!s) throw ContractViolation("ParamSet: no array named '" + std::string(name) + "'");
    return *s;
  }

  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.value.size();
    return n;
  }

  Vector flatten() const {
    Vector out;
    out.reserve(scalar_count());
    for (const auto& a : arrays_) out.insert(out.end(), a.value.flat().begin(), a.value.flat().end());
    return out;
  }

  /// Scalar i in enumeration order.
  double& scalar(std::size_t i) {
    for (auto& a : arrays_) {
      if (i < a.value.size()) return a.value.flat()[i];
      i -= a.value.size();
    }
    throw ContractViolation("ParamSet: scalar index out of range");
  }

  bool operator==(const ParamSet& o) const {
    if (arrays_.size() != o.arrays_.size()) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].name != o.arrays_[i].name || !(arrays_[i].value == o.arrays_[i].value)) return false;
    return true;
  }

 private:
  std::vector<NamedArray> arrays_;
};

/// Gradient accumulators, one array per ParamSet slot with the same shape.
class GradStore {
 public:
  GradStore() = default;
  explicit GradStore(const ParamSet& p) {
    grads_.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) grads_.emplace_back(p.value(i).rows(), p.value(i).cols());
  }

  std::size_t size() const noexcept { return grads_.size(); }
  Matrix& operator[](std::size_t i) { return grads_.at(i); }
  const Matrix& operator[](std::size_t i) const { return grads_.at(i); }

  void zero() {
    for (auto& g : grads_) g.fill(0.0);
  }

  double norm() const {
    double s = 0.0;
    for (const auto& g : grads_)
      for (double v : g.flat()) s += v * v;
    return std::sqrt(s);
  }

  Vector flatten() const {
    Vector out;
    for (const auto& g : grads_) out.insert(out.end(), g.flat().begin(), g.flat().end());
    return out;
  }

 private:
  std::vector<Matrix> grads_;
};

}  // namespace warp::grad
