#include "lpc/param_set.hpp"

#include <cmath>

#include "lpc/errors.hpp"

namespace lpc {

void ParamSet::add(const std::string& name, Tensor t) {
  if (has(name)) throw Error("ParamSet: duplicate parameter '" + name + "'");
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error("ParamSet: unknown parameter '" + name + "'");
  }
  return items_[it->second].second;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error("ParamSet: unknown parameter '" + name + "'");
  }
  return items_[it->second].second;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : items_) {
    out.add(name, Tensor::zeros(t.shape()));
  }
  return out;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  for (auto& [name, t] : items_) {
    const Tensor& o = other.get(name);
    if (o.shape() != t.shape()) {
      throw ShapeError("ParamSet::add_scaled: shape mismatch for '" + name +
                       "'");
    }
    auto& dst = t.mutable_data();
    const auto& src = o.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
  }
}

void ParamSet::scale(double s) {
  for (auto& [name, t] : items_) {
    for (double& v : t.mutable_data()) v *= s;
  }
}

void ParamSet::fill(double v) {
  for (auto& [name, t] : items_) {
    for (double& x : t.mutable_data()) x = v;
  }
}

double ParamSet::l2_norm() const {
  double s = 0.0;
  for (const auto& [name, t] : items_) {
    for (double v : t.data()) s += v * v;
  }
  return std::sqrt(s);
}

std::int64_t ParamSet::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& [name, t] : items_) {
    Tensor c = Tensor::from_data(t.shape(), t.data(), t.requires_grad());
    out.add(name, c);
  }
  return out;
}

void ParamSet::set_requires_grad(bool v) {
  for (auto& [name, t] : items_) t.set_requires_grad(v);
}

void ParamSet::assign_values(const ParamSet& other) {
  for (auto& [name, t] : items_) {
    const Tensor& o = other.get(name);
    if (o.shape() != t.shape()) {
      throw ShapeError("ParamSet::assign_values: shape mismatch for '" + name +
                       "'");
    }
    t.mutable_data() = o.data();
  }
}

ValueGrad value_and_grad(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& inputs) {
  for (const Tensor& t : inputs) {
    const_cast<Tensor&>(t).reset_grad();
  }
  Tensor out = f(inputs);
  if (out.numel() != 1) {
    throw ShapeError("value_and_grad: function output must be a scalar, got " +
                     shape_str(out.shape()));
  }
  backward(out);
  ValueGrad res;
  res.value = out.scalar_value();
  res.grads.reserve(inputs.size());
  for (const Tensor& t : inputs) res.grads.push_back(t.grad());
  return res;
}

ValueGradParams value_and_grad(const std::function<Tensor(const ParamSet&)>& f,
                               const ParamSet& params) {
  for (const auto& [name, t] : params) {
    const_cast<Tensor&>(t).reset_grad();
  }
  Tensor out = f(params);
  if (out.numel() != 1) {
    throw ShapeError("value_and_grad: function output must be a scalar, got " +
                     shape_str(out.shape()));
  }
  backward(out);
  ValueGradParams res;
  res.value = out.scalar_value();
  for (const auto& [name, t] : params) {
    res.grads.add(name, Tensor::from_data(t.shape(), t.grad()));
  }
  return res;
}

}  // namespace lpc
