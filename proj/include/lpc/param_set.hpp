#ifndef LPC_PARAM_SET_HPP
#define LPC_PARAM_SET_HPP

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lpc/tensor.hpp"

namespace lpc {

// Named, ordered collection of parameter tensors. Iteration order is the
// insertion order, so two ParamSets built the same way enumerate
// identically across runs.
class ParamSet {
 public:
  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  // Constant tensors of matching names/shapes, all zero.
  ParamSet zeros_like() const;
  // this += s * other, elementwise per parameter (leaf tensors only).
  void add_scaled(const ParamSet& other, double s);
  void scale(double s);
  void fill(double v);
  // Euclidean norm over every element of every parameter.
  double l2_norm() const;
  std::int64_t total_elements() const;
  // Deep copy with fresh leaf tensors (same values).
  ParamSet clone() const;
  void set_requires_grad(bool v);
  // Copies values from a same-structured ParamSet.
  void assign_values(const ParamSet& other);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Evaluates a scalar-valued function of the inputs and returns its value
// together with exact reverse-mode gradients. Input gradient buffers are
// reset before the sweep, so the result reflects this evaluation alone;
// values are never modified.
struct ValueGrad {
  double value{0.0};
  std::vector<std::vector<double>> grads;
};
ValueGrad value_and_grad(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& inputs);

struct ValueGradParams {
  double value{0.0};
  ParamSet grads;  // constant tensors mirroring the parameter shapes
};
ValueGradParams value_and_grad(const std::function<Tensor(const ParamSet&)>& f,
                               const ParamSet& params);

}  // namespace lpc

#endif  // LPC_PARAM_SET_HPP
