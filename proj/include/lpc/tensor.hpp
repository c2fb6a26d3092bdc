#ifndef LPC_TENSOR_HPP
#define LPC_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lpc/mat.hpp"

namespace lpc {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad{false};
  const char* op{"leaf"};
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backfn;  // adds into parents' grad buffers

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense float64 tensor with an optional backward-graph record. Graphs are
// built define-by-run: every operation allocates a fresh node, so a model
// re-evaluated in a loop builds a fresh graph each time. Values are
// immutable once an operation has consumed them; only gradient buffers and
// leaf data (via mutable_data, for optimizers) may be written.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, double v, bool requires_grad = false);
  static Tensor from_data(const Shape& s, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor from_mat(const Mat& m, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::int64_t numel() const { return static_cast<std::int64_t>(n_->value.size()); }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  const std::vector<double>& data() const { return n_->value; }
  double scalar_value() const;

  bool requires_grad() const { return n_->requires_grad; }
  // Only meaningful on leaves; flips whether graphs built afterwards track
  // gradients through this tensor.
  void set_requires_grad(bool v) { n_->requires_grad = v; }

  // Gradient accumulated by backward(); zeros if backward never reached it.
  std::vector<double> grad() const;
  void reset_grad() { n_->grad.assign(n_->value.size(), 0.0); }

  // Leaf-only in-place access for optimizers and accumulators.
  std::vector<double>& mutable_data();

  // Constant leaf with a copy of this tensor's values.
  Tensor detach() const;
  Mat to_mat() const;

  // identity comparison (same node)
  bool same_node(const Tensor& o) const { return n_ == o.n_; }

  std::shared_ptr<detail::Node> node() const { return n_; }
  static Tensor wrap_node(std::shared_ptr<detail::Node> n) {
    return Tensor(std::move(n));
  }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::Node> n_;
};

// ----- primitive operations -----
// Elementwise operations require identical shapes except that a rank-0
// scalar may combine with any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only

// Expand to target shape: scalar -> any; (n) or (1,n) -> (B,n).
Tensor broadcast_to(const Tensor& a, const Shape& target);

Tensor sum(const Tensor& a);   // full reduction -> rank-0
Tensor mean(const Tensor& a);  // full reduction -> rank-0
// Reduce the last axis: (B,n) -> (B); (n) -> rank-0.
Tensor sum_last(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor silu(const Tensor& a);
// softplus(x; beta) = log(1 + exp(beta*x)) / beta, evaluated stably.
Tensor softplus(const Tensor& a, double beta);

Tensor reshape(const Tensor& a, const Shape& target);
// Slice [start, start+count) of the last axis.
Tensor slice_last(const Tensor& a, std::int64_t start, std::int64_t count);

// Sum over the last axis of elementwise Gaussian log densities
// log N(x_i; mean_i, scale_i^2); scale is the standard deviation.
// (B,n) inputs -> (B) output; (n) inputs -> rank-0.
Tensor gaussian_log_density(const Tensor& x, const Tensor& mean,
                            const Tensor& scale);

// Discretized Gaussian over the 256-level grid {0, 1/255, ..., 1}:
// per element log[ Phi((x - mean + h)/scale) - Phi((x - mean - h)/scale) ]
// with half-width h = 1/510; the lowest bin integrates from -inf and the
// highest to +inf. Bins below 1e-12 probability are floored (counted, with
// zero gradient). Reduces the last axis like gaussian_log_density.
Tensor discretized_gaussian_logpmf(const Tensor& x, const Tensor& mean,
                                   const Tensor& scale);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Names of all registered primitives (for introspection and tests).
const std::vector<std::string>& primitives();

// Reverse-mode sweep from a rank-0 output. Each reachable node is visited
// exactly once in reverse topological order. Gradients accumulate into
// existing buffers: two sweeps without reset_grad() double leaf gradients.
void backward(const Tensor& scalar_output);

}  // namespace lpc

#endif  // LPC_TENSOR_HPP
