#include "lpc/tensor.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
constexpr double kBinHalfWidth = 1.0 / 510.0;
constexpr double kPmfFloor = 1e-12;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr new_node(const char* op, Shape shape, std::vector<double> value,
                 const std::vector<Tensor>& parents, bool check_nan = true) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (static_cast<std::int64_t>(n->value.size()) != shape_numel(n->shape)) {
    throw ShapeError(std::string(op) + ": value size does not match shape");
  }
  if (check_nan) {
    for (double v : n->value) {
      if (std::isnan(v)) {
        throw NumericFault(op, "NaN produced in forward pass");
      }
    }
  }
  bool req = false;
  for (const Tensor& p : parents) req = req || p.requires_grad();
  n->requires_grad = req;
  if (req) {
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) n->parents.push_back(p.node());
  }
  return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
  }
}

// Elementwise binary op allowing a rank-0 scalar on either side.
template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b,
                          Fwd fwd, Bwd bwd) {
  bool a_scalar = a.rank() == 0;
  bool b_scalar = b.rank() == 0;
  if (!a_scalar && !b_scalar) check_same_shape(op, a, b);
  const Tensor& big = a_scalar ? b : a;
  const std::size_t n = static_cast<std::size_t>(big.numel());
  std::vector<double> out(n);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  NodePtr node = new_node(op, big.shape(), std::move(out), {a, b});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backfn = [o, pa, pb, a_scalar, b_scalar, bwd]() {
      const std::size_t n = o->value.size();
      std::vector<double>* ga = pa->requires_grad ? &pa->ensure_grad() : nullptr;
      std::vector<double>* gb = pb->requires_grad ? &pb->ensure_grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        double g = o->grad[i];
        if (g == 0.0) continue;
        double da = 0.0, db = 0.0;
        bwd(pa->value[a_scalar ? 0 : i], pb->value[b_scalar ? 0 : i], g, da, db);
        if (ga) (*ga)[a_scalar ? 0 : i] += da;
        if (gb) (*gb)[b_scalar ? 0 : i] += db;
      }
    };
  }
  return Tensor::wrap_node(node);
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const char* op, const Tensor& a, Fwd fwd, Bwd bwd) {
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<double> out(n);
  const auto& av = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  NodePtr node = new_node(op, a.shape(), std::move(out), {a});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa, bwd]() {
      auto& ga = pa->ensure_grad();
      for (std::size_t i = 0; i < o->value.size(); ++i) {
        double g = o->grad[i];
        if (g != 0.0) ga[i] += g * bwd(pa->value[i], o->value[i]);
      }
    };
  }
  return Tensor::wrap_node(node);
}

// Shape of the last axis and the product of the leading axes.
void split_last_axis(const Tensor& t, std::int64_t& lead, std::int64_t& last) {
  if (t.rank() == 0) {
    lead = 1;
    last = 1;
    return;
  }
  last = t.shape().back();
  lead = 1;
  for (std::size_t i = 0; i + 1 < t.shape().size(); ++i) lead *= t.shape()[i];
}

Shape drop_last_axis(const Shape& s) {
  if (s.empty()) return {};
  Shape out(s.begin(), s.end() - 1);
  return out;
}

}  // namespace

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (std::int64_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({}, {v}, requires_grad);
}

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  return full(s, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& s, double v, bool requires_grad) {
  std::vector<double> data(static_cast<std::size_t>(shape_numel(s)), v);
  return from_data(s, std::move(data), requires_grad);
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data,
                         bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->shape = s;
  n->value = std::move(data);
  if (static_cast<std::int64_t>(n->value.size()) != shape_numel(s)) {
    throw ShapeError("from_data: data length does not match shape " +
                     shape_str(s));
  }
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
  return from_data({m.rows, m.cols}, m.a, requires_grad);
}

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ShapeError("scalar_value: tensor has " + std::to_string(numel()) +
                     " elements");
  }
  return n_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (n_->grad.empty()) return std::vector<double>(n_->value.size(), 0.0);
  return n_->grad;
}

std::vector<double>& Tensor::mutable_data() {
  if (!n_->parents.empty()) {
    throw Error("mutable_data: only leaf tensors may be mutated");
  }
  return n_->value;
}

Tensor Tensor::detach() const {
  return from_data(n_->shape, n_->value, false);
}

Mat Tensor::to_mat() const {
  Mat m;
  if (rank() == 2) {
    m.rows = shape()[0];
    m.cols = shape()[1];
  } else if (rank() == 1) {
    m.rows = 1;
    m.cols = shape()[0];
  } else if (rank() == 0) {
    m.rows = 1;
    m.cols = 1;
  } else {
    throw ShapeError("to_mat: rank > 2");
  }
  m.a = n_->value;
  return m;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor neg(const Tensor& a) {
  return unary_elementwise(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_elementwise(
      "add_scalar", a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary_elementwise(
      "mul_scalar", a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: rank-2 tensors required, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::int64_t m = a.shape()[0];
  const std::int64_t k = a.shape()[1];
  const std::int64_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t kk = 0; kk < k; ++kk) {
      double aik = av[static_cast<std::size_t>(i * k + kk)];
      if (aik == 0.0) continue;
      const std::size_t brow = static_cast<std::size_t>(kk * n);
      const std::size_t orow = static_cast<std::size_t>(i * n);
      for (std::int64_t j = 0; j < n; ++j) {
        out[orow + static_cast<std::size_t>(j)] +=
            aik * bv[brow + static_cast<std::size_t>(j)];
      }
    }
  }
  NodePtr node = new_node("matmul", {m, n}, std::move(out), {a, b});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backfn = [o, pa, pb, m, k, n]() {
      if (pa->requires_grad) {
        auto& ga = pa->ensure_grad();
        // dA = dY * B^T
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t j = 0; j < n; ++j) {
            double g = o->grad[static_cast<std::size_t>(i * n + j)];
            if (g == 0.0) continue;
            for (std::int64_t kk = 0; kk < k; ++kk) {
              ga[static_cast<std::size_t>(i * k + kk)] +=
                  g * pb->value[static_cast<std::size_t>(kk * n + j)];
            }
          }
        }
      }
      if (pb->requires_grad) {
        auto& gb = pb->ensure_grad();
        // dB = A^T * dY
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t kk = 0; kk < k; ++kk) {
            double aik = pa->value[static_cast<std::size_t>(i * k + kk)];
            if (aik == 0.0) continue;
            for (std::int64_t j = 0; j < n; ++j) {
              gb[static_cast<std::size_t>(kk * n + j)] +=
                  aik * o->grad[static_cast<std::size_t>(i * n + j)];
            }
          }
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

Tensor broadcast_to(const Tensor& a, const Shape& target) {
  if (a.shape() == target) return a;
  const std::int64_t tn = shape_numel(target);
  std::vector<double> out(static_cast<std::size_t>(tn));
  enum class Mode { Scalar, Row } mode;
  std::int64_t inner = 0;
  if (a.rank() == 0) {
    mode = Mode::Scalar;
    for (auto& v : out) v = a.data()[0];
  } else if (!target.empty() &&
             ((a.rank() == 1 && a.shape()[0] == target.back()) ||
              (a.rank() == 2 && target.size() == 2 && a.shape()[0] == 1 &&
               a.shape()[1] == target.back()))) {
    mode = Mode::Row;
    inner = target.back();
    const std::int64_t reps = tn / inner;
    for (std::int64_t r = 0; r < reps; ++r) {
      for (std::int64_t j = 0; j < inner; ++j) {
        out[static_cast<std::size_t>(r * inner + j)] =
            a.data()[static_cast<std::size_t>(j)];
      }
    }
  } else {
    throw ShapeError("broadcast: cannot expand " + shape_str(a.shape()) +
                     " to " + shape_str(target));
  }
  NodePtr node = new_node("broadcast", target, std::move(out), {a});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa, mode, inner]() {
      auto& ga = pa->ensure_grad();
      if (mode == Mode::Scalar) {
        double s = 0.0;
        for (double g : o->grad) s += g;
        ga[0] += s;
      } else {
        const std::int64_t reps =
            static_cast<std::int64_t>(o->value.size()) / inner;
        for (std::int64_t r = 0; r < reps; ++r) {
          for (std::int64_t j = 0; j < inner; ++j) {
            ga[static_cast<std::size_t>(j)] +=
                o->grad[static_cast<std::size_t>(r * inner + j)];
          }
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  NodePtr node = new_node("sum", {}, {s}, {a});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa]() {
      auto& ga = pa->ensure_grad();
      double g = o->grad[0];
      for (double& v : ga) v += g;
    };
  }
  return Tensor::wrap_node(node);
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.data()) s += v;
  NodePtr node = new_node("mean", {}, {s / n}, {a});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa, n]() {
      auto& ga = pa->ensure_grad();
      double g = o->grad[0] / n;
      for (double& v : ga) v += g;
    };
  }
  return Tensor::wrap_node(node);
}

Tensor sum_last(const Tensor& a) {
  std::int64_t lead = 0, last = 0;
  split_last_axis(a, lead, last);
  std::vector<double> out(static_cast<std::size_t>(lead), 0.0);
  for (std::int64_t i = 0; i < lead; ++i) {
    for (std::int64_t j = 0; j < last; ++j) {
      out[static_cast<std::size_t>(i)] +=
          a.data()[static_cast<std::size_t>(i * last + j)];
    }
  }
  NodePtr node = new_node("sum_last", drop_last_axis(a.shape()),
                          std::move(out), {a});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa, lead, last]() {
      auto& ga = pa->ensure_grad();
      for (std::int64_t i = 0; i < lead; ++i) {
        double g = o->grad[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        for (std::int64_t j = 0; j < last; ++j) {
          ga[static_cast<std::size_t>(i * last + j)] += g;
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

Tensor exp(const Tensor& a) {
  return unary_elementwise(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_elementwise(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_elementwise(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
  return unary_elementwise(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor silu(const Tensor& a) {
  return unary_elementwise(
      "silu", a, [](double x) { return x * sigmoid(x); },
      [](double x, double) {
        double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor softplus(const Tensor& a, double beta) {
  if (beta <= 0.0) throw Error("softplus: beta must be positive");
  return unary_elementwise(
      "softplus", a,
      [beta](double x) {
        double y = beta * x;
        // max(y,0) + log1p(exp(-|y|)), scaled back by 1/beta
        return (std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y)))) / beta;
      },
      [beta](double x, double) { return sigmoid(beta * x); });
}

Tensor reshape(const Tensor& a, const Shape& target) {
  if (shape_numel(target) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(target));
  }
  NodePtr node = new_node("reshape", target, a.data(), {a}, false);
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa]() {
      auto& ga = pa->ensure_grad();
      for (std::size_t i = 0; i < o->value.size(); ++i) ga[i] += o->grad[i];
    };
  }
  return Tensor::wrap_node(node);
}

Tensor slice_last(const Tensor& a, std::int64_t start, std::int64_t count) {
  std::int64_t lead = 0, last = 0;
  split_last_axis(a, lead, last);
  if (a.rank() == 0 || start < 0 || count < 0 || start + count > last) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + count) + ") out of bounds for " +
                     shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape.back() = count;
  std::vector<double> out(static_cast<std::size_t>(lead * count));
  for (std::int64_t i = 0; i < lead; ++i) {
    for (std::int64_t j = 0; j < count; ++j) {
      out[static_cast<std::size_t>(i * count + j)] =
          a.data()[static_cast<std::size_t>(i * last + start + j)];
    }
  }
  NodePtr node = new_node("slice", out_shape, std::move(out), {a}, false);
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pa = a.node().get();
    node->backfn = [o, pa, lead, last, start, count]() {
      auto& ga = pa->ensure_grad();
      for (std::int64_t i = 0; i < lead; ++i) {
        for (std::int64_t j = 0; j < count; ++j) {
          ga[static_cast<std::size_t>(i * last + start + j)] +=
              o->grad[static_cast<std::size_t>(i * count + j)];
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

Tensor gaussian_log_density(const Tensor& x, const Tensor& mean,
                            const Tensor& scale) {
  check_same_shape("gaussian_log_density", x, mean);
  check_same_shape("gaussian_log_density", x, scale);
  for (double s : scale.data()) {
    if (!(s > 0.0)) {
      throw NumericFault("gaussian_log_density", "non-positive scale");
    }
  }
  std::int64_t lead = 0, last = 0;
  split_last_axis(x, lead, last);
  std::vector<double> out(static_cast<std::size_t>(lead), 0.0);
  const auto& xv = x.data();
  const auto& mv = mean.data();
  const auto& sv = scale.data();
  for (std::int64_t i = 0; i < lead; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < last; ++j) {
      std::size_t idx = static_cast<std::size_t>(i * last + j);
      double r = (xv[idx] - mv[idx]) / sv[idx];
      acc += -kHalfLog2Pi - std::log(sv[idx]) - 0.5 * r * r;
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  NodePtr node = new_node("gaussian_log_density", drop_last_axis(x.shape()),
                          std::move(out), {x, mean, scale});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* px = x.node().get();
    Node* pm = mean.node().get();
    Node* ps = scale.node().get();
    node->backfn = [o, px, pm, ps, lead, last]() {
      std::vector<double>* gx = px->requires_grad ? &px->ensure_grad() : nullptr;
      std::vector<double>* gm = pm->requires_grad ? &pm->ensure_grad() : nullptr;
      std::vector<double>* gs = ps->requires_grad ? &ps->ensure_grad() : nullptr;
      for (std::int64_t i = 0; i < lead; ++i) {
        double g = o->grad[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        for (std::int64_t j = 0; j < last; ++j) {
          std::size_t idx = static_cast<std::size_t>(i * last + j);
          double s = ps->value[idx];
          double diff = px->value[idx] - pm->value[idx];
          double inv_var = 1.0 / (s * s);
          if (gm) (*gm)[idx] += g * diff * inv_var;
          if (gx) (*gx)[idx] -= g * diff * inv_var;
          if (gs) (*gs)[idx] += g * (diff * diff * inv_var - 1.0) / s;
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

Tensor discretized_gaussian_logpmf(const Tensor& x, const Tensor& mean,
                                   const Tensor& scale) {
  check_same_shape("discretized_gaussian_logpmf", x, mean);
  check_same_shape("discretized_gaussian_logpmf", x, scale);
  const auto& xv = x.data();
  const auto& mv = mean.data();
  const auto& sv = scale.data();
  for (double v : xv) {
    double level = v * 255.0;
    if (std::abs(level - std::round(level)) > 1e-9 || level < -1e-9 ||
        level > 255.0 + 1e-9) {
      throw Error("discretized_gaussian_logpmf: observation " +
                  std::to_string(v) + " is not on the 256-level grid");
    }
  }
  for (double s : sv) {
    if (!(s > 0.0)) {
      throw NumericFault("discretized_gaussian_logpmf", "non-positive scale");
    }
  }
  std::int64_t lead = 0, last = 0;
  split_last_axis(x, lead, last);
  const std::size_t total = xv.size();
  // Saved for the backward rule.
  auto ulo = std::make_shared<std::vector<double>>(total);
  auto uhi = std::make_shared<std::vector<double>>(total);
  auto pmass = std::make_shared<std::vector<double>>(total);
  auto floored = std::make_shared<std::vector<char>>(total, 0);

  std::vector<double> out(static_cast<std::size_t>(lead), 0.0);
  for (std::int64_t i = 0; i < lead; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < last; ++j) {
      std::size_t idx = static_cast<std::size_t>(i * last + j);
      bool bottom = xv[idx] <= 0.0 + 1e-12;
      bool top = xv[idx] >= 1.0 - 1e-12;
      double lo = (xv[idx] - kBinHalfWidth - mv[idx]) / sv[idx];
      double hi = (xv[idx] + kBinHalfWidth - mv[idx]) / sv[idx];
      double cdf_lo = bottom ? 0.0 : normal_cdf(lo);
      double cdf_hi = top ? 1.0 : normal_cdf(hi);
      double p = cdf_hi - cdf_lo;
      (*ulo)[idx] = lo;
      (*uhi)[idx] = hi;
      if (!(p >= kPmfFloor)) {
        p = kPmfFloor;
        (*floored)[idx] = 1;
        counters().discretized_floor_hits.fetch_add(1,
                                                    std::memory_order_relaxed);
      }
      (*pmass)[idx] = p;
      acc += std::log(p);
      if (bottom) (*floored)[idx] |= 2;  // marks an open lower tail
      if (top) (*floored)[idx] |= 4;     // marks an open upper tail
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  NodePtr node =
      new_node("discretized_gaussian_logpmf", drop_last_axis(x.shape()),
               std::move(out), {x, mean, scale});
  if (node->requires_grad) {
    Node* o = node.get();
    Node* pm = mean.node().get();
    Node* ps = scale.node().get();
    // No gradient path to x: observations live on a discrete grid.
    node->backfn = [o, pm, ps, lead, last, ulo, uhi, pmass, floored]() {
      std::vector<double>* gm = pm->requires_grad ? &pm->ensure_grad() : nullptr;
      std::vector<double>* gs = ps->requires_grad ? &ps->ensure_grad() : nullptr;
      if (!gm && !gs) return;
      for (std::int64_t i = 0; i < lead; ++i) {
        double g = o->grad[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        for (std::int64_t j = 0; j < last; ++j) {
          std::size_t idx = static_cast<std::size_t>(i * last + j);
          char f = (*floored)[idx];
          if (f & 1) continue;  // floored bin: flat
          double s = ps->value[idx];
          double lo = (*ulo)[idx];
          double hi = (*uhi)[idx];
          double pdf_lo = (f & 2) ? 0.0 : normal_pdf(lo);
          double pdf_hi = (f & 4) ? 0.0 : normal_pdf(hi);
          double inv_sp = 1.0 / (s * (*pmass)[idx]);
          if (gm) (*gm)[idx] += g * (pdf_lo - pdf_hi) * inv_sp;
          if (gs) {
            double tlo = (f & 2) ? 0.0 : lo * pdf_lo;
            double thi = (f & 4) ? 0.0 : hi * pdf_hi;
            (*gs)[idx] += g * (tlo - thi) * inv_sp;
          }
        }
      }
    };
  }
  return Tensor::wrap_node(node);
}

const std::vector<std::string>& primitives() {
  static const std::vector<std::string> names = {
      "add",       "sub",
      "mul",       "neg",
      "add_scalar", "mul_scalar",
      "matmul",    "broadcast",
      "sum",       "mean",
      "sum_last",  "exp",
      "log",       "sqrt",
      "square",    "silu",
      "softplus",  "reshape",
      "slice",     "gaussian_log_density",
      "discretized_gaussian_logpmf"};
  return names;
}

void backward(const Tensor& scalar_output) {
  if (scalar_output.numel() != 1) {
    throw ShapeError("backward: output must be a scalar, got " +
                     shape_str(scalar_output.shape()));
  }
  Node* root = scalar_output.node().get();
  if (!root->requires_grad) {
    root->ensure_grad()[0] += 1.0;
    return;
  }

  // Iterative post-order DFS; each node enters `order` exactly once.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  // Interior gradients are scratch for this sweep; only leaf gradient
  // buffers accumulate across sweeps.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
  }
  root->ensure_grad()[0] += 1.0;
  // Post-order places parents before children; run children first.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn) {
      n->ensure_grad();
      n->backfn();
    }
  }
}

}  // namespace lpc
