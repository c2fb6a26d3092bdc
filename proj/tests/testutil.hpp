#ifndef LPC_TESTS_TESTUTIL_HPP
#define LPC_TESTS_TESTUTIL_HPP

// Shared oracles for the test suites. Everything in this header is written
// independently of the library's own computation paths: finite differences,
// closed-form densities, brute-force enumerations and a reference Adam.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "lpc/mat.hpp"
#include "lpc/param_set.hpp"
#include "lpc/rng.hpp"
#include "lpc/tensor.hpp"

namespace testutil {

// Central finite differences of a scalar function with respect to every
// element of every parameter, via raw value perturbation.
inline lpc::ParamSet finite_diff_params(
    const std::function<double(const lpc::ParamSet&)>& f, lpc::ParamSet& params,
    double eps = 1e-5) {
  lpc::ParamSet grads = params.zeros_like();
  for (auto& [name, t] : params) {
    auto& data = t.mutable_data();
    auto& gdata = grads.get(name).mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double saved = data[i];
      data[i] = saved + eps;
      double fp = f(params);
      data[i] = saved - eps;
      double fm = f(params);
      data[i] = saved;
      gdata[i] = (fp - fm) / (2.0 * eps);
    }
  }
  return grads;
}

inline std::vector<double> finite_diff_vector(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double saved = x[i];
    x[i] = saved + eps;
    double fp = f(x);
    x[i] = saved - eps;
    double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// Relative error between gradient vectors: ||a-b|| / max(||b||, floor).
inline double rel_error(const std::vector<double>& a,
                        const std::vector<double>& b, double floor = 1e-8) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    num += d * d;
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

inline double rel_error_params(const lpc::ParamSet& a, const lpc::ParamSet& b) {
  double num = 0.0, den = 0.0;
  for (const auto& [name, t] : a) {
    const auto& other = b.get(name).data();
    const auto& mine = t.data();
    for (std::size_t i = 0; i < mine.size(); ++i) {
      double d = mine[i] - other[i];
      num += d * d;
      den += other[i] * other[i];
    }
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

inline double max_abs_diff_params(const lpc::ParamSet& a,
                                  const lpc::ParamSet& b) {
  double m = 0.0;
  for (const auto& [name, t] : a) {
    const auto& other = b.get(name).data();
    const auto& mine = t.data();
    for (std::size_t i = 0; i < mine.size(); ++i) {
      m = std::max(m, std::abs(mine[i] - other[i]));
    }
  }
  return m;
}

// Independent scalar Gaussian log density.
inline double gauss_logpdf(double x, double mu, double sigma) {
  double r = (x - mu) / sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) -
         0.5 * r * r;
}

// Simpson-rule integral of the N(mu, sigma^2) density over [a, b].
inline double gauss_mass_quadrature(double mu, double sigma, double a, double b,
                                    int intervals = 4096) {
  auto pdf = [&](double t) {
    double r = (t - mu) / sigma;
    return std::exp(-0.5 * r * r) /
           (sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  double h = (b - a) / intervals;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < intervals; ++i) {
    s += pdf(a + i * h) * ((i % 2) ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

// Reference Adam written directly from the published update rule, scalar
// loop over a parameter vector. Descent convention.
struct RefAdam {
  double alpha, beta1, beta2, eps;
  std::vector<double> m, v;
  long t{0};
  explicit RefAdam(std::size_t n, double alpha_ = 1e-3, double b1 = 0.9,
                   double b2 = 0.999, double e = 1e-8)
      : alpha(alpha_), beta1(b1), beta2(b2), eps(e), m(n, 0.0), v(n, 0.0) {}
  void step(std::vector<double>& x, const std::vector<double>& g) {
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / (1.0 - std::pow(beta1, t));
      double vhat = v[i] / (1.0 - std::pow(beta2, t));
      x[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

// Gaussian elimination with partial pivoting: solves A x = b.
inline std::vector<double> solve_linear(lpc::Mat a, std::vector<double> b) {
  const std::int64_t n = a.rows;
  for (std::int64_t col = 0; col < n; ++col) {
    std::int64_t piv = col;
    for (std::int64_t r = col + 1; r < n; ++r) {
      if (std::abs(a.at(r, col)) > std::abs(a.at(piv, col))) piv = r;
    }
    if (piv != col) {
      for (std::int64_t j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (std::int64_t r = col + 1; r < n; ++r) {
      double f = a.at(r, col) / a.at(col, col);
      for (std::int64_t j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::int64_t r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (std::int64_t j = r + 1; j < n; ++j) s -= a.at(r, j) * x[j];
    x[r] = s / a.at(r, r);
  }
  return x;
}

// Power iteration with deflation: top-k eigenpairs of a symmetric matrix.
inline void power_iteration_eigh(const lpc::Mat& sym, int k,
                                 std::vector<double>& values,
                                 lpc::Mat& vectors, int iters = 20000) {
  const std::int64_t n = sym.rows;
  lpc::Mat a = sym;
  values.assign(k, 0.0);
  vectors = lpc::Mat(n, k);
  lpc::RngStream rng(12345);
  for (int c = 0; c < k; ++c) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    for (int it = 0; it < iters; ++it) {
      std::vector<double> w(n, 0.0);
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) w[i] += a.at(i, j) * v[j];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) break;
      for (std::int64_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    }
    double lambda = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::int64_t j = 0; j < n; ++j) row += a.at(i, j) * v[j];
      lambda += v[i] * row;
    }
    values[c] = lambda;
    for (std::int64_t i = 0; i < n; ++i) vectors.at(i, c) = v[i];
    // deflate
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j) a.at(i, j) -= lambda * v[i] * v[j];
  }
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace testutil

#endif  // LPC_TESTS_TESTUTIL_HPP
