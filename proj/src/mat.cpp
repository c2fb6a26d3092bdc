#include "lpc/mat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lpc/errors.hpp"

namespace lpc {

Counters& counters() {
  static Counters c;
  return c;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  Mat out(a.rows, b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t k = 0; k < a.cols; ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::int64_t j = 0; j < b.cols; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (std::int64_t i = 0; i < m.rows; ++i)
    for (std::int64_t j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
  return out;
}

Mat identity(std::int64_t n) {
  Mat out(n, n);
  for (std::int64_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

EigResult jacobi_eigh(const Mat& sym, int max_sweeps) {
  if (sym.rows != sym.cols) throw ShapeError("jacobi_eigh: matrix not square");
  const std::int64_t n = sym.rows;
  Mat a = sym;
  Mat v = identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i + 1; j < n; ++j) s += a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
  };

  double scale = 0.0;
  for (double x : a.a) scale = std::max(scale, std::abs(x));
  const double tol = 1e-15 * std::max(scale, 1.0);

  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (std::int64_t p = 0; p < n - 1; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (std::abs(apq) <= tol * 1e-2) continue;
        double app = a.at(p, p);
        double aqq = a.at(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::int64_t k = 0; k < n; ++k) {
          double akp = a.at(k, p);
          double akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          double apk = a.at(p, k);
          double aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          double vkp = v.at(k, p);
          double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) {
    return a.at(i, i) > a.at(j, j);
  });

  EigResult res;
  res.values.resize(static_cast<std::size_t>(n));
  res.vectors = Mat(n, n);
  for (std::int64_t c = 0; c < n; ++c) {
    res.values[static_cast<std::size_t>(c)] = a.at(order[c], order[c]);
    for (std::int64_t r = 0; r < n; ++r)
      res.vectors.at(r, c) = v.at(r, order[c]);
  }
  return res;
}

Mat spd_inverse(const Mat& sym, double cond_limit) {
  EigResult eig = jacobi_eigh(sym);
  double lmax = eig.values.front();
  double lmin = eig.values.back();
  if (lmin <= 0.0 || lmax / lmin > cond_limit) {
    throw Error("spd_inverse: matrix ill-conditioned (condition number " +
                std::to_string(lmin > 0.0 ? lmax / lmin : -1.0) + ")");
  }
  const std::int64_t n = sym.rows;
  Mat out(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        s += eig.vectors.at(i, k) * eig.vectors.at(j, k) /
             eig.values[static_cast<std::size_t>(k)];
      }
      out.at(i, j) = s;
    }
  }
  return out;
}

double squared_distance(const Mat& pts, std::int64_t i, const Mat& qts,
                        std::int64_t j) {
  double s = 0.0;
  for (std::int64_t k = 0; k < pts.cols; ++k) {
    double d = pts.at(i, k) - qts.at(j, k);
    s += d * d;
  }
  return s;
}

}  // namespace lpc
