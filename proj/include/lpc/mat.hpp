#ifndef LPC_MAT_HPP
#define LPC_MAT_HPP

#include <cstdint>
#include <vector>

namespace lpc {

// Dense row-major matrix of doubles. Plain value container used for chain
// states, datasets and metric computations; autodiff lives in Tensor.
struct Mat {
  std::int64_t rows{0};
  std::int64_t cols{0};
  std::vector<double> a;

  Mat() = default;
  Mat(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r * c), fill) {}

  double& at(std::int64_t i, std::int64_t j) {
    return a[static_cast<std::size_t>(i * cols + j)];
  }
  double at(std::int64_t i, std::int64_t j) const {
    return a[static_cast<std::size_t>(i * cols + j)];
  }
  std::int64_t size() const { return rows * cols; }
  bool empty() const { return a.empty(); }

  Mat row(std::int64_t i) const {
    Mat r(1, cols);
    for (std::int64_t j = 0; j < cols; ++j) r.at(0, j) = at(i, j);
    return r;
  }
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);
Mat identity(std::int64_t n);

// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
// eigenvalues sorted descending; eigenvectors are the matching columns of
// `vectors`. Input must be square and symmetric.
struct EigResult {
  std::vector<double> values;
  Mat vectors;
};
EigResult jacobi_eigh(const Mat& sym, int max_sweeps = 64);

// Inverse of a symmetric positive definite matrix through its
// eigendecomposition. Throws Error when the condition number (ratio of
// extreme eigenvalues) exceeds cond_limit.
Mat spd_inverse(const Mat& sym, double cond_limit = 1e12);

double squared_distance(const Mat& pts, std::int64_t i, const Mat& qts,
                        std::int64_t j);

}  // namespace lpc

#endif  // LPC_MAT_HPP
