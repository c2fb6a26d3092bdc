#ifndef LPC_EVAL_HPP
#define LPC_EVAL_HPP

#include <cstdint>
#include <vector>

#include "lpc/mat.hpp"
#include "lpc/models.hpp"
#include "lpc/sampler.hpp"

namespace lpc {

// k-NN fidelity/recall pair computed on raw feature vectors. Radii are the
// distance from each real point to its k-th nearest real neighbor
// (excluding itself), floored at 1e-12 when duplicate points collapse them.
//   density  = (1/(k*M)) * sum_fake sum_real [fake inside real's radius]
//   coverage = fraction of real points whose ball contains >= 1 fake
void density_coverage(const Mat& real, const Mat& fake, std::int64_t k,
                      double& density, double& coverage);

// Kernel bandwidth from the median heuristic: h^2 is half the median
// squared distance over all pairs in the pooled sample (symmetric in the
// two arguments).
double median_heuristic_bandwidth(const Mat& a, const Mat& b);

// Unbiased MMD^2 estimate with kernel exp(-||x-y||^2 / (2 h^2)), clamped at
// zero for reporting. bandwidth <= 0 selects the median heuristic.
double mmd_rbf(const Mat& a, const Mat& b, double bandwidth);

struct MetricReport {
  double density{0.0};
  double coverage{0.0};
  double mmd{0.0};
  std::int64_t real_count{0};
  std::int64_t fake_count{0};
  std::int64_t k{0};
  double bandwidth{0.0};  // the bandwidth actually used
};
MetricReport compute_metric_report(const Mat& real, const Mat& fake,
                                   std::int64_t k, double bandwidth);

// 2-D projection of a latent trajectory: PCA (without re-centering) of the
// vectors pointing from the final state to each earlier state, projection
// onto the top two components, and the negative log joint evaluated on a
// lattice spanning the projected trajectory's bounding box with 20% margin.
struct TrajectoryProjection {
  Mat points;  // (T, 2); the final state projects to the origin
  Mat grid;    // (grid_res, grid_res) of -log p(x, z | theta)
  double x_lo{0.0}, x_hi{0.0}, y_lo{0.0}, y_hi{0.0};  // lattice extents
  std::vector<double> explained_variance;  // ratios of the retained PCs
  int components{0};  // usable components (< 2 when rank-deficient)
};
TrajectoryProjection pca_trajectory_projection(const Mat& trajectory,
                                               const GenerativeModel& model,
                                               const Mat& x,
                                               std::int64_t grid_res = 50);

// Per-step aggregates over chains (pooled across the given traces, which
// must all have the same number of steps).
struct TraceSummary {
  std::vector<double> mean_logp;
  std::vector<double> mean_delta_logp, p10_delta_logp, p50_delta_logp,
      p90_delta_logp;
  std::vector<double> mean_grad_norm, p10_grad_norm, p50_grad_norm,
      p90_grad_norm;
};
TraceSummary trace_summary(const std::vector<StepTrace>& traces);

// Exact posterior of the conjugate linear-Gaussian model
//   z ~ N(0, prior_var I),  x | z ~ N(W^T z + b, sigma^2 I)
// with W stored (latent_dim, obs_dim) as in the decoder:
//   Sigma = (I/prior_var + W W^T / sigma^2)^{-1}
//   mu    = Sigma W (x - b) / sigma^2
// Rejects systems whose posterior precision has condition number > 1e12.
void linear_gaussian_posterior(const Mat& w, const std::vector<double>& b,
                               double sigma, double prior_var, const Mat& x,
                               Mat& mu_post, Mat& cov_post);

// Sorted-sample quantile with linear interpolation at q*(n-1).
double quantile(std::vector<double> values, double q);

}  // namespace lpc

#endif  // LPC_EVAL_HPP
