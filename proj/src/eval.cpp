#include "lpc/eval.hpp"

#include <algorithm>
#include <cmath>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

constexpr double kRadiusFloor = 1e-12;

std::vector<double> knn_radii(const Mat& real, std::int64_t k) {
  const std::int64_t n = real.rows;
  std::vector<double> radii(static_cast<std::size_t>(n));
  std::vector<double> dists;
  for (std::int64_t i = 0; i < n; ++i) {
    dists.clear();
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.push_back(std::sqrt(squared_distance(real, i, real, j)));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    double r = dists[static_cast<std::size_t>(k - 1)];
    if (r < kRadiusFloor) {
      r = kRadiusFloor;
      counters().knn_radius_floor_hits.fetch_add(1, std::memory_order_relaxed);
    }
    radii[static_cast<std::size_t>(i)] = r;
  }
  return radii;
}

}  // namespace

void density_coverage(const Mat& real, const Mat& fake, std::int64_t k,
                      double& density, double& coverage) {
  if (k < 1) throw Error("density_coverage: k must be >= 1");
  if (real.rows < k + 1) {
    throw Error("density_coverage: need at least k+1 real points");
  }
  if (real.cols != fake.cols) {
    throw ShapeError("density_coverage: feature dimensions differ");
  }
  std::vector<double> radii = knn_radii(real, k);
  std::int64_t inside_pairs = 0;
  std::vector<char> covered(static_cast<std::size_t>(real.rows), 0);
  for (std::int64_t f = 0; f < fake.rows; ++f) {
    for (std::int64_t r = 0; r < real.rows; ++r) {
      double d = std::sqrt(squared_distance(fake, f, real, r));
      if (d <= radii[static_cast<std::size_t>(r)]) {
        ++inside_pairs;
        covered[static_cast<std::size_t>(r)] = 1;
      }
    }
  }
  density = fake.rows == 0
                ? 0.0
                : static_cast<double>(inside_pairs) /
                      (static_cast<double>(k) * static_cast<double>(fake.rows));
  std::int64_t hit = 0;
  for (char c : covered) hit += c;
  coverage = static_cast<double>(hit) / static_cast<double>(real.rows);
}

double median_heuristic_bandwidth(const Mat& a, const Mat& b) {
  std::vector<double> sq;
  auto pool = [&](const Mat& s, const Mat& t) {
    for (std::int64_t i = 0; i < s.rows; ++i) {
      for (std::int64_t j = 0; j < t.rows; ++j) {
        sq.push_back(squared_distance(s, i, t, j));
      }
    }
  };
  // all pairs over the pooled set, minus self-pairs
  pool(a, a);
  pool(b, b);
  pool(a, b);
  pool(b, a);
  std::vector<double> nonself;
  nonself.reserve(sq.size());
  for (double d : sq) {
    if (d > 0.0) nonself.push_back(d);
  }
  if (nonself.empty()) return 1.0;
  double med = quantile(std::move(nonself), 0.5);
  return std::sqrt(0.5 * med);
}

double mmd_rbf(const Mat& a, const Mat& b, double bandwidth) {
  if (a.rows < 2 || b.rows < 2) {
    throw Error("mmd_rbf: need at least two points per sample");
  }
  if (a.cols != b.cols) throw ShapeError("mmd_rbf: feature dimensions differ");
  double h = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(a, b);
  const double inv = 1.0 / (2.0 * h * h);
  auto kernel_sum_offdiag = [&](const Mat& s) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < s.rows; ++i) {
      for (std::int64_t j = i + 1; j < s.rows; ++j) {
        acc += std::exp(-squared_distance(s, i, s, j) * inv);
      }
    }
    return 2.0 * acc;
  };
  double kaa = kernel_sum_offdiag(a) /
               (static_cast<double>(a.rows) * static_cast<double>(a.rows - 1));
  double kbb = kernel_sum_offdiag(b) /
               (static_cast<double>(b.rows) * static_cast<double>(b.rows - 1));
  double kab = 0.0;
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t j = 0; j < b.rows; ++j) {
      kab += std::exp(-squared_distance(a, i, b, j) * inv);
    }
  }
  kab /= static_cast<double>(a.rows) * static_cast<double>(b.rows);
  double est = kaa + kbb - 2.0 * kab;
  return est > 0.0 ? est : 0.0;
}

MetricReport compute_metric_report(const Mat& real, const Mat& fake,
                                   std::int64_t k, double bandwidth) {
  MetricReport rep;
  rep.real_count = real.rows;
  rep.fake_count = fake.rows;
  rep.k = k;
  rep.bandwidth =
      bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(real, fake);
  density_coverage(real, fake, k, rep.density, rep.coverage);
  rep.mmd = mmd_rbf(real, fake, rep.bandwidth);
  return rep;
}

TrajectoryProjection pca_trajectory_projection(const Mat& trajectory,
                                               const GenerativeModel& model,
                                               const Mat& x,
                                               std::int64_t grid_res) {
  const std::int64_t steps = trajectory.rows;
  const std::int64_t d = trajectory.cols;
  if (steps < 3) throw Error("pca_trajectory_projection: need T >= 3 states");
  if (d < 2) throw Error("pca_trajectory_projection: need latent dim >= 2");
  if (x.rows != 1 || x.cols != model.obs_dim) {
    throw ShapeError("pca_trajectory_projection: x must be (1, obs_dim)");
  }

  // Difference vectors from each earlier state to the final state; PCA on
  // their raw second moment (no extra centering).
  Mat diff(steps - 1, d);
  for (std::int64_t t = 0; t < steps - 1; ++t) {
    for (std::int64_t j = 0; j < d; ++j) {
      diff.at(t, j) = trajectory.at(t, j) - trajectory.at(steps - 1, j);
    }
  }
  Mat second_moment = matmul(transpose(diff), diff);
  for (auto& v : second_moment.a) v /= static_cast<double>(steps - 1);
  EigResult eig = jacobi_eigh(second_moment);

  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  double tol = std::max(eig.values.front(), 0.0) * 1e-12;
  int rank = 0;
  for (double v : eig.values) {
    if (v > tol && v > 0.0) ++rank;
  }

  TrajectoryProjection out;
  out.components = std::min(rank, 2);
  if (out.components < 2) {
    counters().pca_rank_warnings.fetch_add(1, std::memory_order_relaxed);
  }
  for (int c = 0; c < out.components; ++c) {
    out.explained_variance.push_back(
        total > 0.0 ? std::max(eig.values[static_cast<std::size_t>(c)], 0.0) /
                          total
                    : 0.0);
  }

  out.points = Mat(steps, 2);
  for (std::int64_t t = 0; t < steps; ++t) {
    for (int c = 0; c < out.components; ++c) {
      double proj = 0.0;
      for (std::int64_t j = 0; j < d; ++j) {
        proj += (trajectory.at(t, j) - trajectory.at(steps - 1, j)) *
                eig.vectors.at(j, c);
      }
      out.points.at(t, c) = proj;
    }
  }

  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    x_lo = std::min(x_lo, out.points.at(t, 0));
    x_hi = std::max(x_hi, out.points.at(t, 0));
    y_lo = std::min(y_lo, out.points.at(t, 1));
    y_hi = std::max(y_hi, out.points.at(t, 1));
  }
  auto pad = [](double& lo, double& hi) {
    double w = hi - lo;
    if (w <= 0.0) w = 1.0;
    lo -= 0.2 * w;
    hi += 0.2 * w;
  };
  pad(x_lo, x_hi);
  pad(y_lo, y_hi);
  out.x_lo = x_lo;
  out.x_hi = x_hi;
  out.y_lo = y_lo;
  out.y_hi = y_hi;

  // Negative log joint over the lattice, evaluated in one batched pass.
  Mat zgrid(grid_res * grid_res, d);
  Mat xgrid(grid_res * grid_res, model.obs_dim);
  for (std::int64_t iy = 0; iy < grid_res; ++iy) {
    double gy = y_lo + (y_hi - y_lo) * static_cast<double>(iy) /
                           static_cast<double>(grid_res - 1);
    for (std::int64_t ix = 0; ix < grid_res; ++ix) {
      double gx = x_lo + (x_hi - x_lo) * static_cast<double>(ix) /
                             static_cast<double>(grid_res - 1);
      std::int64_t row = iy * grid_res + ix;
      for (std::int64_t j = 0; j < d; ++j) {
        double v = trajectory.at(steps - 1, j);
        if (out.components > 0) v += gx * eig.vectors.at(j, 0);
        if (out.components > 1) v += gy * eig.vectors.at(j, 1);
        zgrid.at(row, j) = v;
      }
      for (std::int64_t j = 0; j < model.obs_dim; ++j) {
        xgrid.at(row, j) = x.at(0, j);
      }
    }
  }
  auto& params = const_cast<ParamSet&>(model.params);
  params.set_requires_grad(false);
  std::vector<double> logp;
  try {
    logp = model
               .log_joint_vector(Tensor::from_mat(xgrid),
                                 Tensor::from_mat(zgrid))
               .data();
  } catch (...) {
    params.set_requires_grad(true);
    throw;
  }
  params.set_requires_grad(true);
  out.grid = Mat(grid_res, grid_res);
  for (std::int64_t iy = 0; iy < grid_res; ++iy) {
    for (std::int64_t ix = 0; ix < grid_res; ++ix) {
      out.grid.at(iy, ix) =
          -logp[static_cast<std::size_t>(iy * grid_res + ix)];
    }
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile: empty sample");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

TraceSummary trace_summary(const std::vector<StepTrace>& traces) {
  if (traces.empty()) throw Error("trace_summary: no traces");
  const std::int64_t steps = traces.front().steps();
  for (const auto& t : traces) {
    if (t.steps() != steps) {
      throw Error("trace_summary: traces have unequal lengths");
    }
  }
  TraceSummary s;
  for (std::int64_t t = 0; t < steps; ++t) {
    std::vector<double> lp, dlp, gn;
    for (const auto& trace : traces) {
      lp.insert(lp.end(), trace.logp[t].begin(), trace.logp[t].end());
      dlp.insert(dlp.end(), trace.delta_logp[t].begin(),
                 trace.delta_logp[t].end());
      gn.insert(gn.end(), trace.grad_norm[t].begin(),
                trace.grad_norm[t].end());
    }
    auto mean = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    s.mean_logp.push_back(mean(lp));
    s.mean_delta_logp.push_back(mean(dlp));
    s.p10_delta_logp.push_back(quantile(dlp, 0.1));
    s.p50_delta_logp.push_back(quantile(dlp, 0.5));
    s.p90_delta_logp.push_back(quantile(dlp, 0.9));
    s.mean_grad_norm.push_back(mean(gn));
    s.p10_grad_norm.push_back(quantile(gn, 0.1));
    s.p50_grad_norm.push_back(quantile(gn, 0.5));
    s.p90_grad_norm.push_back(quantile(gn, 0.9));
  }
  return s;
}

void linear_gaussian_posterior(const Mat& w, const std::vector<double>& b,
                               double sigma, double prior_var, const Mat& x,
                               Mat& mu_post, Mat& cov_post) {
  if (sigma <= 0.0 || prior_var <= 0.0) {
    throw Error("linear_gaussian_posterior: sigma and prior_var must be > 0");
  }
  const std::int64_t d = w.rows;
  const std::int64_t n = w.cols;
  if (static_cast<std::int64_t>(b.size()) != n || x.cols != n || x.rows != 1) {
    throw ShapeError("linear_gaussian_posterior: inconsistent shapes");
  }
  Mat precision = matmul(w, transpose(w));
  for (auto& v : precision.a) v /= sigma * sigma;
  for (std::int64_t i = 0; i < d; ++i) precision.at(i, i) += 1.0 / prior_var;
  cov_post = spd_inverse(precision);  // rejects ill-conditioned systems
  Mat residual(n, 1);
  for (std::int64_t j = 0; j < n; ++j) {
    residual.at(j, 0) =
        (x.at(0, j) - b[static_cast<std::size_t>(j)]) / (sigma * sigma);
  }
  mu_post = matmul(cov_post, matmul(w, residual));
}

}  // namespace lpc
