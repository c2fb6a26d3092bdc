#ifndef LPC_OBJECTIVES_HPP
#define LPC_OBJECTIVES_HPP

#include <cstdint>
#include <vector>

#include "lpc/mat.hpp"
#include "lpc/models.hpp"
#include "lpc/param_set.hpp"

namespace lpc {

// Running sum of parameter gradients plus the number of contributions.
// Callers decide when to divide (the trainer averages by steps x batch).
struct GradAccumulator {
  ParamSet sums;
  std::int64_t count{0};

  static GradAccumulator like(const ParamSet& params) {
    GradAccumulator acc;
    acc.sums = params.zeros_like();
    return acc;
  }
  void add(const ParamSet& g) {
    sums.add_scaled(g, 1.0);
    ++count;
  }
  ParamSet average() const {
    ParamSet avg = sums.clone();
    if (count > 0) avg.scale(1.0 / static_cast<double>(count));
    return avg;
  }
};

// Adds grad_theta of sum_b log p(x_b, z_b | theta) into the accumulator.
// z is treated as a constant: no gradient path into the chain.
void accumulate_theta_grad(GradAccumulator& acc, const GenerativeModel& model,
                           const Mat& x, const Mat& z);

// Gradient (to be descended) of the Monte Carlo cross-entropy
//   -(1/(S*B)) sum_s sum_b log q(z_sb | x_b, phi)
// over S detached chain samples.
ParamSet forward_kl_grad(const WarmStartModel& model, const Mat& x,
                         const std::vector<Mat>& z_samples);

// Negative-ELBO graph shared by the reverse-KL objective and the VAE loss:
//   (1/B) sum_b [ -log p(x_b | z_b) + KL(q(z|x_b) || p(z)) ]
// with z = mu + sigma * eps and the Gaussian-Gaussian KL in closed form.
// Which parameters receive gradients is controlled by their requires_grad
// flags at call time.
Tensor negative_elbo_graph(const GenerativeModel& gen,
                           const WarmStartModel& warm, const Tensor& x,
                           const Tensor& eps);

// phi-gradient of the negative ELBO through the reparameterized sample;
// theta is held constant.
ParamSet reverse_kl_grad(const GenerativeModel& gen,
                         const WarmStartModel& warm, const Mat& x,
                         const Mat& eps);

// 0.5 * forward + 0.5 * reverse, elementwise.
ParamSet jeffreys_grad(const ParamSet& forward_component,
                       const ParamSet& reverse_component);

}  // namespace lpc

#endif  // LPC_OBJECTIVES_HPP
