#include "lpc/objectives.hpp"

#include <cmath>

#include "lpc/errors.hpp"

namespace lpc {

void accumulate_theta_grad(GradAccumulator& acc, const GenerativeModel& model,
                           const Mat& x, const Mat& z) {
  JointEval eval = eval_log_joint(model, x, z, true);
  acc.add(eval.theta_grad);
}

ParamSet forward_kl_grad(const WarmStartModel& model, const Mat& x,
                         const std::vector<Mat>& z_samples) {
  if (z_samples.empty()) {
    throw Error("forward_kl_grad: no chain samples given");
  }
  const double scale =
      -1.0 / static_cast<double>(z_samples.size() * x.rows);
  auto f = [&](const ParamSet&) {
    Tensor xt = Tensor::from_mat(x);
    auto e = model.encode(xt);
    Tensor total;
    for (const Mat& z : z_samples) {
      Tensor ll = sum(gaussian_log_density(Tensor::from_mat(z), e.mu, e.sigma));
      total = total.defined() ? add(total, ll) : ll;
    }
    return mul_scalar(total, scale);
  };
  return value_and_grad(f, model.params).grads;
}

Tensor negative_elbo_graph(const GenerativeModel& gen,
                           const WarmStartModel& warm, const Tensor& x,
                           const Tensor& eps) {
  const std::int64_t batch = x.shape()[0];
  auto e = warm.encode(x);
  Tensor z = add(e.mu, mul(e.sigma, eps));
  Tensor mean = gen.decode_mean(z);
  Tensor scale = gen.decode_scale(batch);
  Tensor lik = gen.likelihood == Likelihood::kDiagonalGaussian
                   ? gaussian_log_density(x, mean, scale)
                   : discretized_gaussian_logpmf(x, mean, scale);
  // KL(N(mu, sigma^2) || N(0, pv)) elementwise:
  //   -log sigma + (sigma^2 + mu^2) / (2 pv) + (log pv)/2 - 1/2
  const double pv = gen.prior_variance;
  Tensor kl_elem = add_scalar(
      add(neg(log(e.sigma)),
          mul_scalar(add(square(e.sigma), square(e.mu)), 0.5 / pv)),
      0.5 * std::log(pv) - 0.5);
  Tensor kl = sum_last(kl_elem);
  return mul_scalar(sum(sub(kl, lik)), 1.0 / static_cast<double>(batch));
}

ParamSet reverse_kl_grad(const GenerativeModel& gen,
                         const WarmStartModel& warm, const Mat& x,
                         const Mat& eps) {
  auto& theta = const_cast<ParamSet&>(gen.params);
  theta.set_requires_grad(false);
  ParamSet grads;
  try {
    auto f = [&](const ParamSet&) {
      return negative_elbo_graph(gen, warm, Tensor::from_mat(x),
                                 Tensor::from_mat(eps));
    };
    grads = value_and_grad(f, warm.params).grads;
  } catch (...) {
    theta.set_requires_grad(true);
    throw;
  }
  theta.set_requires_grad(true);
  return grads;
}

ParamSet jeffreys_grad(const ParamSet& forward_component,
                       const ParamSet& reverse_component) {
  ParamSet out = forward_component.clone();
  out.scale(0.5);
  out.add_scaled(reverse_component, 0.5);
  return out;
}

}  // namespace lpc
