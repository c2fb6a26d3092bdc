#include "lpc/models.hpp"

#include <cmath>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

Tensor uniform_tensor(const Shape& s, RngStream& rng, double bound) {
  std::vector<double> data(static_cast<std::size_t>(shape_numel(s)));
  rng.fill_uniform(data, -bound, bound);
  return Tensor::from_data(s, std::move(data), true);
}

void check_batch_shape(const char* what, const Tensor& t, std::int64_t dim) {
  if (t.rank() != 2 || t.shape()[1] != dim) {
    throw ShapeError(std::string(what) + ": expected (B," +
                     std::to_string(dim) + "), got " + shape_str(t.shape()));
  }
}

}  // namespace

void add_mlp_params(ParamSet& p, const std::string& prefix,
                    std::int64_t in_dim,
                    const std::vector<std::int64_t>& hidden,
                    std::int64_t out_dim, RngStream& rng,
                    bool zero_final_layer) {
  std::int64_t prev = in_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    p.add(prefix + ".w" + std::to_string(l),
          uniform_tensor({prev, hidden[l]}, rng, bound));
    p.add(prefix + ".b" + std::to_string(l),
          Tensor::zeros({hidden[l]}, true));
    prev = hidden[l];
  }
  if (zero_final_layer) {
    p.add(prefix + ".head_w", Tensor::zeros({prev, out_dim}, true));
  } else {
    double bound = 1.0 / std::sqrt(static_cast<double>(prev));
    p.add(prefix + ".head_w", uniform_tensor({prev, out_dim}, rng, bound));
  }
  p.add(prefix + ".head_b", Tensor::zeros({out_dim}, true));
}

Tensor mlp_forward(const ParamSet& p, const std::string& prefix,
                   const Tensor& input, std::size_t n_hidden) {
  const std::int64_t batch = input.shape()[0];
  Tensor h = input;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    const Tensor& w = p.get(prefix + ".w" + std::to_string(l));
    const Tensor& b = p.get(prefix + ".b" + std::to_string(l));
    h = silu(add(matmul(h, w), broadcast_to(b, {batch, w.shape()[1]})));
  }
  const Tensor& w = p.get(prefix + ".head_w");
  const Tensor& b = p.get(prefix + ".head_b");
  return add(matmul(h, w), broadcast_to(b, {batch, w.shape()[1]}));
}

GenerativeModel GenerativeModel::make(std::int64_t obs_dim,
                                      std::int64_t latent_dim,
                                      const std::vector<std::int64_t>& hidden,
                                      Likelihood lik, RngStream rng,
                                      DecoderScaleMode scale_mode,
                                      double fixed_scale,
                                      double prior_variance) {
  if (obs_dim < 1 || latent_dim < 1) {
    throw Error("GenerativeModel: dimensions must be >= 1");
  }
  if (prior_variance <= 0.0) {
    throw Error("GenerativeModel: prior variance must be positive");
  }
  GenerativeModel m;
  m.obs_dim = obs_dim;
  m.latent_dim = latent_dim;
  m.hidden = hidden;
  m.prior_variance = prior_variance;
  m.likelihood = lik;
  m.scale_mode = scale_mode;
  m.fixed_scale = fixed_scale;
  add_mlp_params(m.params, "dec", latent_dim, hidden, obs_dim, rng, false);
  // Pre-activation chosen so the initial observation scale is ~0.67: sharp
  // enough that early posteriors carry information about x.
  constexpr double kScalePreInit = -5.0;
  if (scale_mode == DecoderScaleMode::kLearnedGlobal) {
    m.params.add("dec.scale_pre", Tensor::full({}, kScalePreInit, true));
  } else if (scale_mode == DecoderScaleMode::kLearnedPerDim) {
    m.params.add("dec.scale_pre",
                 Tensor::full({obs_dim}, kScalePreInit, true));
  }
  return m;
}

Tensor GenerativeModel::decode_mean(const Tensor& z) const {
  check_batch_shape("decode_mean", z, latent_dim);
  return mlp_forward(params, "dec", z, hidden.size());
}

Tensor GenerativeModel::decode_scale(std::int64_t batch) const {
  if (scale_mode == DecoderScaleMode::kFixed) {
    return Tensor::full({batch, obs_dim}, fixed_scale);
  }
  Tensor s = add_scalar(softplus(params.get("dec.scale_pre"), kSoftplusBeta),
                        kLikelihoodScaleFloor);
  return broadcast_to(s, {batch, obs_dim});
}

Tensor GenerativeModel::log_joint_vector(const Tensor& x,
                                         const Tensor& z) const {
  check_batch_shape("log_joint", x, obs_dim);
  check_batch_shape("log_joint", z, latent_dim);
  const std::int64_t batch = x.shape()[0];
  Tensor prior = gaussian_log_density(
      z, Tensor::zeros({batch, latent_dim}),
      Tensor::full({batch, latent_dim}, std::sqrt(prior_variance)));
  Tensor mean = decode_mean(z);
  Tensor scale = decode_scale(batch);
  Tensor lik = likelihood == Likelihood::kDiagonalGaussian
                   ? gaussian_log_density(x, mean, scale)
                   : discretized_gaussian_logpmf(x, mean, scale);
  return add(prior, lik);
}

double log_joint(const GenerativeModel& model, const Mat& x, const Mat& z) {
  auto& p = const_cast<ParamSet&>(model.params);
  p.set_requires_grad(false);
  double v = 0.0;
  try {
    v = sum(model.log_joint_vector(Tensor::from_mat(x), Tensor::from_mat(z)))
            .scalar_value();
  } catch (...) {
    p.set_requires_grad(true);
    throw;
  }
  p.set_requires_grad(true);
  return v;
}

JointEval eval_log_joint(const GenerativeModel& model, const Mat& x,
                         const Mat& z, bool want_theta_grad) {
  // Parameter gradient tracking is toggled per evaluation; the flag is read
  // while the graph is built, then restored.
  auto& params = const_cast<ParamSet&>(model.params);
  params.set_requires_grad(want_theta_grad);
  JointEval out;
  try {
    Tensor xt = Tensor::from_mat(x);
    Tensor zt = Tensor::from_mat(z, true);
    Tensor per_example = model.log_joint_vector(xt, zt);
    Tensor total = sum(per_example);
    backward(total);
    out.logp = per_example.data();
    out.z_grad.rows = z.rows;
    out.z_grad.cols = z.cols;
    out.z_grad.a = zt.grad();
    if (want_theta_grad) {
      for (const auto& [name, t] : params) {
        out.theta_grad.add(name, Tensor::from_data(t.shape(), t.grad()));
        const_cast<Tensor&>(t).reset_grad();
      }
      out.has_theta = true;
    }
  } catch (...) {
    params.set_requires_grad(true);
    throw;
  }
  params.set_requires_grad(true);
  return out;
}

WarmStartModel WarmStartModel::make(std::int64_t obs_dim,
                                    std::int64_t latent_dim,
                                    const std::vector<std::int64_t>& hidden,
                                    RngStream rng) {
  if (obs_dim < 1 || latent_dim < 1) {
    throw Error("WarmStartModel: dimensions must be >= 1");
  }
  WarmStartModel m;
  m.obs_dim = obs_dim;
  m.latent_dim = latent_dim;
  m.hidden = hidden;
  // Final layer zero-initialized: mu = 0 and sigma = softplus(0) before any
  // training, a sane warm start.
  add_mlp_params(m.params, "enc", obs_dim, hidden, 2 * latent_dim, rng, true);
  return m;
}

WarmStartModel::Encoded WarmStartModel::encode(const Tensor& x) const {
  check_batch_shape("encode", x, obs_dim);
  Tensor head = mlp_forward(params, "enc", x, hidden.size());
  Encoded e;
  e.mu = slice_last(head, 0, latent_dim);
  e.sigma = softplus(slice_last(head, latent_dim, latent_dim), kSoftplusBeta);
  return e;
}

void WarmStartModel::encode_values(const Mat& x, Mat& mu, Mat& sigma) const {
  auto& p = const_cast<ParamSet&>(params);
  p.set_requires_grad(false);
  try {
    Encoded e = encode(Tensor::from_mat(x));
    mu = e.mu.to_mat();
    sigma = e.sigma.to_mat();
  } catch (...) {
    p.set_requires_grad(true);
    throw;
  }
  p.set_requires_grad(true);
}

Tensor log_q_vector(const WarmStartModel& model, const Tensor& x,
                    const Tensor& z) {
  auto e = model.encode(x);
  return gaussian_log_density(z, e.mu, e.sigma);
}

double log_q(const WarmStartModel& model, const Mat& x, const Mat& z) {
  auto& p = const_cast<ParamSet&>(model.params);
  p.set_requires_grad(false);
  double v = 0.0;
  try {
    v = sum(log_q_vector(model, Tensor::from_mat(x), Tensor::from_mat(z)))
            .scalar_value();
  } catch (...) {
    p.set_requires_grad(true);
    throw;
  }
  p.set_requires_grad(true);
  return v;
}

Tensor reparam_sample(const WarmStartModel& model, const Tensor& x,
                      const Tensor& eps) {
  auto e = model.encode(x);
  if (eps.shape() != e.mu.shape()) {
    throw ShapeError("reparam_sample: eps shape " + shape_str(eps.shape()) +
                     " does not match (B," + std::to_string(model.latent_dim) +
                     ")");
  }
  return add(e.mu, mul(e.sigma, eps));
}

Mat ancestral_sample(const GenerativeModel& model, std::int64_t count,
                     RngStream rng, bool return_means) {
  Mat out(count, model.obs_dim);
  if (count == 0) return out;
  Mat z(count, model.latent_dim);
  RngStream zs = rng.derive(0);
  double prior_sd = std::sqrt(model.prior_variance);
  for (auto& v : z.a) v = prior_sd * zs.normal();

  auto& p = const_cast<ParamSet&>(model.params);
  p.set_requires_grad(false);
  Mat mean, scale;
  try {
    mean = model.decode_mean(Tensor::from_mat(z)).to_mat();
    scale = model.decode_scale(count).to_mat();
  } catch (...) {
    p.set_requires_grad(true);
    throw;
  }
  p.set_requires_grad(true);

  if (return_means) return mean;
  RngStream xs = rng.derive(1);
  for (std::int64_t i = 0; i < count; ++i) {
    for (std::int64_t j = 0; j < model.obs_dim; ++j) {
      double v = mean.at(i, j) + scale.at(i, j) * xs.normal();
      if (model.likelihood == Likelihood::kDiscretizedGaussian) {
        // The bin containing the draw; edge bins absorb the tails.
        v = std::round(std::min(std::max(v, 0.0), 1.0) * 255.0) / 255.0;
      }
      out.at(i, j) = v;
    }
  }
  return out;
}

double discretized_gaussian_logpmf_value(const Mat& x, const Mat& mean,
                                         const Mat& scale) {
  return sum(discretized_gaussian_logpmf(Tensor::from_mat(x),
                                         Tensor::from_mat(mean),
                                         Tensor::from_mat(scale)))
      .scalar_value();
}

}  // namespace lpc
