#include "lpc/trainer.hpp"

#include <chrono>
#include <cmath>

namespace lpc {

namespace {

std::vector<double> row_norms(const Mat& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows));
  for (std::int64_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < m.cols; ++j) s += m.at(i, j) * m.at(i, j);
    out[static_cast<std::size_t>(i)] = std::sqrt(s);
  }
  return out;
}

int first_nonfinite_chain(const Mat& z) {
  for (std::int64_t i = 0; i < z.rows; ++i) {
    for (std::int64_t j = 0; j < z.cols; ++j) {
      if (!std::isfinite(z.at(i, j))) return static_cast<int>(i);
    }
  }
  return -1;
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  sampler.validate();
  if (learning_rate <= 0.0) throw Error("train: learning_rate must be > 0");
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (epochs < 0) throw Error("train: epochs must be >= 0");
  if (prior_init_batches < 0) {
    throw Error("train: prior_init_batches must be >= 0");
  }
  if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0) {
    throw Error("train: burn_in_fraction must lie in [0,1)");
  }
  if (clip_norm < 0.0) throw Error("train: clip_norm must be >= 0");
}

void adam_update(ParamSet& params, const ParamSet& grads, AdamState& state,
                 double alpha) {
  ++state.step;
  const double bc1 =
      1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const auto& g = grads.get(name).data();
    auto& m = state.m.get(name).mutable_data();
    auto& v = state.v.get(name).mutable_data();
    auto& x = p.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      x[i] -= alpha * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  double norm = grads.l2_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    grads.scale(max_norm / norm);
  }
  return norm;
}

StepMetrics lpc_train_step(GenerativeModel& gen, WarmStartModel& warm,
                           const Mat& x, const TrainConfig& cfg,
                           AdamState& opt_theta, AdamState& opt_phi,
                           std::int64_t global_batch_index,
                           const RngStream& rng) {
  cfg.validate();
  if (x.rows < 1) throw Error("lpc_train_step: empty batch");
  const double t0 = now_ms();
  const std::int64_t batch = x.rows;
  const std::int64_t d = gen.latent_dim;
  const std::int64_t steps = cfg.sampler.steps;

  // Warm-start draw: one (B, d) standard-normal block feeds either the
  // prior initialization (scaled by the prior sd) or the reparameterized
  // q-draw; the reverse-KL term reuses the same eps.
  RngStream warm_rng = rng.derive(rng_tag::kWarmStart);
  Mat eps(batch, d);
  warm_rng.fill_normal(eps.a);

  const bool prior_phase = cfg.objective == Objective::kNone ||
                           global_batch_index < cfg.prior_init_batches;
  Mat z0(batch, d);
  if (prior_phase) {
    const double sd = std::sqrt(gen.prior_variance);
    for (std::size_t i = 0; i < z0.a.size(); ++i) z0.a[i] = sd * eps.a[i];
  } else {
    Mat mu, sigma;
    warm.encode_values(x, mu, sigma);
    for (std::size_t i = 0; i < z0.a.size(); ++i) {
      z0.a[i] = mu.a[i] + sigma.a[i] * eps.a[i];
    }
  }

  const bool want_reverse = cfg.train_phi &&
                            (cfg.objective == Objective::kReverse ||
                             cfg.objective == Objective::kJeffreys);
  ParamSet reverse_grad;
  if (want_reverse) {
    reverse_grad = reverse_kl_grad(gen, warm, x, eps);
  }

  // Chain with theta accumulation at the post-step iterates z^(1..T); each
  // point's backward pass is shared between the theta gradient and the
  // next step's drift.
  StepMetrics out;
  RngStream chain_rng = rng.derive(rng_tag::kChain);
  ChainState state = ChainState::init(z0);
  GradAccumulator theta_acc = GradAccumulator::like(gen.params);
  std::vector<Mat> kept_samples;
  const std::int64_t skip = static_cast<std::int64_t>(
      std::floor(cfg.burn_in_fraction * static_cast<double>(steps)));
  double elbo_sum = 0.0;
  JointEval eval = eval_log_joint(gen, x, state.z, false);
  for (std::int64_t t = 1; t <= steps; ++t) {
    out.trace.append(eval.logp, row_norms(eval.z_grad));
    state = apply_langevin_update(state, eval.z_grad, cfg.sampler, chain_rng);
    int bad = first_nonfinite_chain(state.z);
    if (bad >= 0) {
      throw TrainStepDivergence(global_batch_index, static_cast<int>(t),
                                std::move(out.trace));
    }
    eval = eval_log_joint(gen, x, state.z, cfg.train_theta && t > skip);
    for (double lp : eval.logp) elbo_sum += lp;
    if (t > skip) {
      if (cfg.train_theta) theta_acc.add(eval.theta_grad);
      kept_samples.push_back(state.z);
    }
  }
  out.elbo = elbo_sum / static_cast<double>(steps * batch);
  out.logp_mean = 0.0;
  for (double lp : eval.logp) out.logp_mean += lp;
  out.logp_mean /= static_cast<double>(batch);

  if (cfg.train_theta) {
    // Ascent on the chain-averaged log joint, applied as descent on its
    // negation, averaged over chain states and batch.
    ParamSet theta_grad = theta_acc.sums.clone();
    theta_grad.scale(-1.0 / static_cast<double>(theta_acc.count * batch));
    out.grad_norm_theta = clip_global_norm(theta_grad, cfg.clip_norm);
    adam_update(gen.params, theta_grad, opt_theta, cfg.learning_rate);
  }

  if (cfg.train_phi && cfg.objective != Objective::kNone) {
    ParamSet phi_grad;
    switch (cfg.objective) {
      case Objective::kForward:
        phi_grad = forward_kl_grad(warm, x, kept_samples);
        break;
      case Objective::kReverse:
        phi_grad = reverse_grad;
        break;
      case Objective::kJeffreys:
        phi_grad = jeffreys_grad(forward_kl_grad(warm, x, kept_samples),
                                 reverse_grad);
        break;
      case Objective::kNone:
        break;
    }
    out.grad_norm_phi = clip_global_norm(phi_grad, cfg.clip_norm);
    adam_update(warm.params, phi_grad, opt_phi, cfg.learning_rate);
  }

  out.wall_ms = now_ms() - t0;
  return out;
}

StepMetrics vae_train_step(GenerativeModel& gen, WarmStartModel& warm,
                           const Mat& x, const TrainConfig& cfg,
                           AdamState& opt_theta, AdamState& opt_phi,
                           const RngStream& rng) {
  cfg.validate();
  if (x.rows < 1) throw Error("vae_train_step: empty batch");
  const double t0 = now_ms();
  const std::int64_t batch = x.rows;
  const std::int64_t d = gen.latent_dim;

  RngStream warm_rng = rng.derive(rng_tag::kWarmStart);
  Mat eps(batch, d);
  warm_rng.fill_normal(eps.a);

  // One graph, gradients for both parameter sets.
  for (const auto& [name, t] : gen.params) {
    const_cast<Tensor&>(t).reset_grad();
  }
  for (const auto& [name, t] : warm.params) {
    const_cast<Tensor&>(t).reset_grad();
  }
  Tensor loss = negative_elbo_graph(gen, warm, Tensor::from_mat(x),
                                    Tensor::from_mat(eps));
  backward(loss);

  StepMetrics out;
  out.elbo = -loss.scalar_value();

  ParamSet theta_grad;
  for (const auto& [name, t] : gen.params) {
    theta_grad.add(name, Tensor::from_data(t.shape(), t.grad()));
  }
  ParamSet phi_grad;
  for (const auto& [name, t] : warm.params) {
    phi_grad.add(name, Tensor::from_data(t.shape(), t.grad()));
  }

  // Diagnostics at the sampled latent state.
  Mat mu, sigma;
  warm.encode_values(x, mu, sigma);
  Mat z(batch, d);
  for (std::size_t i = 0; i < z.a.size(); ++i) {
    z.a[i] = mu.a[i] + sigma.a[i] * eps.a[i];
  }
  out.logp_mean = log_joint(gen, x, z) / static_cast<double>(batch);

  if (cfg.train_theta) {
    out.grad_norm_theta = clip_global_norm(theta_grad, cfg.clip_norm);
    adam_update(gen.params, theta_grad, opt_theta, cfg.learning_rate);
  }
  if (cfg.train_phi) {
    out.grad_norm_phi = clip_global_norm(phi_grad, cfg.clip_norm);
    adam_update(warm.params, phi_grad, opt_phi, cfg.learning_rate);
  }
  out.wall_ms = now_ms() - t0;
  return out;
}

}  // namespace lpc
