#ifndef LPC_TRAINER_HPP
#define LPC_TRAINER_HPP

#include <cstdint>
#include <vector>

#include "lpc/models.hpp"
#include "lpc/objectives.hpp"
#include "lpc/param_set.hpp"
#include "lpc/sampler.hpp"

namespace lpc {

enum class Objective { kForward, kReverse, kJeffreys, kNone };
enum class Algo { kLpc, kVae };

struct TrainConfig {
  Algo algo{Algo::kLpc};
  Objective objective{Objective::kJeffreys};
  double learning_rate{1e-3};  // alpha
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-8};
  std::int64_t epochs{10};
  std::int64_t batch_size{64};
  SamplerConfig sampler;  // gamma, T, beta, preconditioning, noise
  // Chains start from the prior for this many leading batches; afterwards
  // the warm-start model provides z0 (objective kNone uses the prior
  // throughout).
  std::int64_t prior_init_batches{50};
  // Global gradient-norm clip; 0 disables. Off by default so that
  // objective instabilities reproduce faithfully.
  double clip_norm{0.0};
  // Leading fraction of each chain excluded from the theta and forward-KL
  // accumulations.
  double burn_in_fraction{0.0};
  std::uint64_t seed{1};
  bool train_theta{true};
  bool train_phi{true};

  void validate() const;
};

// Bias-corrected Adam moments for one ParamSet.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step{0};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};

  static AdamState like(const ParamSet& params, double beta1 = 0.9,
                        double beta2 = 0.999, double eps = 1e-8) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
  }
};

// One descent step: params -= alpha * mhat / (sqrt(vhat) + eps).
// Ascent objectives are handled by negating their gradients before the
// call; everything the trainer feeds in is a descent direction on a loss.
void adam_update(ParamSet& params, const ParamSet& grads, AdamState& state,
                 double alpha);

// Scales grads down to the given global L2 norm when they exceed it;
// returns the pre-clip norm.
double clip_global_norm(ParamSet& grads, double max_norm);

// A training step diverged; parameters were left untouched.
class TrainStepDivergence : public Error {
 public:
  TrainStepDivergence(std::int64_t batch_index, int step_index,
                      StepTrace partial)
      : Error("training step diverged on batch " +
              std::to_string(batch_index) + " at chain step " +
              std::to_string(step_index)),
        batch_index(batch_index),
        step_index(step_index),
        partial_trace(std::move(partial)) {}
  std::int64_t batch_index;
  int step_index;
  StepTrace partial_trace;
};

struct StepMetrics {
  // Chain-averaged per-example log joint: the ELBO estimate up to the
  // parameter-free entropy term. For the VAE step, the single-sample
  // reparameterized ELBO.
  double elbo{0.0};
  // Batch-mean log joint at the final latent state.
  double logp_mean{0.0};
  double grad_norm_theta{0.0};  // pre-clip norm of the applied gradient
  double grad_norm_phi{0.0};
  double wall_ms{0.0};
  StepTrace trace;  // recorded at z^(0..T-1); empty for the VAE step
};

// One full LPC step (warm-start draw, reverse-KL gradient, T preconditioned
// Langevin steps with theta/forward-KL accumulation, one Adam update per
// model). `global_batch_index` drives the prior-initialization phase.
// Randomness derives from `rng` alone, so a step is a pure function of
// (models, optimizer states, x, config, batch index, rng).
StepMetrics lpc_train_step(GenerativeModel& gen, WarmStartModel& warm,
                           const Mat& x, const TrainConfig& cfg,
                           AdamState& opt_theta, AdamState& opt_phi,
                           std::int64_t global_batch_index,
                           const RngStream& rng);

// Single-sample reparameterized ELBO with a joint Adam update of theta and
// phi. Draws eps exactly like the LPC step's warm-start draw so the two
// algorithms are comparable under a shared seed.
StepMetrics vae_train_step(GenerativeModel& gen, WarmStartModel& warm,
                           const Mat& x, const TrainConfig& cfg,
                           AdamState& opt_theta, AdamState& opt_phi,
                           const RngStream& rng);

}  // namespace lpc

#endif  // LPC_TRAINER_HPP
