#ifndef LPC_MODELS_HPP
#define LPC_MODELS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lpc/mat.hpp"
#include "lpc/param_set.hpp"
#include "lpc/rng.hpp"
#include "lpc/tensor.hpp"

namespace lpc {

enum class Likelihood { kDiagonalGaussian, kDiscretizedGaussian };
enum class DecoderScaleMode { kLearnedGlobal, kLearnedPerDim, kFixed };

constexpr double kSoftplusBeta = 0.3;
constexpr double kLikelihoodScaleFloor = 1e-4;

// Latent-Gaussian generative model: z ~ N(0, prior_variance * I),
// x | z ~ likelihood(decoder(z)). The decoder is an MLP with SiLU hidden
// activations; the observation scale is a learned parameter transformed by
// softplus(beta=0.3) plus a small floor that keeps log-density gradients
// bounded.
struct GenerativeModel {
  std::int64_t obs_dim{0};
  std::int64_t latent_dim{0};
  std::vector<std::int64_t> hidden;
  double prior_variance{1.0};
  Likelihood likelihood{Likelihood::kDiagonalGaussian};
  DecoderScaleMode scale_mode{DecoderScaleMode::kLearnedGlobal};
  double fixed_scale{1.0};
  ParamSet params;  // decoder parameters (theta)

  static GenerativeModel make(std::int64_t obs_dim, std::int64_t latent_dim,
                              const std::vector<std::int64_t>& hidden,
                              Likelihood lik, RngStream rng,
                              DecoderScaleMode scale_mode =
                                  DecoderScaleMode::kLearnedGlobal,
                              double fixed_scale = 1.0,
                              double prior_variance = 1.0);

  // Decoder mean for a (B, latent_dim) tensor; graph-connected.
  Tensor decode_mean(const Tensor& z) const;
  // Observation scale broadcast to (B, obs_dim); graph-connected when
  // learned.
  Tensor decode_scale(std::int64_t batch) const;
  // Per-example log p(x_b, z_b | theta); shapes (B, obs_dim), (B,
  // latent_dim) -> (B,).
  Tensor log_joint_vector(const Tensor& x, const Tensor& z) const;
};

// Scalar log p(x, z | theta) summed over the batch.
double log_joint(const GenerativeModel& model, const Mat& x, const Mat& z);

// One fused evaluation of the log joint: per-example values, the gradient
// with respect to z, and (optionally) parameter gradients, all from a
// single backward sweep.
struct JointEval {
  std::vector<double> logp;  // per batch row
  Mat z_grad;                // (B, latent_dim)
  ParamSet theta_grad;       // populated iff requested
  bool has_theta{false};
};
JointEval eval_log_joint(const GenerativeModel& model, const Mat& x,
                         const Mat& z, bool want_theta_grad);

// Amortized warm-start model: q(z | x, phi) = N(mu(x), diag(sigma(x)^2)).
// The encoder MLP ends in a linear layer of width 2*latent_dim whose halves
// are the mean and the pre-scale; sigma = softplus(pre; 0.3). The final
// layer is zero-initialized so a fresh model emits mu = 0 and a constant
// sigma for every input.
struct WarmStartModel {
  std::int64_t obs_dim{0};
  std::int64_t latent_dim{0};
  std::vector<std::int64_t> hidden;
  ParamSet params;  // encoder parameters (phi)

  static WarmStartModel make(std::int64_t obs_dim, std::int64_t latent_dim,
                             const std::vector<std::int64_t>& hidden,
                             RngStream rng);

  // Graph-connected (mu, sigma), each (B, latent_dim).
  struct Encoded {
    Tensor mu;
    Tensor sigma;
  };
  Encoded encode(const Tensor& x) const;
  // Detached convenience evaluation.
  void encode_values(const Mat& x, Mat& mu, Mat& sigma) const;
};

// Diagonal-Gaussian log density of z under q(z | x, phi), summed over the
// batch; differentiable in phi.
Tensor log_q_vector(const WarmStartModel& model, const Tensor& x,
                    const Tensor& z);
double log_q(const WarmStartModel& model, const Mat& x, const Mat& z);

// z = mu + sigma * eps with the differentiable path to phi preserved.
Tensor reparam_sample(const WarmStartModel& model, const Tensor& x,
                      const Tensor& eps);

// z ~ prior, x ~ likelihood(decoder(z)). With return_means the likelihood
// noise is skipped and decoder means are returned.
Mat ancestral_sample(const GenerativeModel& model, std::int64_t count,
                     RngStream rng, bool return_means = false);

// Discretized-Gaussian scalar convenience wrapper (summed log pmf).
double discretized_gaussian_logpmf_value(const Mat& x, const Mat& mean,
                                         const Mat& scale);

// MLP plumbing shared by both models.
void add_mlp_params(ParamSet& p, const std::string& prefix,
                    std::int64_t in_dim,
                    const std::vector<std::int64_t>& hidden,
                    std::int64_t out_dim, RngStream& rng,
                    bool zero_final_layer);
Tensor mlp_forward(const ParamSet& p, const std::string& prefix,
                   const Tensor& input, std::size_t n_hidden);

}  // namespace lpc

#endif  // LPC_MODELS_HPP
