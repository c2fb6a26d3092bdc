#ifndef LPC_SAMPLER_HPP
#define LPC_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lpc/errors.hpp"
#include "lpc/mat.hpp"
#include "lpc/models.hpp"
#include "lpc/rng.hpp"

namespace lpc {

// Which covariance the injected noise follows under preconditioning. The
// update drift is always gamma * g / mhat; kInverseMhat scales the noise
// variance by 2*gamma/mhat (matching a diffusion preconditioned on both
// drift and noise), kMhat by 2*gamma*mhat.
enum class NoiseCovariance { kInverseMhat, kMhat };

struct SamplerConfig {
  double step_size{0.01};      // gamma
  std::int64_t steps{300};     // T
  bool precond_enabled{false};
  double precond_decay{0.99};  // beta
  NoiseCovariance noise_cov{NoiseCovariance::kInverseMhat};
  // 1 for Langevin sampling; 0 recovers deterministic gradient-ascent
  // inference.
  double noise_scale{1.0};
  // Diagnostic: forces mhat to all-ones so the preconditioned path can be
  // compared against the plain one.
  bool force_unit_mhat{false};

  void validate() const;
};

// Mutable state of a batch of chains: one latent row and one second-moment
// row per chain, plus the number of completed steps.
struct ChainState {
  Mat z;          // (B, d)
  Mat m;          // (B, d), second-moment EMA, elementwise >= 0
  std::int64_t t{0};

  static ChainState init(const Mat& z0) {
    ChainState s;
    s.z = z0;
    s.m = Mat(z0.rows, z0.cols, 0.0);
    return s;
  }
};

// Per-step, per-chain diagnostics recorded at the point where each step's
// gradient was evaluated (the pre-step iterate). delta_logp[0] is zero by
// definition; later entries are successive differences of logp.
struct StepTrace {
  std::vector<std::vector<double>> logp;
  std::vector<std::vector<double>> delta_logp;
  std::vector<std::vector<double>> grad_norm;

  std::int64_t steps() const { return static_cast<std::int64_t>(logp.size()); }
  std::int64_t chains() const {
    return logp.empty() ? 0 : static_cast<std::int64_t>(logp[0].size());
  }
  void append(const std::vector<double>& lp, const std::vector<double>& gn);
};

// Chain divergence with the diagnostics gathered so far attached.
class ChainDivergenceError : public DivergenceError {
 public:
  ChainDivergenceError(int step_index, int chain_id, StepTrace partial)
      : DivergenceError(step_index, chain_id, "non-finite latent state"),
        partial_trace(std::move(partial)) {}
  StepTrace partial_trace;
};

// Advances the state by one Langevin update given the drift gradient g.
// Noise is drawn per chain from rng.derive(state.t).derive(chain), so the
// draw for (step, chain) is a pure function of the stream and the step
// index. Exactly d standard normals are consumed per chain whether or not
// preconditioning is enabled, which keeps configurations comparable under
// a shared seed.
ChainState apply_langevin_update(const ChainState& state, const Mat& g,
                                 const SamplerConfig& cfg,
                                 const RngStream& rng);

// One step under an arbitrary configuration: a single gradient evaluation
// followed by apply_langevin_update. Throws ChainDivergenceError (with an
// empty trace) if the new state is not finite.
ChainState langevin_step(const GenerativeModel& model, const Mat& x,
                         const ChainState& state, const SamplerConfig& cfg,
                         const RngStream& rng);

// One unadjusted Langevin step at unit noise scale.
ChainState ula_step(const GenerativeModel& model, const Mat& x,
                    const ChainState& state, double step_size,
                    const RngStream& rng);

// Adam-style preconditioned variant (bias-corrected second-moment EMA).
ChainState precond_ula_step(const GenerativeModel& model, const Mat& x,
                            const ChainState& state, double step_size,
                            double precond_decay, const RngStream& rng);

struct ChainResult {
  std::vector<Mat> samples;  // z^(1..T)
  StepTrace trace;           // recorded at z^(0..T-1)
};

// Runs T steps from z0. Exactly T gradient evaluations; returns all T
// post-initialization states in order plus the trace.
ChainResult run_chain(const GenerativeModel& model, const Mat& x,
                      const Mat& z0, const SamplerConfig& cfg,
                      const RngStream& rng);

// Trace export: columns step, logp, delta_logp, grad_norm, chain_id.
void write_trace_csv(const std::string& path, const StepTrace& trace);

}  // namespace lpc

#endif  // LPC_SAMPLER_HPP
