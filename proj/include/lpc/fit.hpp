#ifndef LPC_FIT_HPP
#define LPC_FIT_HPP

#include <string>
#include <vector>

#include "lpc/checkpoint.hpp"
#include "lpc/config.hpp"
#include "lpc/dataset.hpp"
#include "lpc/eval.hpp"

namespace lpc {

struct EvalRecord {
  std::int64_t epoch{0};
  std::int64_t step{0};
  double mmd{0.0};
  double density{0.0};
  double coverage{0.0};
};

struct StepRecord {
  double elbo{0.0};
  double logp_mean{0.0};
  double grad_norm_theta{0.0};
  double grad_norm_phi{0.0};
  // Batch-mean gradient norm at the chain's initial state (zero for VAE
  // steps, which run no chain).
  double z0_grad_norm{0.0};
};

struct FitResult {
  GenerativeModel gen;
  WarmStartModel warm;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  bool diverged{false};
  std::int64_t diverged_at_step{-1};
  std::int64_t steps_done{0};
  std::string checkpoint_path;
  std::string metrics_path;
  std::string eval_path;
};

// Full training run: seeded epoch shuffles, per-batch derived RNG streams,
// metric logging, periodic evaluation, per-epoch checkpoints. All
// randomness is derived from (seed, epoch, batch) indices, so resuming
// from a checkpoint reproduces the uninterrupted run bit-exactly.
// Divergence stops the run, leaves the last consistent parameters in the
// final checkpoint and flags the result instead of throwing.
FitResult fit(const Dataset& data, const ExperimentConfig& cfg,
              const std::string& out_dir, const std::string& resume_from = "");

// Checkpoint (de)serialization of a full training state. The checkpoint
// also carries enough model metadata to rebuild both models without the
// original config.
Checkpoint make_training_checkpoint(const GenerativeModel& gen,
                                    const WarmStartModel& warm,
                                    const AdamState& opt_theta,
                                    const AdamState& opt_phi,
                                    std::int64_t epochs_done,
                                    std::int64_t global_batch,
                                    std::int64_t image_rows,
                                    std::int64_t image_cols);
GenerativeModel generative_model_from_checkpoint(const Checkpoint& ckpt);
WarmStartModel warm_start_model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace lpc

#endif  // LPC_FIT_HPP
