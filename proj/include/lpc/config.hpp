#ifndef LPC_CONFIG_HPP
#define LPC_CONFIG_HPP

#include <string>

#include "lpc/dataset.hpp"
#include "lpc/models.hpp"
#include "lpc/trainer.hpp"

namespace lpc {

struct ModelConfig {
  std::int64_t latent_dim{2};
  std::vector<std::int64_t> hidden{64, 64};
  Likelihood likelihood{Likelihood::kDiagonalGaussian};
  double prior_variance{1.0};
  DecoderScaleMode scale_mode{DecoderScaleMode::kLearnedGlobal};
  double fixed_scale{1.0};
};

struct EvalConfig {
  std::int64_t every{1};    // epochs between metric evaluations; 0 disables
  std::int64_t samples{512};
  std::int64_t knn_k{5};
  double mmd_bandwidth{0.0};  // 0 selects the median heuristic
  double holdout{0.0};        // trailing fraction of the dataset held out
};

// Full experiment description; round-trips losslessly through the
// line-oriented config format.
struct ExperimentConfig {
  std::string name{"run"};
  std::string out_dir{"runs/run"};
  std::uint64_t seed{1};
  DatasetSpec dataset;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Model builders tied to a dataset's observation dimension.
GenerativeModel make_generative_model(const ModelConfig& mc,
                                      std::int64_t obs_dim,
                                      std::uint64_t seed);
WarmStartModel make_warm_start_model(const ModelConfig& mc,
                                     std::int64_t obs_dim,
                                     std::uint64_t seed);

// Enum <-> string names used by both the config format and CSV echoes.
std::string to_string(DatasetKind k);
std::string to_string(Normalization n);
std::string to_string(Likelihood l);
std::string to_string(DecoderScaleMode m);
std::string to_string(Algo a);
std::string to_string(Objective o);
std::string to_string(NoiseCovariance n);

}  // namespace lpc

#endif  // LPC_CONFIG_HPP
