#ifndef LPC_DATASET_HPP
#define LPC_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpc/mat.hpp"
#include "lpc/rng.hpp"

namespace lpc {

enum class DatasetKind {
  kGaussianMixture,
  kPinwheel,
  kTwoMoons,
  kLinearGaussian,
  kIdxImages,
};

enum class Normalization { kNone, kStandardize, kPixelGrid };

struct DatasetSpec {
  DatasetKind kind{DatasetKind::kGaussianMixture};
  std::int64_t size{512};
  std::uint64_t seed{1};
  Normalization normalize{Normalization::kNone};

  // gaussian-mixture
  std::int64_t components{8};
  double radius{4.0};
  double noise{0.3};  // also the noise level of pinwheel/two-moons

  // linear-gaussian ground truth dimensions
  std::int64_t latent_dim{2};
  std::int64_t obs_dim{4};
  double sigma{0.5};

  // idx-images
  std::string path;
};

// Ground truth of a generated linear-Gaussian dataset, for oracle tests.
struct LinearGaussianTruth {
  Mat w;  // (latent_dim, obs_dim)
  std::vector<double> b;
  double sigma{0.0};
};

struct Dataset {
  Mat x;  // (N, obs_dim)
  // Image geometry when loaded from IDX files (0 otherwise).
  std::int64_t image_rows{0};
  std::int64_t image_cols{0};
  std::optional<LinearGaussianTruth> truth;

  std::int64_t size() const { return x.rows; }
  std::int64_t obs_dim() const { return x.cols; }
  Mat rows(const std::vector<std::size_t>& idx) const;
  // Contiguous row range [begin, end).
  Mat slice(std::int64_t begin, std::int64_t end) const;
};

// Deterministic in the spec's seed. Throws IoError for missing/malformed
// IDX files and Error for empty results.
Dataset load_dataset(const DatasetSpec& spec);

// Raw IDX (big-endian) unsigned-byte tensor reader; images are flattened
// row-major and scaled to the {0, 1/255, ..., 1} grid. Malformed headers
// are reported with byte offsets.
Dataset load_idx_images(const std::string& path);

// Batch index plan for one epoch: a seeded shuffle chopped into
// ceil(N / batch_size) batches (last one possibly short).
std::vector<std::vector<std::size_t>> epoch_batches(std::int64_t n,
                                                    std::int64_t batch_size,
                                                    RngStream rng);

}  // namespace lpc

#endif  // LPC_DATASET_HPP
