#include "lpc/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

Dataset gaussian_mixture(const DatasetSpec& spec) {
  if (spec.components < 1) throw Error("gaussian-mixture: components >= 1");
  RngStream rng = RngStream(spec.seed).derive(rng_tag::kDataGen);
  Dataset d;
  d.x = Mat(spec.size, 2);
  for (std::int64_t i = 0; i < spec.size; ++i) {
    std::int64_t comp = static_cast<std::int64_t>(
        rng.next_u64() % static_cast<std::uint64_t>(spec.components));
    double angle = 2.0 * std::numbers::pi * static_cast<double>(comp) /
                   static_cast<double>(spec.components);
    d.x.at(i, 0) = spec.radius * std::cos(angle) + spec.noise * rng.normal();
    d.x.at(i, 1) = spec.radius * std::sin(angle) + spec.noise * rng.normal();
  }
  return d;
}

Dataset pinwheel(const DatasetSpec& spec) {
  const std::int64_t arms = std::max<std::int64_t>(spec.components, 1);
  RngStream rng = RngStream(spec.seed).derive(rng_tag::kDataGen);
  Dataset d;
  d.x = Mat(spec.size, 2);
  const double radial_std = 0.3;
  const double tangential_std = std::max(spec.noise, 1e-3);
  const double rate = 0.25;
  for (std::int64_t i = 0; i < spec.size; ++i) {
    std::int64_t arm = static_cast<std::int64_t>(
        rng.next_u64() % static_cast<std::uint64_t>(arms));
    double base_angle = 2.0 * std::numbers::pi * static_cast<double>(arm) /
                        static_cast<double>(arms);
    double r = 1.0 + radial_std * rng.normal();
    double t = tangential_std * rng.normal();
    double angle = base_angle + rate * std::exp(r);
    d.x.at(i, 0) = r * std::cos(angle) - t * std::sin(angle);
    d.x.at(i, 1) = r * std::sin(angle) + t * std::cos(angle);
  }
  return d;
}

Dataset two_moons(const DatasetSpec& spec) {
  RngStream rng = RngStream(spec.seed).derive(rng_tag::kDataGen);
  Dataset d;
  d.x = Mat(spec.size, 2);
  for (std::int64_t i = 0; i < spec.size; ++i) {
    bool outer = (rng.next_u64() & 1) == 0;
    double t = std::numbers::pi * rng.uniform();
    double cx, cy;
    if (outer) {
      cx = std::cos(t);
      cy = std::sin(t);
    } else {
      cx = 1.0 - std::cos(t);
      cy = 0.5 - std::sin(t);
    }
    d.x.at(i, 0) = cx + spec.noise * rng.normal();
    d.x.at(i, 1) = cy + spec.noise * rng.normal();
  }
  return d;
}

Dataset linear_gaussian(const DatasetSpec& spec) {
  RngStream rng = RngStream(spec.seed).derive(rng_tag::kDataGen);
  LinearGaussianTruth truth;
  truth.w = Mat(spec.latent_dim, spec.obs_dim);
  RngStream wr = rng.derive(0);
  double scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  for (auto& v : truth.w.a) v = scale * wr.normal();
  truth.b.assign(static_cast<std::size_t>(spec.obs_dim), 0.0);
  for (auto& v : truth.b) v = 0.5 * wr.normal();
  truth.sigma = spec.sigma;

  Dataset d;
  d.x = Mat(spec.size, spec.obs_dim);
  RngStream xr = rng.derive(1);
  for (std::int64_t i = 0; i < spec.size; ++i) {
    std::vector<double> z(static_cast<std::size_t>(spec.latent_dim));
    xr.fill_normal(z);
    for (std::int64_t j = 0; j < spec.obs_dim; ++j) {
      double mean = truth.b[static_cast<std::size_t>(j)];
      for (std::int64_t k = 0; k < spec.latent_dim; ++k) {
        mean += z[static_cast<std::size_t>(k)] * truth.w.at(k, j);
      }
      d.x.at(i, j) = mean + spec.sigma * xr.normal();
    }
  }
  d.truth = truth;
  return d;
}

void standardize(Mat& x) {
  for (std::int64_t j = 0; j < x.cols; ++j) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < x.rows; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::int64_t i = 0; i < x.rows; ++i) {
      double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(x.rows);
    double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::int64_t i = 0; i < x.rows; ++i) {
      x.at(i, j) = (x.at(i, j) - mean) / sd;
    }
  }
}

void snap_to_pixel_grid(Mat& x) {
  for (auto& v : x.a) {
    v = std::round(std::min(std::max(v, 0.0), 1.0) * 255.0) / 255.0;
  }
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path,
                          std::size_t offset) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("idx '" + path + "': truncated header at byte offset " +
                  std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Mat Dataset::rows(const std::vector<std::size_t>& idx) const {
  Mat out(static_cast<std::int64_t>(idx.size()), x.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::int64_t j = 0; j < x.cols; ++j) {
      out.at(static_cast<std::int64_t>(r), j) =
          x.at(static_cast<std::int64_t>(idx[r]), j);
    }
  }
  return out;
}

Mat Dataset::slice(std::int64_t begin, std::int64_t end) const {
  Mat out(end - begin, x.cols);
  for (std::int64_t r = begin; r < end; ++r) {
    for (std::int64_t j = 0; j < x.cols; ++j) out.at(r - begin, j) = x.at(r, j);
  }
  return out;
}

Dataset load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open '" + path + "'");
  std::uint32_t magic = read_be_u32(in, path, 0);
  // 0x0000 08 NN: unsigned byte data with NN dimensions
  if ((magic & 0xFFFFFF00u) != 0x00000800u) {
    throw IoError("idx '" + path + "': bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08X", magic);
      return std::string(buf);
    }() + " at byte offset 0");
  }
  std::uint32_t ndims = magic & 0xFFu;
  if (ndims < 1 || ndims > 3) {
    throw IoError("idx '" + path + "': unsupported dimension count " +
                  std::to_string(ndims) + " at byte offset 3");
  }
  std::vector<std::uint32_t> dims(ndims);
  for (std::uint32_t i = 0; i < ndims; ++i) {
    dims[i] = read_be_u32(in, path, 4 + 4 * i);
  }
  std::int64_t count = dims[0];
  std::int64_t per_item = 1;
  for (std::uint32_t i = 1; i < ndims; ++i) per_item *= dims[i];
  if (count == 0) throw Error("idx '" + path + "': empty dataset");

  Dataset d;
  if (ndims == 3) {
    d.image_rows = dims[1];
    d.image_cols = dims[2];
  }
  d.x = Mat(count, per_item);
  std::vector<unsigned char> row(static_cast<std::size_t>(per_item));
  for (std::int64_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size()))) {
      throw IoError("idx '" + path + "': truncated data for item " +
                    std::to_string(i) + " at byte offset " +
                    std::to_string(4 + 4 * ndims + i * per_item));
    }
    for (std::int64_t j = 0; j < per_item; ++j) {
      d.x.at(i, j) = static_cast<double>(row[static_cast<std::size_t>(j)]) /
                     255.0;
    }
  }
  return d;
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::kIdxImages && spec.size < 1) {
    throw Error("dataset: empty dataset requested (size = " +
                std::to_string(spec.size) + ")");
  }
  Dataset d;
  switch (spec.kind) {
    case DatasetKind::kGaussianMixture:
      d = gaussian_mixture(spec);
      break;
    case DatasetKind::kPinwheel:
      d = pinwheel(spec);
      break;
    case DatasetKind::kTwoMoons:
      d = two_moons(spec);
      break;
    case DatasetKind::kLinearGaussian:
      d = linear_gaussian(spec);
      break;
    case DatasetKind::kIdxImages: {
      d = load_idx_images(spec.path);
      if (spec.size > 0 && spec.size < d.x.rows) {
        d.x = d.slice(0, spec.size);
      }
      break;
    }
  }
  if (d.x.rows == 0) throw Error("dataset: empty dataset");
  switch (spec.normalize) {
    case Normalization::kNone:
      break;
    case Normalization::kStandardize:
      standardize(d.x);
      break;
    case Normalization::kPixelGrid:
      snap_to_pixel_grid(d.x);
      break;
  }
  return d;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::int64_t n,
                                                    std::int64_t batch_size,
                                                    RngStream rng) {
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    std::int64_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace lpc
