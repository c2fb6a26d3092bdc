#include "lpc/rng.hpp"

#include <cmath>
#include <numbers>

namespace lpc {

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1) so log() never sees zero.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

void RngStream::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

void RngStream::fill_uniform(std::span<double> out, double lo, double hi) {
  for (double& v : out) v = uniform(lo, hi);
}

void RngStream::shuffle(std::vector<std::size_t>& idx) {
  if (idx.empty()) return;
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(next_u64() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
}

}  // namespace lpc
