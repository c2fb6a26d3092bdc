#ifndef LPC_ERRORS_HPP
#define LPC_ERRORS_HPP

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lpc {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Incompatible tensor shapes or dimension mismatches.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// NaN produced during a forward evaluation; carries the primitive name.
class NumericFault : public Error {
 public:
  NumericFault(const std::string& primitive, const std::string& what)
      : Error("numeric fault in '" + primitive + "': " + what),
        primitive_(primitive) {}
  const std::string& primitive() const { return primitive_; }

 private:
  std::string primitive_;
};

// A Langevin chain produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(int step_index, int chain_id, const std::string& what)
      : Error("chain diverged at step " + std::to_string(step_index) +
              " (chain " + std::to_string(chain_id) + "): " + what),
        step_index_(step_index),
        chain_id_(chain_id) {}
  int step_index() const { return step_index_; }
  int chain_id() const { return chain_id_; }

 private:
  int step_index_;
  int chain_id_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Non-fatal events worth counting (value floors, degenerate geometry).
// Counters are cumulative per process; tests may reset them.
struct Counters {
  std::atomic<std::uint64_t> discretized_floor_hits{0};
  std::atomic<std::uint64_t> mhat_floor_hits{0};
  std::atomic<std::uint64_t> knn_radius_floor_hits{0};
  std::atomic<std::uint64_t> pca_rank_warnings{0};

  void reset() {
    discretized_floor_hits = 0;
    mhat_floor_hits = 0;
    knn_radius_floor_hits = 0;
    pca_rank_warnings = 0;
  }
};

Counters& counters();

}  // namespace lpc

#endif  // LPC_ERRORS_HPP
