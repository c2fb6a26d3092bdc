#ifndef LPC_CHECKPOINT_HPP
#define LPC_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "lpc/param_set.hpp"
#include "lpc/tensor.hpp"

namespace lpc {

// Single-file checkpoint: magic "LPCCKPT1", a manifest of (name, shape,
// byte offset) entries, then raw little-endian float64 blocks. Round-trips
// bit-exactly.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

class Checkpoint {
 public:
  void add(const std::string& name, const Shape& shape,
           std::vector<double> data);
  void add_scalar(const std::string& name, double v);
  // Adds every parameter under "<prefix>.<param name>".
  void add_param_set(const std::string& prefix, const ParamSet& params);

  bool has(const std::string& name) const;
  const CheckpointEntry& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  // Extracts entries under the prefix back into an existing ParamSet
  // (shapes must match).
  void load_param_set(const std::string& prefix, ParamSet& params) const;

  const std::vector<CheckpointEntry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<CheckpointEntry> entries_;
};

}  // namespace lpc

#endif  // LPC_CHECKPOINT_HPP
