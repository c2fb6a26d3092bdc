#include "lpc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lpc/errors.hpp"

namespace lpc {

namespace {

constexpr char kMagic[8] = {'L', 'P', 'C', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("checkpoint '" + path + "': truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw IoError("checkpoint '" + path + "': truncated header");
  }
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "raw float64 blocks are written little-endian");

}  // namespace

void Checkpoint::add(const std::string& name, const Shape& shape,
                     std::vector<double> data) {
  if (has(name)) throw Error("checkpoint: duplicate entry '" + name + "'");
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw ShapeError("checkpoint: data length mismatch for '" + name + "'");
  }
  entries_.push_back({name, shape, std::move(data)});
}

void Checkpoint::add_scalar(const std::string& name, double v) {
  add(name, {}, {v});
}

void Checkpoint::add_param_set(const std::string& prefix,
                               const ParamSet& params) {
  for (const auto& [name, t] : params) {
    add(prefix + "." + name, t.shape(), t.data());
  }
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const CheckpointEntry& Checkpoint::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw Error("checkpoint: missing entry '" + name + "'");
}

double Checkpoint::get_scalar(const std::string& name) const {
  const auto& e = get(name);
  if (e.data.size() != 1) {
    throw Error("checkpoint: entry '" + name + "' is not a scalar");
  }
  return e.data[0];
}

void Checkpoint::load_param_set(const std::string& prefix,
                                ParamSet& params) const {
  for (auto& [name, t] : params) {
    const auto& e = get(prefix + "." + name);
    if (e.shape != t.shape()) {
      throw ShapeError("checkpoint: shape mismatch for '" + prefix + "." +
                       name + "'");
    }
    t.mutable_data() = e.data;
  }
}

void Checkpoint::save(const std::string& path) const {
  // Manifest size must be known before offsets can be assigned; lay the
  // header out in a buffer first.
  std::string header(kMagic, sizeof(kMagic));
  put_u64(header, entries_.size());
  std::size_t manifest_bytes = 0;
  for (const auto& e : entries_) {
    manifest_bytes += 4 + e.name.size() + 4 + 8 * e.shape.size() + 8;
  }
  std::uint64_t offset = header.size() + manifest_bytes;
  for (const auto& e : entries_) {
    put_u32(header, static_cast<std::uint32_t>(e.name.size()));
    header.append(e.name);
    put_u32(header, static_cast<std::uint32_t>(e.shape.size()));
    for (std::int64_t d : e.shape) put_u64(header, static_cast<std::uint64_t>(d));
    put_u64(header, offset);
    offset += 8 * e.data.size();
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open '" + path + "' for write");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& e : entries_) {
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(8 * e.data.size()));
  }
  if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("checkpoint '" + path + "': bad magic");
  }
  std::uint64_t count = read_u64(in, path);
  struct RawEntry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<RawEntry> raw;
  raw.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw IoError("checkpoint '" + path + "': truncated name");
    }
    std::uint32_t ndim = read_u32(in, path);
    Shape shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::int64_t>(read_u64(in, path));
    }
    std::uint64_t offset = read_u64(in, path);
    raw.push_back({std::move(name), std::move(shape), offset});
  }
  Checkpoint ckpt;
  for (auto& r : raw) {
    std::size_t n = static_cast<std::size_t>(shape_numel(r.shape));
    std::vector<double> data(n);
    in.seekg(static_cast<std::streamoff>(r.offset));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(8 * n))) {
      throw IoError("checkpoint '" + path + "': truncated data for '" +
                    r.name + "' at offset " + std::to_string(r.offset));
    }
    ckpt.add(r.name, r.shape, std::move(data));
  }
  return ckpt;
}

}  // namespace lpc
