#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "retcl/data/corpus.hpp"
#include "retcl/model/encoder.hpp"

namespace retcl::data {

inline constexpr char kCheckpointMagic[4] = {'R', 'C', 'L', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::Model<float> model;
  double tau = 0.1;
  std::uint64_t seed = 0;
};

namespace detail {

class ByteWriter {
 public:
  template <std::unsigned_integral U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <std::unsigned_integral U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(DataErrc::corrupt_checkpoint,
                      "CorruptCheckpoint: " + source_ + " is truncated");
    }
  }

  const std::vector<char>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Header, then every store tensor in store order as (name, kind, rows,
// cols, row-major float32). All integers and floats little-endian.
inline std::vector<char> encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  const auto& d = ck.model.dims;
  for (const auto v : {d.d, d.layers, d.d_atom, d.d_bond, d.types}) {
    w.put(static_cast<std::uint32_t>(v));
  }
  w.put_f64(ck.tau);
  w.put(static_cast<std::uint64_t>(ck.model.store.step));
  w.put(ck.seed);
  const auto& params = ck.model.store.params();
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put(static_cast<std::uint32_t>(p.name.size()));
    w.put_bytes(p.name.data(), p.name.size());
    w.put(static_cast<std::uint8_t>(p.kind));
    w.put(static_cast<std::uint32_t>(p.value.rows()));
    w.put(static_cast<std::uint32_t>(p.value.cols()));
    for (const float v : p.value.data()) w.put_f32(v);
  }
  return w.bytes();
}

// Strict: the tensor table must name exactly the tensors of a model with the
// stored dimensions, with matching kinds and shapes.
inline Checkpoint decode_checkpoint(const std::vector<char>& bytes,
                                    const std::string& source = "checkpoint") {
  detail::ByteReader r(bytes, source);
  if (r.get_string(4) != std::string(kCheckpointMagic, 4)) {
    throw DataError(DataErrc::corrupt_checkpoint, "CorruptCheckpoint: " + source + " bad magic");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw DataError(DataErrc::version_mismatch, "checkpoint format version " + std::to_string(v) +
                                                    " is not supported (expected " +
                                                    std::to_string(kCheckpointVersion) + ")");
  }
  model::ModelDims dims;
  dims.d = r.get<std::uint32_t>();
  dims.layers = r.get<std::uint32_t>();
  dims.d_atom = r.get<std::uint32_t>();
  dims.d_bond = r.get<std::uint32_t>();
  dims.types = r.get<std::uint32_t>();
  // Bounds far above any real model keep a corrupt header from triggering a
  // huge allocation.
  for (const auto v : {dims.d, dims.layers, dims.d_atom, dims.d_bond, dims.types}) {
    if (v > (1u << 16)) {
      throw DataError(DataErrc::corrupt_checkpoint,
                      "CorruptCheckpoint: " + source + " has implausible dimensions");
    }
  }
  Checkpoint ck;
  ck.tau = r.get_f64();
  const auto step = r.get<std::uint64_t>();
  ck.seed = r.get<std::uint64_t>();
  try {
    ck.model = model::init_params<float>(0, dims);
  } catch (const std::invalid_argument& e) {
    throw DataError(DataErrc::corrupt_checkpoint, "CorruptCheckpoint: " + source + ": " + e.what());
  }
  ck.model.store.step = step;
  const auto count = r.get<std::uint32_t>();
  std::set<std::string> filled;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.get_string(r.get<std::uint32_t>());
    const auto kind = r.get<std::uint8_t>();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto id = ck.model.store.find(name);
    if (!id) throw DataError(DataErrc::unknown_tensor, "unknown tensor in checkpoint: " + name);
    if (!filled.insert(name).second) {
      throw DataError(DataErrc::corrupt_checkpoint, "CorruptCheckpoint: tensor repeated: " + name);
    }
    auto& t = ck.model.store.value(*id);
    const auto want_kind = static_cast<std::uint8_t>(ck.model.store[*id].kind);
    if (want_kind != kind || t.rows() != rows || t.cols() != cols) {
      throw DataError(DataErrc::shape_mismatch,
                      "tensor " + name + " has shape " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", expected " + std::to_string(t.rows()) + "x" +
                          std::to_string(t.cols()));
    }
    for (auto& v : t.data()) v = r.get_f32();
  }
  if (filled.size() != ck.model.store.size()) {
    for (const auto& p : ck.model.store.params()) {
      if (!filled.count(p.name)) {
        throw DataError(DataErrc::missing_tensor, "checkpoint lacks tensor " + p.name);
      }
    }
  }
  if (!r.at_end()) {
    throw DataError(DataErrc::corrupt_checkpoint, "CorruptCheckpoint: trailing bytes in " + source);
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrc::io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrc::io, "write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrc::io, "cannot open " + path);
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path);
}

}  // namespace retcl::data
