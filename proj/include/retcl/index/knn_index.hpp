#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "retcl/chem/features.hpp"
#include "retcl/model/encoder.hpp"
#include "retcl/model/scoring.hpp"
#include "retcl/tensor/tensor.hpp"
#include "retcl/util/parallel.hpp"

namespace retcl::index {

using model::MolId;
using model::kHaltId;
using tensor::Tensor;

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hit {
  MolId id;
  float score;  // cosine similarity
  friend bool operator==(const Hit&, const Hit&) = default;
};

// Descending score, then ascending id.
inline bool hit_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

namespace detail {

// q . row with a single sequential accumulator per row. Four rows are
// interleaved so the additions overlap without changing any row's order.
inline void dot_rows(std::span<const float> q, const float* rows, std::size_t count,
                     std::size_t d, float* out) {
  std::size_t r = 0;
  for (; r + 4 <= count; r += 4) {
    const float* a = rows + r * d;
    float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
    for (std::size_t k = 0; k < d; ++k) {
      const float x = q[k];
      s0 += x * a[k];
      s1 += x * a[d + k];
      s2 += x * a[2 * d + k];
      s3 += x * a[3 * d + k];
    }
    out[r] = s0;
    out[r + 1] = s1;
    out[r + 2] = s2;
    out[r + 3] = s3;
  }
  for (; r < count; ++r) {
    const float* a = rows + r * d;
    float s = 0.f;
    for (std::size_t k = 0; k < d; ++k) s += q[k] * a[k];
    out[r] = s;
  }
}

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_le(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw IndexError("index cache truncated");
  }
  return v;
}

}  // namespace detail

// Immutable matrix of unit-normalized keys with their molecule ids.
class CandidateIndex {
 public:
  static constexpr std::uint32_t kCacheVersion = 1;

  // Rows are normalized here; zero rows stay zero.
  CandidateIndex(Tensor<float> keys, std::vector<MolId> ids, bool includes_halt,
                 std::uint64_t build_step = 0)
      : keys_(std::move(keys)), ids_(std::move(ids)), includes_halt_(includes_halt),
        build_step_(build_step) {
    if (keys_.rows() != ids_.size()) throw IndexError("key rows do not match id count");
    model::normalize_rows_inplace(keys_);
    row_of_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!row_of_.emplace(ids_[i], i).second) throw IndexError("duplicate id in index");
    }
    if (includes_halt_ && (ids_.empty() || ids_.back() != kHaltId)) {
      throw IndexError("halt row must be the last row");
    }
  }

  // Embeds the candidates with the h head in eval mode, optionally appending
  // the halt key as a final virtual row.
  template <class T>
  static CandidateIndex build(const model::Model<T>& m,
                              std::span<const chem::FeatureBundle* const> feats,
                              std::vector<MolId> ids, bool include_halt,
                              std::uint64_t build_step = 0) {
    if (feats.size() != ids.size()) throw IndexError("feature and id counts differ");
    const auto h = model::embed_molecules(m, feats, model::Head::h);
    Tensor<float> keys(h.rows() + (include_halt ? 1 : 0), m.dims.d);
    for (std::size_t i = 0; i < h.size(); ++i) keys.data()[i] = static_cast<float>(h.data()[i]);
    if (include_halt) {
      const auto& hk = m.halt_key();
      for (std::size_t j = 0; j < m.dims.d; ++j) keys(h.rows(), j) = static_cast<float>(hk(0, j));
      ids.push_back(kHaltId);
    }
    return CandidateIndex(std::move(keys), std::move(ids), include_halt, build_step);
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return keys_.cols(); }
  bool includes_halt() const { return includes_halt_; }
  std::uint64_t build_step() const { return build_step_; }
  const Tensor<float>& keys() const { return keys_; }
  const std::vector<MolId>& ids() const { return ids_; }
  std::optional<std::size_t> row_of(MolId id) const {
    const auto it = row_of_.find(id);
    if (it == row_of_.end()) return std::nullopt;
    return it->second;
  }

  // Raw dot products of the query with every row.
  std::vector<float> dots(std::span<const float> query) const {
    if (query.size() != dim()) throw IndexError("query width does not match index");
    std::vector<float> out(size());
    detail::dot_rows(query, keys_.data().data(), size(), dim(), out.data());
    return out;
  }

  // The K best rows by cosine, excluding the given ids. Ranking uses the raw
  // dot product, which orders rows exactly as the cosine does.
  std::vector<Hit> query_topk(std::span<const float> query, std::size_t k,
                              std::span<const MolId> exclude = {}) const {
    if (k == 0) return {};
    auto d = dots(query);
    std::vector<bool> skip(size(), false);
    for (const auto id : exclude) {
      if (auto r = row_of(id)) skip[*r] = true;
    }
    std::vector<Hit> hits;
    hits.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      if (!skip[i]) hits.push_back({ids_[i], d[i]});
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + keep, hits.end(), hit_before);
    hits.resize(keep);
    double sq = 0.0;
    for (const float v : query) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    for (auto& h : hits) h.score = norm < 1e-12 ? 0.f : static_cast<float>(h.score / norm);
    return hits;
  }

  // Several queries, rows of `queries`, in parallel; results in input order.
  std::vector<std::vector<Hit>> query_batch(const Tensor<float>& queries, std::size_t k,
                                            const std::vector<std::vector<MolId>>& excludes,
                                            std::size_t threads = 1) const {
    std::vector<std::vector<Hit>> out(queries.rows());
    util::parallel_for(queries.rows(), threads, [&](std::size_t i) {
      out[i] = query_topk(queries.row(i), k,
                          i < excludes.size() ? std::span<const MolId>(excludes[i])
                                              : std::span<const MolId>());
    });
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IndexError("cannot write " + path);
    os.write("RCLX", 4);
    detail::put_le<std::uint32_t>(os, kCacheVersion);
    detail::put_le<std::uint64_t>(os, size());
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(dim()));
    detail::put_le<std::uint8_t>(os, includes_halt_ ? 1 : 0);
    for (const auto id : ids_) detail::put_le<std::uint64_t>(os, id);
    for (const float v : keys_.data()) detail::put_le<float>(os, v);
    if (!os) throw IndexError("write failed for " + path);
  }

  static CandidateIndex load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IndexError("cannot read " + path);
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "RCLX") {
      throw IndexError("not an index cache: " + path);
    }
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kCacheVersion) {
      throw IndexError("unsupported index cache version " + std::to_string(version));
    }
    const auto n = detail::get_le<std::uint64_t>(is);
    const auto d = detail::get_le<std::uint32_t>(is);
    const bool halt = detail::get_le<std::uint8_t>(is) != 0;
    std::vector<MolId> ids(n);
    for (auto& id : ids) id = detail::get_le<std::uint64_t>(is);
    Tensor<float> keys(n, d);
    for (auto& v : keys.data()) v = detail::get_le<float>(is);
    if (is.peek() != std::char_traits<char>::eof()) throw IndexError("trailing bytes in " + path);
    // Stored rows are already unit length; renormalizing a unit row can move
    // the last bit, so restore them verbatim.
    CandidateIndex out(Tensor<float>(n, d), std::move(ids), halt);
    out.keys_ = std::move(keys);
    return out;
  }

 private:
  Tensor<float> keys_;
  std::vector<MolId> ids_;
  std::unordered_map<MolId, std::size_t> row_of_;
  bool includes_halt_;
  std::uint64_t build_step_;
};

// Union over anchors of their K nearest rows, each anchor excluding itself.
// Anchors are given by id and key vector (row i of `anchor_keys`), so they
// need not be rows of the index. The result is sorted.
inline std::vector<MolId> hard_neighbors(const CandidateIndex& index,
                                         std::span<const MolId> anchor_ids,
                                         const Tensor<float>& anchor_keys, std::size_t k,
                                         std::size_t threads = 1) {
  if (k == 0 || anchor_ids.empty()) return {};
  std::vector<std::vector<MolId>> excl;
  for (const auto id : anchor_ids) excl.push_back({id, kHaltId});
  const auto hits = index.query_batch(anchor_keys, k, excl, threads);
  std::vector<MolId> out;
  for (const auto& list : hits) {
    for (const auto& h : list) out.push_back(h.id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Holds the current snapshot. Readers keep whatever snapshot they fetched
// alive through the shared pointer while a newer one is published.
class IndexHandle {
 public:
  std::shared_ptr<const CandidateIndex> current() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  void publish(std::shared_ptr<const CandidateIndex> next) {
    std::lock_guard lock(mu_);
    if (current_ && next->build_step() <= current_->build_step()) {
      throw IndexError("index build step must increase");
    }
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const CandidateIndex> current_;
};

// Rebuilds from the current parameters and publishes the new snapshot.
template <class T>
std::shared_ptr<const CandidateIndex> refresh(IndexHandle& handle, const model::Model<T>& m,
                                              std::span<const chem::FeatureBundle* const> feats,
                                              std::vector<MolId> ids, bool include_halt,
                                              std::uint64_t step) {
  auto next = std::make_shared<const CandidateIndex>(
      CandidateIndex::build(m, feats, std::move(ids), include_halt, step));
  handle.publish(next);
  return next;
}

}  // namespace retcl::index
