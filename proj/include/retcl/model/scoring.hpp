#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "retcl/tensor/tensor.hpp"

namespace retcl::model {

using MolId = std::uint64_t;

inline constexpr MolId kHaltId = std::numeric_limits<MolId>::max();

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The three head embeddings of one molecule, in double for scoring.
struct Embeddings {
  std::vector<double> f, g, h;
};

// Shared parts of every score: the halt key and the optional type biases.
struct ScoreContext {
  std::span<const double> halt_key;
  std::span<const double> u;  // empty when no type is given
  std::span<const double> v;
};

struct QueryVector {
  std::vector<double> vector;
  MolId product = 0;
  std::vector<MolId> given;
};

inline QueryVector make_query(MolId product, std::span<const double> f_product,
                              std::span<const double> u = {}) {
  QueryVector q{{f_product.begin(), f_product.end()}, product, {}};
  if (!u.empty()) {
    for (std::size_t i = 0; i < q.vector.size(); ++i) q.vector[i] += u[i];
  }
  return q;
}

inline void subtract_reactant(QueryVector& q, MolId id, std::span<const double> g) {
  for (std::size_t i = 0; i < q.vector.size(); ++i) q.vector[i] -= g[i];
  q.given.push_back(id);
}

inline double psi(const QueryVector& q, std::span<const double> key) {
  return tensor::cosine(std::span<const double>(q.vector), key);
}

// Cosine of (sum of reactant g embeddings + v) with h(P). The sum runs in
// the given order; callers that need bitwise order invariance pass a
// canonical order.
inline double phi(std::span<const std::span<const double>> reactant_g,
                  std::span<const double> product_h, std::span<const double> v = {}) {
  std::vector<double> acc(product_h.size(), 0.0);
  for (const auto g : reactant_g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  if (!v.empty()) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  return tensor::cosine(std::span<const double>(acc), product_h);
}

struct ReactantRef {
  MolId id;
  const Embeddings* emb;
};

struct BestOrder {
  std::vector<MolId> order;
  double psi_sum = 0.0;
};

struct ScoredSet {
  std::vector<MolId> reactants;  // ascending ids
  double score = 0.0;
  std::vector<MolId> best_order;
  double psi_sum = 0.0;
  double phi = 0.0;
};

namespace detail {

// Query for a given subset, always accumulated in ascending-id order so the
// value depends only on the subset.
inline std::vector<double> subset_query(const Embeddings& product, const ScoreContext& ctx,
                                        std::span<const ReactantRef> sorted, std::uint32_t mask) {
  auto q = make_query(0, product.f, ctx.u);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (mask & (1u << i)) subtract_reactant(q, sorted[i].id, sorted[i].emb->g);
  }
  return std::move(q.vector);
}

inline std::vector<ReactantRef> sorted_refs(std::span<const ReactantRef> reactants) {
  std::vector<ReactantRef> s(reactants.begin(), reactants.end());
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].id == s[i - 1].id) throw ScoringError("duplicate reactant id");
  }
  return s;
}

}  // namespace detail

// Maximizes the summed psi over selection orders, halt always last.
// Exhaustive up to `exhaustive_limit` reactants, greedy beyond. Ties keep the
// order that is lexicographically smallest in candidate ids.
inline BestOrder best_permutation(const Embeddings& product, std::span<const ReactantRef> reactants,
                                  const ScoreContext& ctx, std::size_t exhaustive_limit = 5) {
  const auto sorted = detail::sorted_refs(reactants);
  const auto n = sorted.size();
  const std::uint32_t full = n >= 32 ? ~0u : (1u << n) - 1u;
  BestOrder best;
  if (n <= exhaustive_limit && n <= 16) {
    // psi of item i given subset S, memoized over all subsets.
    std::vector<std::vector<double>> step(std::size_t{1} << n, std::vector<double>(n, 0.0));
    double halt = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      const auto q = detail::subset_query(product, ctx, sorted, mask);
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) continue;
        step[mask][i] = tensor::cosine(std::span<const double>(q),
                                       std::span<const double>(sorted[i].emb->h));
      }
      if (mask == full) {
        halt = tensor::cosine(std::span<const double>(q), ctx.halt_key);
      }
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    bool first = true;
    do {
      double total = 0.0;
      std::uint32_t mask = 0;
      for (const auto i : perm) {
        total += step[mask][i];
        mask |= 1u << i;
      }
      total += halt;
      if (first || total > best.psi_sum) {
        best.psi_sum = total;
        best.order.clear();
        for (const auto i : perm) best.order.push_back(sorted[i].id);
        first = false;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  auto q = make_query(0, product.f, ctx.u);
  std::vector<bool> used(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pick = n;
    double pick_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double s = psi(q, sorted[i].emb->h);
      if (pick == n || s > pick_score) {
        pick = i;
        pick_score = s;
      }
    }
    used[pick] = true;
    best.order.push_back(sorted[pick].id);
    best.psi_sum += pick_score;
    subtract_reactant(q, sorted[pick].id, sorted[pick].emb->g);
  }
  best.psi_sum += psi(q, ctx.halt_key);
  return best;
}

// (max over orders of summed psi + phi) / (n + 2).
inline ScoredSet reaction_score(MolId product_id, const Embeddings& product,
                                std::span<const ReactantRef> reactants, const ScoreContext& ctx,
                                std::size_t exhaustive_limit = 5) {
  for (const auto& r : reactants) {
    if (r.id == product_id) throw ScoringError("ProductInReactants: product listed as reactant");
  }
  const auto sorted = detail::sorted_refs(reactants);
  ScoredSet out;
  auto best = best_permutation(product, sorted, ctx, exhaustive_limit);
  std::vector<std::span<const double>> gs;
  for (const auto& r : sorted) {
    out.reactants.push_back(r.id);
    gs.emplace_back(r.emb->g);
  }
  out.phi = phi(gs, product.h, ctx.v);
  out.psi_sum = best.psi_sum;
  out.best_order = std::move(best.order);
  out.score = (out.psi_sum + out.phi) / static_cast<double>(sorted.size() + 2);
  return out;
}

}  // namespace retcl::model
