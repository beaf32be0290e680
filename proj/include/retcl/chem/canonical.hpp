#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "retcl/chem/molecule.hpp"
#include "retcl/chem/smiles.hpp"

namespace retcl::chem {

namespace detail {

using Ranks = std::vector<std::uint32_t>;

// Dense ranks of `keys`: equal keys share a rank, ranks follow key order.
template <class Key>
Ranks dense_ranks(const std::vector<Key>& keys) {
  std::vector<std::uint32_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](auto a, auto b) { return keys[a] < keys[b]; });
  Ranks rank(keys.size(), 0);
  std::uint32_t r = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0 && keys[idx[i - 1]] < keys[idx[i]]) ++r;
    rank[idx[i]] = r;
  }
  return rank;
}

inline std::uint32_t class_count(const Ranks& ranks) {
  return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
}

inline Ranks initial_ranks(const Molecule& mol) {
  using Key = std::tuple<int, int, int, int, int, int>;
  std::vector<Key> keys;
  keys.reserve(mol.atom_count());
  for (const auto& a : mol.atoms()) {
    keys.emplace_back(a.atomic_number, a.formal_charge, a.degree, a.hydrogens(),
                      a.aromatic ? 1 : 0, a.in_ring ? 1 : 0);
  }
  return dense_ranks(keys);
}

// Iterative neighbourhood refinement until the partition stops splitting.
inline Ranks refine(const Molecule& mol, Ranks ranks) {
  using Key = std::pair<std::uint32_t, std::vector<std::uint64_t>>;
  auto classes = class_count(ranks);
  while (classes < mol.atom_count()) {
    std::vector<Key> keys(mol.atom_count());
    for (std::uint32_t a = 0; a < mol.atom_count(); ++a) {
      keys[a].first = ranks[a];
      for (const auto& nb : mol.neighbors(a)) {
        keys[a].second.push_back(
            (static_cast<std::uint64_t>(ranks[nb.atom]) << 8) |
            static_cast<std::uint64_t>(mol.bond(nb.bond).order));
      }
      std::sort(keys[a].second.begin(), keys[a].second.end());
    }
    auto next = dense_ranks(keys);
    const auto next_classes = class_count(next);
    ranks = std::move(next);
    if (next_classes == classes) break;
    classes = next_classes;
  }
  return ranks;
}

struct CanonicalSearch {
  const Molecule& mol;
  int leaf_budget;
  int leaves = 0;
  std::string best;
  bool have_best = false;

  void run(const Ranks& ranks) {
    const auto n = mol.atom_count();
    if (class_count(ranks) == n) {
      ++leaves;
      auto s = SmilesWriter(mol, ranks).write();
      if (!have_best || s < best) {
        best = std::move(s);
        have_best = true;
      }
      return;
    }
    // Lowest tied class; break the tie on each member in turn.
    std::vector<std::uint32_t> count(n, 0);
    for (const auto r : ranks) ++count[r];
    std::uint32_t tied = 0;
    while (count[tied] < 2) ++tied;
    std::vector<std::uint32_t> members;
    for (std::uint32_t a = 0; a < n; ++a) {
      if (ranks[a] == tied) members.push_back(a);
    }
    for (const auto m : members) {
      Ranks split(n);
      for (std::uint32_t a = 0; a < n; ++a) {
        split[a] = 2 * ranks[a] + ((ranks[a] == tied && a != m) ? 1 : 0);
      }
      run(refine(mol, dense_ranks(split)));
      if (leaves >= leaf_budget) break;
    }
  }
};

}  // namespace detail

// Canonical atom ranking: refined invariants with ties broken by searching
// over the members of the lowest tied class (first member only once the leaf
// budget is exhausted).
inline std::string canonical_form(const Molecule& mol, int leaf_budget = 256) {
  if (mol.atom_count() == 0) return {};
  detail::CanonicalSearch search{mol, leaf_budget, 0, {}, false};
  search.run(detail::refine(mol, detail::initial_ranks(mol)));
  return search.best;
}

inline std::string canonical_smiles(std::string_view smiles,
                                    SmilesOptions options = {}) {
  return canonical_form(parse_smiles(smiles, options));
}

}  // namespace retcl::chem
