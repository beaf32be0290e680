#pragma once

// Test-only oracles over molecular graphs. Deliberately independent of the
// canonicalization code.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "retcl/chem/molecule.hpp"

namespace retcl::testing {

inline std::tuple<int, int, int, bool, int> atom_label(const chem::Molecule& m,
                                                       std::size_t a) {
  const auto& at = m.atom(a);
  return {at.atomic_number, at.formal_charge, at.hydrogens(), at.aromatic,
          at.degree};
}

inline std::optional<chem::BondOrder> bond_between(const chem::Molecule& m,
                                                   std::uint32_t a,
                                                   std::uint32_t b) {
  for (const auto& nb : m.neighbors(a)) {
    if (nb.atom == b) return m.bond(nb.bond).order;
  }
  return std::nullopt;
}

// Backtracking isomorphism test preserving element, charge, hydrogen count,
// aromatic flag and bond orders. Intended for small molecules.
inline bool isomorphic(const chem::Molecule& a, const chem::Molecule& b) {
  const auto n = a.atom_count();
  if (n != b.atom_count() || a.bond_count() != b.bond_count()) return false;
  {
    std::vector<std::tuple<int, int, int, bool, int>> la, lb;
    for (std::size_t i = 0; i < n; ++i) {
      la.push_back(atom_label(a, i));
      lb.push_back(atom_label(b, i));
    }
    std::sort(la.begin(), la.end());
    std::sort(lb.begin(), lb.end());
    if (la != lb) return false;
  }
  // Visit atoms of `a` in BFS order so each new atom has a mapped neighbour.
  std::vector<std::uint32_t> order;
  std::vector<bool> seen(n, false);
  for (std::uint32_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    seen[s] = true;
    order.push_back(s);
    for (std::size_t head = order.size() - 1; head < order.size(); ++head) {
      for (const auto& nb : a.neighbors(order[head])) {
        if (!seen[nb.atom]) {
          seen[nb.atom] = true;
          order.push_back(nb.atom);
        }
      }
    }
  }
  std::vector<std::int64_t> map(n, -1);
  std::vector<bool> used(n, false);
  auto extend = [&](auto&& self, std::size_t k) -> bool {
    if (k == n) return true;
    const auto u = order[k];
    for (std::uint32_t v = 0; v < n; ++v) {
      if (used[v] || atom_label(a, u) != atom_label(b, v)) continue;
      bool ok = true;
      for (const auto& nb : a.neighbors(u)) {
        if (map[nb.atom] < 0) continue;
        const auto other = bond_between(b, v, static_cast<std::uint32_t>(map[nb.atom]));
        if (!other || *other != a.bond(nb.bond).order) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      map[u] = v;
      used[v] = true;
      if (self(self, k + 1)) return true;
      map[u] = -1;
      used[v] = false;
    }
    return false;
  };
  return extend(extend, 0);
}

inline std::vector<std::uint32_t> random_permutation(std::size_t n,
                                                     std::mt19937_64& rng) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace retcl::testing
