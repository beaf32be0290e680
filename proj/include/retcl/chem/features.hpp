#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "retcl/chem/molecule.hpp"

namespace retcl::chem {

// Element vocabulary for the atom-type one-hot; anything else maps to the
// trailing "other" slot.
inline constexpr std::array<std::uint8_t, 16> kFeatureElements = {
    6, 7, 8, 16, 9, 17, 35, 53, 15, 5, 14, 50, 34, 30, 29, 12};

inline constexpr int kElementSlots = kFeatureElements.size() + 1;  // 17
inline constexpr int kDegreeSlots = 6;                              // 0..5
inline constexpr int kChargeSlots = 5;                              // -2..+2
inline constexpr int kHydrogenSlots = 5;                            // 0..4
inline constexpr int kAtomFeatureDim =
    kElementSlots + kDegreeSlots + kChargeSlots + kHydrogenSlots + 2;  // 35
inline constexpr int kBondFeatureDim = 5;

struct FeatureBundle {
  std::size_t atom_count = 0;
  std::vector<float> atom_features;  // atom_count x kAtomFeatureDim
  std::vector<float> bond_features;  // edge_count x kBondFeatureDim
  // Directed edges: edge 2i runs begin->end of bond i, edge 2i+1 the reverse.
  std::vector<std::uint32_t> edge_src;
  std::vector<std::uint32_t> edge_dst;
  std::vector<std::uint32_t> reverse_edge;
  int warnings = 0;  // bucketized elements and clamped values

  std::size_t edge_count() const { return edge_src.size(); }
};

inline int element_slot(std::uint8_t z) {
  for (std::size_t i = 0; i < kFeatureElements.size(); ++i) {
    if (kFeatureElements[i] == z) return static_cast<int>(i);
  }
  return kElementSlots - 1;
}

inline FeatureBundle featurize(const Molecule& mol) {
  FeatureBundle out;
  const auto n = mol.atom_count();
  out.atom_count = n;
  out.atom_features.assign(n * kAtomFeatureDim, 0.0f);
  for (std::size_t a = 0; a < n; ++a) {
    const auto& atom = mol.atom(a);
    float* row = out.atom_features.data() + a * kAtomFeatureDim;
    int offset = 0;
    const int es = element_slot(atom.atomic_number);
    if (es == kElementSlots - 1) ++out.warnings;
    row[offset + es] = 1.0f;
    offset += kElementSlots;

    if (atom.degree > kDegreeSlots - 1) ++out.warnings;
    row[offset + std::min<int>(atom.degree, kDegreeSlots - 1)] = 1.0f;
    offset += kDegreeSlots;

    const int charge = std::clamp<int>(atom.formal_charge, -2, 2);
    if (charge != atom.formal_charge) ++out.warnings;
    row[offset + charge + 2] = 1.0f;
    offset += kChargeSlots;

    if (atom.hydrogens() > kHydrogenSlots - 1) ++out.warnings;
    row[offset + std::min(atom.hydrogens(), kHydrogenSlots - 1)] = 1.0f;
    offset += kHydrogenSlots;

    row[offset++] = atom.aromatic ? 1.0f : 0.0f;
    row[offset++] = atom.in_ring ? 1.0f : 0.0f;
  }

  const auto m = mol.bond_count();
  out.bond_features.assign(2 * m * kBondFeatureDim, 0.0f);
  out.edge_src.resize(2 * m);
  out.edge_dst.resize(2 * m);
  out.reverse_edge.resize(2 * m);
  for (std::size_t b = 0; b < m; ++b) {
    const auto& bond = mol.bond(b);
    int order_slot = 0;
    switch (bond.order) {
      case BondOrder::single: order_slot = 0; break;
      case BondOrder::double_: order_slot = 1; break;
      case BondOrder::triple: order_slot = 2; break;
      case BondOrder::aromatic: order_slot = 3; break;
    }
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const auto e = 2 * b + dir;
      float* row = out.bond_features.data() + e * kBondFeatureDim;
      row[order_slot] = 1.0f;
      row[4] = bond.in_ring ? 1.0f : 0.0f;
      out.edge_src[e] = dir == 0 ? bond.begin : bond.end;
      out.edge_dst[e] = dir == 0 ? bond.end : bond.begin;
      out.reverse_edge[e] = static_cast<std::uint32_t>(2 * b + (1 - dir));
    }
  }
  return out;
}

}  // namespace retcl::chem
