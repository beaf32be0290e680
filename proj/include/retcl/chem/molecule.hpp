#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retcl/chem/element.hpp"

namespace retcl::chem {

enum class ChemErrc {
  empty_input,
  syntax_error,
  unbalanced_parenthesis,
  unclosed_ring_bond,
  unknown_element,
  invalid_charge,
  valence_overflow,
  invalid_graph,
  malformed_reaction,
  multi_fragment_product,
};

inline const char* to_string(ChemErrc code) {
  switch (code) {
    case ChemErrc::empty_input: return "EmptyInput";
    case ChemErrc::syntax_error: return "SyntaxError";
    case ChemErrc::unbalanced_parenthesis: return "UnbalancedParenthesis";
    case ChemErrc::unclosed_ring_bond: return "UnclosedRingBond";
    case ChemErrc::unknown_element: return "UnknownElement";
    case ChemErrc::invalid_charge: return "InvalidCharge";
    case ChemErrc::valence_overflow: return "ValenceOverflow";
    case ChemErrc::invalid_graph: return "InvalidGraph";
    case ChemErrc::malformed_reaction: return "MalformedReaction";
    case ChemErrc::multi_fragment_product: return "MultiFragmentProduct";
  }
  return "Unknown";
}

class ChemError : public std::runtime_error {
 public:
  ChemError(ChemErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ChemErrc code() const noexcept { return code_; }

 private:
  ChemErrc code_;
};

enum class BondOrder : std::uint8_t { single = 1, double_ = 2, triple = 3, aromatic = 4 };

// Contribution of a bond to the valence sum; aromatic bonds count as one.
inline int valence_contribution(BondOrder order) {
  return order == BondOrder::aromatic ? 1 : static_cast<int>(order);
}

inline constexpr int kMinCharge = -4;
inline constexpr int kMaxCharge = 4;

struct AtomSpec {
  std::uint8_t atomic_number = kCarbon;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // set for bracket atoms
  bool aromatic = false;
};

struct BondSpec {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  BondOrder order = BondOrder::single;
};

struct Atom {
  std::uint8_t atomic_number = kCarbon;
  std::int8_t formal_charge = 0;
  std::optional<std::uint8_t> explicit_h;
  bool aromatic = false;
  std::uint8_t degree = 0;
  bool in_ring = false;
  std::uint8_t implicit_h = 0;

  // Hydrogen count attached to the atom, explicit or derived.
  int hydrogens() const { return implicit_h; }
};

struct Bond {
  std::uint32_t begin = 0;  // begin < end
  std::uint32_t end = 0;
  BondOrder order = BondOrder::single;
  bool in_ring = false;

  std::uint32_t other(std::uint32_t atom) const {
    return atom == begin ? end : begin;
  }
};

struct Neighbor {
  std::uint32_t atom;
  std::uint32_t bond;
};

// Immutable molecular graph. Construction validates the graph and derives
// degree, ring membership and implicit hydrogen counts.
class Molecule {
 public:
  Molecule() = default;

  static Molecule assemble(std::span<const AtomSpec> atom_specs,
                           std::span<const BondSpec> bond_specs,
                           std::string source_text = {}) {
    Molecule mol;
    mol.source_text_ = std::move(source_text);
    const auto n = static_cast<std::uint32_t>(atom_specs.size());
    mol.atoms_.reserve(n);
    for (const auto& spec : atom_specs) {
      if (spec.formal_charge < kMinCharge || spec.formal_charge > kMaxCharge) {
        throw ChemError(ChemErrc::invalid_charge,
                        "charge " + std::to_string(spec.formal_charge));
      }
      if (spec.atomic_number == 0 ||
          spec.atomic_number >= kElementSymbols.size()) {
        throw ChemError(ChemErrc::unknown_element,
                        "atomic number " + std::to_string(spec.atomic_number));
      }
      if (spec.explicit_h && (*spec.explicit_h < 0 || *spec.explicit_h > 9)) {
        throw ChemError(ChemErrc::syntax_error, "hydrogen count out of range");
      }
      Atom atom;
      atom.atomic_number = spec.atomic_number;
      atom.formal_charge = static_cast<std::int8_t>(spec.formal_charge);
      if (spec.explicit_h) {
        atom.explicit_h = static_cast<std::uint8_t>(*spec.explicit_h);
      }
      atom.aromatic = spec.aromatic;
      mol.atoms_.push_back(atom);
    }

    mol.bonds_.reserve(bond_specs.size());
    for (const auto& spec : bond_specs) {
      if (spec.begin >= n || spec.end >= n) {
        throw ChemError(ChemErrc::invalid_graph, "bond endpoint out of range");
      }
      if (spec.begin == spec.end) {
        throw ChemError(ChemErrc::invalid_graph, "self bond");
      }
      Bond bond;
      bond.begin = std::min(spec.begin, spec.end);
      bond.end = std::max(spec.begin, spec.end);
      bond.order = spec.order;
      if (bond.order == BondOrder::aromatic &&
          !(mol.atoms_[bond.begin].aromatic && mol.atoms_[bond.end].aromatic)) {
        throw ChemError(ChemErrc::invalid_graph,
                        "aromatic bond between non-aromatic atoms");
      }
      mol.bonds_.push_back(bond);
    }

    mol.build_adjacency();
    for (std::uint32_t a = 0; a < n; ++a) {
      const auto nbrs = mol.neighbors(a);
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
          if (nbrs[i].atom == nbrs[j].atom) {
            throw ChemError(ChemErrc::invalid_graph, "duplicate bond");
          }
        }
      }
    }
    mol.mark_ring_bonds();
    mol.derive_hydrogens();
    return mol;
  }

  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }
  const Atom& atom(std::size_t i) const { return atoms_[i]; }
  const Bond& bond(std::size_t i) const { return bonds_[i]; }
  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  const std::string& source_text() const { return source_text_; }

  std::span<const Neighbor> neighbors(std::size_t atom) const {
    return std::span<const Neighbor>(adjacency_)
        .subspan(offsets_[atom], offsets_[atom + 1] - offsets_[atom]);
  }

  // Connected component label per atom, labels assigned in first-atom order.
  std::vector<std::uint32_t> components() const {
    std::vector<std::uint32_t> label(atoms_.size(), UINT32_MAX);
    std::uint32_t next = 0;
    std::vector<std::uint32_t> stack;
    for (std::uint32_t s = 0; s < atoms_.size(); ++s) {
      if (label[s] != UINT32_MAX) continue;
      label[s] = next;
      stack.push_back(s);
      while (!stack.empty()) {
        const auto a = stack.back();
        stack.pop_back();
        for (const auto& nb : neighbors(a)) {
          if (label[nb.atom] == UINT32_MAX) {
            label[nb.atom] = next;
            stack.push_back(nb.atom);
          }
        }
      }
      ++next;
    }
    return label;
  }

  std::size_t component_count() const {
    const auto label = components();
    return label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  }

  std::vector<AtomSpec> atom_specs() const {
    std::vector<AtomSpec> specs;
    specs.reserve(atoms_.size());
    for (const auto& a : atoms_) {
      AtomSpec s;
      s.atomic_number = a.atomic_number;
      s.formal_charge = a.formal_charge;
      if (a.explicit_h) s.explicit_h = *a.explicit_h;
      s.aromatic = a.aromatic;
      specs.push_back(s);
    }
    return specs;
  }

  std::vector<BondSpec> bond_specs() const {
    std::vector<BondSpec> specs;
    specs.reserve(bonds_.size());
    for (const auto& b : bonds_) specs.push_back({b.begin, b.end, b.order});
    return specs;
  }

 private:
  void build_adjacency() {
    offsets_.assign(atoms_.size() + 1, 0);
    for (const auto& b : bonds_) {
      ++offsets_[b.begin + 1];
      ++offsets_[b.end + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    adjacency_.resize(bonds_.size() * 2);
    std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::uint32_t bi = 0; bi < bonds_.size(); ++bi) {
      const auto& b = bonds_[bi];
      adjacency_[fill[b.begin]++] = {b.end, bi};
      adjacency_[fill[b.end]++] = {b.begin, bi};
    }
    for (std::size_t a = 0; a < atoms_.size(); ++a) {
      atoms_[a].degree = static_cast<std::uint8_t>(
          std::min<std::uint32_t>(offsets_[a + 1] - offsets_[a], 255));
    }
  }

  // A bond lies on a cycle iff it is not a bridge.
  void mark_ring_bonds() {
    const auto n = atoms_.size();
    std::vector<std::uint32_t> disc(n, 0), low(n, 0);
    std::uint32_t timer = 0;
    struct Frame {
      std::uint32_t atom;
      std::uint32_t parent_bond;
      std::size_t next;
    };
    std::vector<Frame> stack;
    for (auto& b : bonds_) b.in_ring = true;
    for (std::uint32_t root = 0; root < n; ++root) {
      if (disc[root] != 0) continue;
      disc[root] = low[root] = ++timer;
      stack.push_back({root, UINT32_MAX, 0});
      while (!stack.empty()) {
        auto& top = stack.back();
        const auto nbrs = neighbors(top.atom);
        if (top.next < nbrs.size()) {
          const auto nb = nbrs[top.next++];
          if (nb.bond == top.parent_bond) continue;
          if (disc[nb.atom] == 0) {
            disc[nb.atom] = low[nb.atom] = ++timer;
            stack.push_back({nb.atom, nb.bond, 0});
          } else {
            low[top.atom] = std::min(low[top.atom], disc[nb.atom]);
          }
        } else {
          const auto done = top;
          stack.pop_back();
          if (!stack.empty()) {
            auto& parent = stack.back();
            low[parent.atom] = std::min(low[parent.atom], low[done.atom]);
            if (low[done.atom] > disc[parent.atom]) {
              bonds_[done.parent_bond].in_ring = false;
            }
          }
        }
      }
    }
    for (auto& a : atoms_) a.in_ring = false;
    for (const auto& b : bonds_) {
      if (b.in_ring) {
        atoms_[b.begin].in_ring = true;
        atoms_[b.end].in_ring = true;
      }
    }
  }

  void derive_hydrogens() {
    for (std::uint32_t a = 0; a < atoms_.size(); ++a) {
      auto& atom = atoms_[a];
      int bond_sum = 0;
      for (const auto& nb : neighbors(a)) {
        bond_sum += valence_contribution(bonds_[nb.bond].order);
      }
      const auto valences = default_valences(atom.atomic_number);
      if (atom.explicit_h) {
        atom.implicit_h = *atom.explicit_h;
        if (!valences.empty() &&
            bond_sum + atom.implicit_h >
                valences.back() + std::abs(static_cast<int>(atom.formal_charge))) {
          throw ChemError(ChemErrc::valence_overflow,
                          std::string(element_symbol(atom.atomic_number)) +
                              " at atom " + std::to_string(a));
        }
        continue;
      }
      // Bare atoms are only produced for the organic subset.
      if (valences.empty()) {
        atom.implicit_h = 0;
        continue;
      }
      if (bond_sum > valences.back()) {
        throw ChemError(ChemErrc::valence_overflow,
                        std::string(element_symbol(atom.atomic_number)) +
                            " at atom " + std::to_string(a));
      }
      if (atom.aromatic) {
        const int used = bond_sum + 1;
        atom.implicit_h = static_cast<std::uint8_t>(
            used <= valences.front() ? valences.front() - used : 0);
        continue;
      }
      int h = 0;
      for (const int v : valences) {
        if (v >= bond_sum) {
          h = v - bond_sum;
          break;
        }
      }
      atom.implicit_h = static_cast<std::uint8_t>(h);
    }
  }

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
  std::string source_text_;
};

// Hydrogen count a bare (unbracketed) organic-subset atom would receive in
// this bonding environment, or nullopt when it cannot be written bare.
inline std::optional<int> bare_hydrogens(const Molecule& mol, std::size_t a) {
  const auto& atom = mol.atom(a);
  const auto valences = default_valences(atom.atomic_number);
  if (valences.empty() || atom.formal_charge != 0) return std::nullopt;
  if (atom.aromatic && !may_be_aromatic(atom.atomic_number)) return std::nullopt;
  int bond_sum = 0;
  for (const auto& nb : mol.neighbors(a)) {
    bond_sum += valence_contribution(mol.bond(nb.bond).order);
  }
  if (bond_sum > valences.back()) return std::nullopt;
  if (atom.aromatic) {
    const int used = bond_sum + 1;
    return used <= valences.front() ? valences.front() - used : 0;
  }
  for (const int v : valences) {
    if (v >= bond_sum) return v - bond_sum;
  }
  return std::nullopt;
}

// Renumbers atoms: atom i of the result is atom order[i] of mol.
inline Molecule renumber_atoms(const Molecule& mol,
                               std::span<const std::uint32_t> order) {
  const auto n = mol.atom_count();
  if (order.size() != n) {
    throw ChemError(ChemErrc::invalid_graph, "order is not a permutation");
  }
  std::vector<std::uint32_t> new_index(n, UINT32_MAX);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (order[i] >= n || new_index[order[i]] != UINT32_MAX) {
      throw ChemError(ChemErrc::invalid_graph, "order is not a permutation");
    }
    new_index[order[i]] = i;
  }
  const auto specs = mol.atom_specs();
  std::vector<AtomSpec> atoms(n);
  for (std::uint32_t i = 0; i < n; ++i) atoms[i] = specs[order[i]];
  std::vector<BondSpec> bonds;
  bonds.reserve(mol.bond_count());
  for (const auto& b : mol.bonds()) {
    bonds.push_back({new_index[b.begin], new_index[b.end], b.order});
  }
  return Molecule::assemble(atoms, bonds, mol.source_text());
}

inline Molecule disjoint_union(const Molecule& a, const Molecule& b) {
  auto atoms = a.atom_specs();
  auto more = b.atom_specs();
  const auto shift = static_cast<std::uint32_t>(atoms.size());
  atoms.insert(atoms.end(), more.begin(), more.end());
  auto bonds = a.bond_specs();
  for (auto s : b.bond_specs()) {
    s.begin += shift;
    s.end += shift;
    bonds.push_back(s);
  }
  return Molecule::assemble(atoms, bonds);
}

}  // namespace retcl::chem
