#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retcl/chem/element.hpp"
#include "retcl/chem/molecule.hpp"

namespace retcl::chem {

struct SmilesOptions {
  // Dot-separated fragments are rejected unless requested; reaction sides
  // are split on '.' before reaching the parser.
  bool allow_fragments = false;
};

namespace detail {

class SmilesParser {
 public:
  SmilesParser(std::string_view text, SmilesOptions options)
      : text_(text), options_(options) {}

  Molecule parse() {
    if (text_.empty()) throw ChemError(ChemErrc::empty_input, "empty SMILES");
    for (const char c : text_) {
      if (static_cast<unsigned char>(c) > 127 || c == '\0') {
        fail(ChemErrc::syntax_error, "non-ASCII byte");
      }
    }
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      switch (c) {
        case '(': open_branch(); break;
        case ')': close_branch(); break;
        case '-': set_bond(BondOrder::single); break;
        case '/':
        case '\\': set_bond(BondOrder::single); break;
        case '=': set_bond(BondOrder::double_); break;
        case '#': set_bond(BondOrder::triple); break;
        case ':': set_bond(BondOrder::aromatic); break;
        case '.': dot(); break;
        case '%': ring_closure(); break;
        case '[': bracket_atom(); break;
        default:
          if (std::isdigit(static_cast<unsigned char>(c))) {
            ring_closure();
          } else {
            organic_atom();
          }
      }
    }
    if (pending_) fail(ChemErrc::syntax_error, "dangling bond");
    if (!branches_.empty()) {
      fail(ChemErrc::unbalanced_parenthesis, "unclosed branch");
    }
    if (!rings_.empty()) {
      fail(ChemErrc::unclosed_ring_bond,
           "ring bond " + std::to_string(rings_.begin()->first) + " never closed");
    }
    if (atoms_.empty()) fail(ChemErrc::empty_input, "no atoms");
    return Molecule::assemble(atoms_, bonds_, std::string(text_));
  }

 private:
  struct OpenRing {
    std::uint32_t atom;
    std::optional<BondOrder> order;
  };

  struct Branch {
    std::int64_t atom;
    std::size_t atoms_at_open;
  };

  [[noreturn]] void fail(ChemErrc code, const std::string& what) const {
    throw ChemError(code, what + " at position " + std::to_string(pos_));
  }

  void open_branch() {
    if (prev_ < 0) fail(ChemErrc::syntax_error, "branch without atom");
    if (pending_) fail(ChemErrc::syntax_error, "bond before branch");
    branches_.push_back({prev_, atoms_.size()});
    ++pos_;
  }

  void close_branch() {
    if (branches_.empty()) {
      fail(ChemErrc::unbalanced_parenthesis, "unmatched ')'");
    }
    if (pending_) fail(ChemErrc::syntax_error, "dangling bond in branch");
    if (branches_.back().atoms_at_open == atoms_.size()) {
      fail(ChemErrc::syntax_error, "empty branch");
    }
    prev_ = branches_.back().atom;
    branches_.pop_back();
    ++pos_;
  }

  void set_bond(BondOrder order) {
    if (prev_ < 0) fail(ChemErrc::syntax_error, "bond without preceding atom");
    if (pending_) fail(ChemErrc::syntax_error, "consecutive bond symbols");
    pending_ = order;
    ++pos_;
  }

  void dot() {
    if (!options_.allow_fragments) {
      fail(ChemErrc::syntax_error, "fragment separator not allowed here");
    }
    if (prev_ < 0 || pending_) fail(ChemErrc::syntax_error, "misplaced '.'");
    if (!branches_.empty()) fail(ChemErrc::syntax_error, "'.' inside branch");
    prev_ = -1;
    ++pos_;
  }

  BondOrder implicit_order(std::uint32_t a, std::uint32_t b) const {
    return atoms_[a].aromatic && atoms_[b].aromatic ? BondOrder::aromatic
                                                    : BondOrder::single;
  }

  void ring_closure() {
    if (prev_ < 0) fail(ChemErrc::syntax_error, "ring bond without atom");
    int number = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        fail(ChemErrc::syntax_error, "'%' must be followed by two digits");
      }
      number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }
    const auto here = static_cast<std::uint32_t>(prev_);
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, OpenRing{here, pending_});
      pending_.reset();
      return;
    }
    const auto other = it->second.atom;
    if (other == here) fail(ChemErrc::syntax_error, "ring bond to self");
    auto order = it->second.order;
    if (pending_) {
      if (order && *order != *pending_) {
        fail(ChemErrc::syntax_error, "conflicting ring bond orders");
      }
      order = pending_;
    }
    for (const auto& b : bonds_) {
      if ((b.begin == other && b.end == here) ||
          (b.begin == here && b.end == other)) {
        fail(ChemErrc::syntax_error, "ring bond duplicates an existing bond");
      }
    }
    bonds_.push_back({other, here, order.value_or(implicit_order(other, here))});
    rings_.erase(it);
    pending_.reset();
  }

  void add_atom(const AtomSpec& spec) {
    const auto index = static_cast<std::uint32_t>(atoms_.size());
    atoms_.push_back(spec);
    if (prev_ >= 0) {
      const auto p = static_cast<std::uint32_t>(prev_);
      bonds_.push_back({p, index, pending_.value_or(implicit_order(p, index))});
    } else if (pending_) {
      fail(ChemErrc::syntax_error, "bond without preceding atom");
    }
    pending_.reset();
    prev_ = index;
  }

  void organic_atom() {
    const char c = text_[pos_];
    AtomSpec spec;
    std::size_t width = 1;
    switch (c) {
      case 'B':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
          spec.atomic_number = kBromine;
          width = 2;
        } else {
          spec.atomic_number = kBoron;
        }
        break;
      case 'C':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
          spec.atomic_number = kChlorine;
          width = 2;
        } else {
          spec.atomic_number = kCarbon;
        }
        break;
      case 'N': spec.atomic_number = kNitrogen; break;
      case 'O': spec.atomic_number = kOxygen; break;
      case 'P': spec.atomic_number = kPhosphorus; break;
      case 'S': spec.atomic_number = kSulfur; break;
      case 'F': spec.atomic_number = kFluorine; break;
      case 'I': spec.atomic_number = kIodine; break;
      case 'b': spec.atomic_number = kBoron; spec.aromatic = true; break;
      case 'c': spec.atomic_number = kCarbon; spec.aromatic = true; break;
      case 'n': spec.atomic_number = kNitrogen; spec.aromatic = true; break;
      case 'o': spec.atomic_number = kOxygen; spec.aromatic = true; break;
      case 'p': spec.atomic_number = kPhosphorus; spec.aromatic = true; break;
      case 's': spec.atomic_number = kSulfur; spec.aromatic = true; break;
      default:
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '*') {
          fail(ChemErrc::unknown_element,
               std::string("'") + c + "' outside brackets");
        }
        fail(ChemErrc::syntax_error, std::string("unexpected '") + c + "'");
    }
    pos_ += width;
    add_atom(spec);
  }

  bool peek(char c) const { return pos_ < text_.size() && text_[pos_] == c; }

  int read_digits(int max_digits) {
    int value = 0;
    int count = 0;
    while (count < max_digits && pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + (text_[pos_] - '0');
      ++pos_;
      ++count;
    }
    return count == 0 ? -1 : value;
  }

  void bracket_atom() {
    ++pos_;  // '['
    read_digits(3);  // isotope, discarded
    if (pos_ >= text_.size()) fail(ChemErrc::syntax_error, "unterminated bracket");
    AtomSpec spec;
    const char c = text_[pos_];
    if (std::islower(static_cast<unsigned char>(c))) {
      static constexpr std::pair<std::string_view, std::uint8_t> kAromatic[] = {
          {"se", 34}, {"as", 33}, {"te", 52}, {"b", kBoron}, {"c", kCarbon},
          {"n", kNitrogen}, {"o", kOxygen}, {"p", kPhosphorus}, {"s", kSulfur}};
      bool found = false;
      for (const auto& [sym, z] : kAromatic) {
        if (text_.substr(pos_, sym.size()) == sym) {
          spec.atomic_number = z;
          spec.aromatic = true;
          pos_ += sym.size();
          found = true;
          break;
        }
      }
      if (!found) fail(ChemErrc::unknown_element, "unknown aromatic symbol");
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::optional<std::uint8_t> z;
      if (pos_ + 1 < text_.size() &&
          std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        z = atomic_number(text_.substr(pos_, 2));
        if (z) pos_ += 2;
      }
      if (!z) {
        z = atomic_number(text_.substr(pos_, 1));
        if (!z) fail(ChemErrc::unknown_element, "unknown element symbol");
        ++pos_;
      }
      spec.atomic_number = *z;
    } else if (c == '*') {
      fail(ChemErrc::unknown_element, "wildcard atom");
    } else {
      fail(ChemErrc::syntax_error, "expected element symbol");
    }

    // Chirality is accepted and discarded.
    if (peek('@')) {
      ++pos_;
      if (peek('@')) {
        ++pos_;
      } else {
        for (std::string_view cls : {"TH", "AL", "SP", "TB", "OH"}) {
          if (text_.substr(pos_, 2) == cls) {
            pos_ += 2;
            read_digits(2);
            break;
          }
        }
      }
    }

    int hydrogens = 0;
    if (peek('H')) {
      ++pos_;
      const int count = read_digits(1);
      hydrogens = count < 0 ? 1 : count;
    }
    spec.explicit_h = hydrogens;

    int charge = 0;
    if (peek('+') || peek('-')) {
      const char sign = text_[pos_];
      const int s = sign == '+' ? 1 : -1;
      ++pos_;
      const int magnitude = read_digits(2);
      if (magnitude >= 0) {
        charge = s * magnitude;
      } else {
        charge = s;
        while (peek(sign)) {
          charge += s;
          ++pos_;
        }
      }
    }
    if (charge < kMinCharge || charge > kMaxCharge) {
      fail(ChemErrc::invalid_charge, "charge " + std::to_string(charge));
    }
    spec.formal_charge = charge;

    if (peek(':')) {
      ++pos_;
      if (read_digits(4) < 0) fail(ChemErrc::syntax_error, "bad atom class");
    }
    if (!peek(']')) fail(ChemErrc::syntax_error, "expected ']'");
    ++pos_;
    add_atom(spec);
  }

  std::string_view text_;
  SmilesOptions options_;
  std::size_t pos_ = 0;
  std::vector<AtomSpec> atoms_;
  std::vector<BondSpec> bonds_;
  std::int64_t prev_ = -1;
  std::optional<BondOrder> pending_;
  std::vector<Branch> branches_;
  std::map<int, OpenRing> rings_;
};

inline std::string atom_token(const Molecule& mol, std::size_t a) {
  const auto& atom = mol.atom(a);
  const auto symbol = element_symbol(atom.atomic_number);
  const auto bare = bare_hydrogens(mol, a);
  const bool bare_aromatic_ok =
      !atom.aromatic || (atom.atomic_number == kBoron || atom.atomic_number == kCarbon ||
                         atom.atomic_number == kNitrogen || atom.atomic_number == kOxygen ||
                         atom.atomic_number == kPhosphorus || atom.atomic_number == kSulfur);
  std::string sym(symbol);
  if (atom.aromatic) {
    for (auto& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  if (bare && *bare == atom.hydrogens() && bare_aromatic_ok) return sym;
  std::string out = "[" + sym;
  if (atom.hydrogens() == 1) {
    out += "H";
  } else if (atom.hydrogens() > 1) {
    out += "H" + std::to_string(atom.hydrogens());
  }
  if (atom.formal_charge > 0) {
    out += "+";
    if (atom.formal_charge > 1) out += std::to_string(atom.formal_charge);
  } else if (atom.formal_charge < 0) {
    out += "-";
    if (atom.formal_charge < -1) out += std::to_string(-atom.formal_charge);
  }
  out += "]";
  return out;
}

inline std::string bond_token(const Molecule& mol, const Bond& bond) {
  const bool both_aromatic =
      mol.atom(bond.begin).aromatic && mol.atom(bond.end).aromatic;
  switch (bond.order) {
    case BondOrder::single: return both_aromatic ? "-" : "";
    case BondOrder::double_: return "=";
    case BondOrder::triple: return "#";
    case BondOrder::aromatic: return both_aromatic ? "" : ":";
  }
  return "";
}

class SmilesWriter {
 public:
  SmilesWriter(const Molecule& mol, std::span<const std::uint32_t> rank)
      : mol_(mol), rank_(rank) {}

  std::string write() {
    const auto n = mol_.atom_count();
    visited_.assign(n, false);
    bond_kind_.assign(mol_.bond_count(), Kind::unseen);
    children_.assign(n, {});
    ring_bonds_.assign(n, {});
    std::vector<std::uint32_t> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), 0u);
    std::sort(by_rank.begin(), by_rank.end(),
              [&](auto a, auto b) { return rank_[a] < rank_[b]; });
    std::string out;
    for (const auto start : by_rank) {
      if (visited_[start]) continue;
      build_tree(start, UINT32_MAX);
      if (!out.empty()) out += '.';
      emit(start, out);
    }
    return out;
  }

 private:
  enum class Kind : std::uint8_t { unseen, tree, ring };

  std::vector<Neighbor> sorted_neighbors(std::uint32_t a) const {
    auto nbrs = mol_.neighbors(a);
    std::vector<Neighbor> out(nbrs.begin(), nbrs.end());
    std::sort(out.begin(), out.end(), [&](const Neighbor& x, const Neighbor& y) {
      return rank_[x.atom] < rank_[y.atom];
    });
    return out;
  }

  void build_tree(std::uint32_t a, std::uint32_t parent_bond) {
    visited_[a] = true;
    for (const auto& nb : sorted_neighbors(a)) {
      if (nb.bond == parent_bond || bond_kind_[nb.bond] != Kind::unseen) continue;
      if (!visited_[nb.atom]) {
        bond_kind_[nb.bond] = Kind::tree;
        children_[a].push_back(nb);
        build_tree(nb.atom, nb.bond);
      } else {
        // Back edge: opened at the ancestor, closed here.
        bond_kind_[nb.bond] = Kind::ring;
        ring_bonds_[nb.atom].push_back(nb.bond);
        ring_bonds_[a].push_back(nb.bond);
      }
    }
  }

  int allocate_digit() {
    for (int d = 1;; ++d) {
      if (!digits_in_use_.contains(d)) {
        digits_in_use_.emplace(d, 0);
        return d;
      }
    }
  }

  static std::string digit_token(int d) {
    if (d < 10) return std::string(1, static_cast<char>('0' + d));
    return "%" + std::to_string(d);
  }

  void emit(std::uint32_t a, std::string& out) {
    out += atom_token(mol_, a);
    // Closings first (ordered by digit), then openings (ordered by partner rank).
    std::vector<std::pair<int, std::uint32_t>> closing;
    std::vector<std::uint32_t> opening;
    for (const auto bi : ring_bonds_[a]) {
      if (auto it = open_digit_.find(bi); it != open_digit_.end()) {
        closing.emplace_back(it->second, bi);
      } else {
        opening.push_back(bi);
      }
    }
    std::sort(closing.begin(), closing.end());
    std::sort(opening.begin(), opening.end(), [&](auto x, auto y) {
      return rank_[mol_.bond(x).other(a)] < rank_[mol_.bond(y).other(a)];
    });
    for (const auto& [digit, bi] : closing) {
      out += digit_token(digit);
      digits_in_use_.erase(digit);
      open_digit_.erase(bi);
    }
    for (const auto bi : opening) {
      const int digit = allocate_digit();
      open_digit_[bi] = digit;
      out += bond_token(mol_, mol_.bond(bi));
      out += digit_token(digit);
    }
    const auto& kids = children_[a];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last) out += '(';
      out += bond_token(mol_, mol_.bond(kids[i].bond));
      emit(kids[i].atom, out);
      if (!last) out += ')';
    }
  }

  const Molecule& mol_;
  std::span<const std::uint32_t> rank_;
  std::vector<bool> visited_;
  std::vector<Kind> bond_kind_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<std::uint32_t>> ring_bonds_;
  std::map<std::uint32_t, int> open_digit_;
  std::map<int, int> digits_in_use_;
};

}  // namespace detail

inline Molecule parse_smiles(std::string_view text, SmilesOptions options = {}) {
  return detail::SmilesParser(text, options).parse();
}

// Writes SMILES with a depth-first traversal. `start_order`, when given, is a
// permutation of atom indices listing atoms by visiting priority: traversal
// starts at start_order[0] and branches are taken in priority order.
inline std::string write_smiles(
    const Molecule& mol,
    std::optional<std::span<const std::uint32_t>> start_order = std::nullopt) {
  const auto n = mol.atom_count();
  std::vector<std::uint32_t> rank(n);
  if (start_order) {
    if (start_order->size() != n) {
      throw ChemError(ChemErrc::invalid_graph, "start order is not a permutation");
    }
    std::vector<bool> seen(n, false);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto a = (*start_order)[i];
      if (a >= n || seen[a]) {
        throw ChemError(ChemErrc::invalid_graph, "start order is not a permutation");
      }
      seen[a] = true;
      rank[a] = i;
    }
  } else {
    std::iota(rank.begin(), rank.end(), 0u);
  }
  return detail::SmilesWriter(mol, rank).write();
}

}  // namespace retcl::chem
