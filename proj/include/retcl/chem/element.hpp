#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace retcl::chem {

// Symbols indexed by atomic number; index 0 is unused.
inline constexpr std::array<std::string_view, 119> kElementSymbols = {
    "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na",
    "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",
    "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag",
    "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu",
    "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi",
    "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am",
    "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh",
    "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

inline constexpr std::uint8_t kHydrogen = 1;
inline constexpr std::uint8_t kBoron = 5;
inline constexpr std::uint8_t kCarbon = 6;
inline constexpr std::uint8_t kNitrogen = 7;
inline constexpr std::uint8_t kOxygen = 8;
inline constexpr std::uint8_t kFluorine = 9;
inline constexpr std::uint8_t kPhosphorus = 15;
inline constexpr std::uint8_t kSulfur = 16;
inline constexpr std::uint8_t kChlorine = 17;
inline constexpr std::uint8_t kBromine = 35;
inline constexpr std::uint8_t kIodine = 53;

inline std::optional<std::uint8_t> atomic_number(std::string_view symbol) {
  for (std::size_t z = 1; z < kElementSymbols.size(); ++z) {
    if (kElementSymbols[z] == symbol) return static_cast<std::uint8_t>(z);
  }
  return std::nullopt;
}

inline std::string_view element_symbol(std::uint8_t z) {
  return z < kElementSymbols.size() ? kElementSymbols[z] : std::string_view{};
}

// Allowed valences for the organic subset; empty for everything else.
inline std::span<const int> default_valences(std::uint8_t z) {
  static constexpr int kB[] = {3};
  static constexpr int kC[] = {4};
  static constexpr int kN[] = {3};
  static constexpr int kO[] = {2};
  static constexpr int kP[] = {3, 5};
  static constexpr int kS[] = {2, 4, 6};
  static constexpr int kHalogen[] = {1};
  switch (z) {
    case kBoron: return kB;
    case kCarbon: return kC;
    case kNitrogen: return kN;
    case kOxygen: return kO;
    case kPhosphorus: return kP;
    case kSulfur: return kS;
    case kFluorine:
    case kChlorine:
    case kBromine:
    case kIodine: return kHalogen;
    default: return {};
  }
}

inline bool is_organic_subset(std::uint8_t z) {
  return !default_valences(z).empty();
}

// Elements that may be written in lowercase (aromatic) form.
inline bool may_be_aromatic(std::uint8_t z) {
  switch (z) {
    case kBoron:
    case kCarbon:
    case kNitrogen:
    case kOxygen:
    case kPhosphorus:
    case kSulfur:
    case 33:  // As
    case 34:  // Se
    case 52:  // Te
      return true;
    default:
      return false;
  }
}

}  // namespace retcl::chem
