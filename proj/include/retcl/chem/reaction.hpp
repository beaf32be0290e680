#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retcl/chem/molecule.hpp"
#include "retcl/chem/smiles.hpp"

namespace retcl::chem {

struct ParsedReaction {
  std::vector<Molecule> reactants;
  Molecule product;
  std::optional<int> type;
};

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Parses `R1.R2>>P` or `R1.R2>reagents>P`, optionally followed by a tab and an
// integer reaction type. Reagents are dropped.
inline ParsedReaction parse_reaction(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  std::string_view body = line;
  std::optional<int> type;
  if (const auto tab = line.find('\t'); tab != std::string_view::npos) {
    body = line.substr(0, tab);
    const auto field = trim(line.substr(tab + 1));
    if (!field.empty()) {
      int value = 0;
      const auto* end = field.data() + field.size();
      const auto [ptr, ec] = std::from_chars(field.data(), end, value);
      if (ec != std::errc{} || ptr != end) {
        throw ChemError(ChemErrc::malformed_reaction,
                        "reaction type is not an integer");
      }
      type = value;
    }
  }
  body = trim(body);

  const auto first = body.find('>');
  const auto second =
      first == std::string_view::npos ? first : body.find('>', first + 1);
  if (first == std::string_view::npos || second == std::string_view::npos ||
      body.find('>', second + 1) != std::string_view::npos) {
    throw ChemError(ChemErrc::malformed_reaction,
                    "expected exactly one reaction arrow");
  }
  const auto left = body.substr(0, first);
  const auto right = body.substr(second + 1);
  if (left.empty() || right.empty()) {
    throw ChemError(ChemErrc::malformed_reaction, "empty reaction side");
  }
  if (right.find('.') != std::string_view::npos) {
    throw ChemError(ChemErrc::multi_fragment_product,
                    "product has more than one fragment");
  }

  ParsedReaction out;
  std::size_t start = 0;
  while (start <= left.size()) {
    auto dot = left.find('.', start);
    if (dot == std::string_view::npos) dot = left.size();
    const auto piece = left.substr(start, dot - start);
    if (piece.empty()) {
      throw ChemError(ChemErrc::malformed_reaction, "empty reactant");
    }
    out.reactants.push_back(parse_smiles(piece));
    start = dot + 1;
  }
  out.product = parse_smiles(right);
  out.type = type;
  return out;
}

}  // namespace retcl::chem
