#pragma once

// Synthetic corpora built from a fragment grammar. A core is a small organic
// piece whose first atom is the attachment point. Each core appears in the
// pool under several reactive forms (alcohol, amine, bromide, acid, acid
// chloride), and products join two or three forms:
//   ester      acid_j + alcohol_i                 -> O(C(=O)core_j)core_i
//   amide      acid chloride_j + amine_i          -> N(C(=O)core_j)core_i
//   alkylated  acid chloride_j + amine_i + bromide_k -> N(C(=O)core_j)(core_k)core_i
// Every join is asymmetric, so each product has exactly one reactant set in
// the pool.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "retcl/chem/canonical.hpp"

namespace retcl::testing {

inline const std::vector<std::string>& toy_heads() {
  static const std::vector<std::string> v = {
      "C",     "CC",    "CCC",  "CCCC",   "CCCCC", "C(C)C",  "CC(C)",  "CC(C)C",
      "CCC(C)", "CCOC", "CC(F)", "C(F)",  "CCN(C)C", "CC(C)(C)", "CCSC"};
  return v;
}

inline const std::vector<std::string>& toy_tails() {
  static const std::vector<std::string> v = {
      "",           "C",           "F",           "Cl",          "OC",
      "C#N",        "c1ccccc1",    "c1ccc(F)cc1", "c1ccc(C)cc1", "c1ccc(Cl)cc1",
      "c1ccncc1",   "C1CC1",       "C1CCC1",      "C1CCCC1",     "C1CCCCC1",
      "C(F)(F)F",   "SC",          "C(=O)OC",     "c1ccco1",     "c1cccs1"};
  return v;
}

struct ToyForms {
  std::string alcohol, amine, bromide, acid, acid_chloride;
};

inline ToyForms toy_forms(const std::string& core) {
  return {"O" + core, "N" + core, "Br" + core, "OC(=O)" + core, "ClC(=O)" + core};
}

// Distinct cores (by canonical alcohol form), shuffled by `seed`.
inline std::vector<std::string> toy_cores(std::uint64_t seed) {
  std::vector<std::string> cores;
  std::set<std::string> seen;
  for (const auto& h : toy_heads()) {
    for (const auto& t : toy_tails()) {
      const auto core = h + t;
      if (seen.insert(chem::canonical_smiles("O" + core)).second) cores.push_back(core);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(cores.begin(), cores.end(), rng);
  return cores;
}

struct ToyReaction {
  std::vector<std::string> reactants;  // SMILES as generated
  std::string product;
};

inline std::string toy_line(const ToyReaction& r) {
  std::string out;
  for (std::size_t i = 0; i < r.reactants.size(); ++i) out += (i ? "." : "") + r.reactants[i];
  return out + ">>" + r.product;
}

struct ToyWorld {
  std::vector<ToyReaction> reactions;
  std::vector<std::string> candidates;   // the training pool
  std::vector<std::string> distractors;  // unseen molecules for enlarged pools
};

// `n_cores` cores in all five forms make the pool; products join 2 or 3 of
// them. Distractors are other cores' forms plus chloride, iodide and thiol
// forms of every core, `distractor_factor` times the pool size.
inline ToyWorld make_toy_world(std::uint64_t seed, std::size_t n_cores = 60,
                               std::size_t n_reactions = 100, std::size_t distractor_factor = 3) {
  const auto cores = toy_cores(seed);
  if (cores.size() < n_cores) throw std::invalid_argument("not enough cores");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ToyWorld w;
  std::set<std::string> pool;
  for (std::size_t i = 0; i < n_cores; ++i) {
    const auto f = toy_forms(cores[i]);
    for (const auto* s : {&f.alcohol, &f.amine, &f.bromide, &f.acid, &f.acid_chloride}) {
      w.candidates.push_back(*s);
      pool.insert(chem::canonical_smiles(*s));
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, n_cores - 1);
  std::set<std::string> products;
  std::size_t attempts = 0;
  while (w.reactions.size() < n_reactions) {
    if (++attempts > 100 * n_reactions) throw std::runtime_error("toy world generation stalled");
    const auto i = pick(rng), j = pick(rng), k = pick(rng);
    const auto fi = toy_forms(cores[i]), fj = toy_forms(cores[j]), fk = toy_forms(cores[k]);
    ToyReaction r;
    switch (w.reactions.size() % 10) {
      case 0: case 1: case 2: case 3:  // ester
        r = {{fj.acid, fi.alcohol}, "O(C(=O)" + cores[j] + ")" + cores[i]};
        break;
      case 4: case 5: case 6:  // amide
        r = {{fj.acid_chloride, fi.amine}, "N(C(=O)" + cores[j] + ")" + cores[i]};
        break;
      default:  // alkylated amide
        r = {{fj.acid_chloride, fi.amine, fk.bromide},
             "N(C(=O)" + cores[j] + ")(" + cores[k] + ")" + cores[i]};
        break;
    }
    const auto canon = chem::canonical_smiles(r.product);
    if (pool.count(canon) || !products.insert(canon).second) continue;
    w.reactions.push_back(std::move(r));
  }
  std::vector<std::string> extra;
  for (std::size_t c = 0; c < cores.size(); ++c) {
    if (c >= n_cores) {
      const auto f = toy_forms(cores[c]);
      for (const auto* s : {&f.alcohol, &f.amine, &f.bromide, &f.acid, &f.acid_chloride}) {
        extra.push_back(*s);
      }
    }
    for (const auto* handle : {"Cl", "I", "S"}) extra.push_back(handle + cores[c]);
  }
  std::shuffle(extra.begin(), extra.end(), rng);
  const auto want = distractor_factor * w.candidates.size();
  std::set<std::string> taken = pool;
  for (const auto& s : extra) {
    if (w.distractors.size() == want) break;
    if (taken.insert(chem::canonical_smiles(s)).second) w.distractors.push_back(s);
  }
  if (w.distractors.size() < want) throw std::runtime_error("not enough distractors");
  return w;
}

// Two-level world: target = N(C(=O)core_j)(core_k)core_i, made from the
// intermediate amide N(C(=O)core_j)core_i and bromide_k; the amide in turn
// comes from amine_i and acid chloride_j. Intermediates are in the pool but
// not among the building blocks.
struct RouteTarget {
  std::string target, intermediate;
  std::vector<std::string> last_step;   // intermediate + bromide
  std::vector<std::string> first_step;  // amine + acid chloride
};

struct RouteWorld {
  std::vector<RouteTarget> targets;
  std::vector<ToyReaction> reactions;       // both levels, for training
  std::vector<std::string> candidates;      // building blocks + intermediates
  std::vector<std::string> building_blocks;
};

inline RouteWorld make_route_world(std::uint64_t seed, std::size_t n_targets = 50,
                                   std::size_t n_cores = 40) {
  const auto cores = toy_cores(seed);
  std::mt19937_64 rng(seed ^ 0x51ed270b27a7c6d3ULL);
  RouteWorld w;
  std::set<std::string> blocks;
  for (std::size_t c = 0; c < n_cores; ++c) {
    const auto f = toy_forms(cores[c]);
    for (const auto* s : {&f.amine, &f.bromide, &f.acid_chloride}) {
      w.building_blocks.push_back(*s);
      blocks.insert(chem::canonical_smiles(*s));
    }
  }
  w.candidates = w.building_blocks;
  std::uniform_int_distribution<std::size_t> pick(0, n_cores - 1);
  std::set<std::string> made;
  std::size_t attempts = 0;
  while (w.targets.size() < n_targets) {
    if (++attempts > 100 * n_targets) throw std::runtime_error("route world generation stalled");
    const auto i = pick(rng), j = pick(rng), k = pick(rng);
    RouteTarget t;
    t.intermediate = "N(C(=O)" + cores[j] + ")" + cores[i];
    t.target = "N(C(=O)" + cores[j] + ")(" + cores[k] + ")" + cores[i];
    t.first_step = {toy_forms(cores[i]).amine, toy_forms(cores[j]).acid_chloride};
    t.last_step = {t.intermediate, toy_forms(cores[k]).bromide};
    const auto ci = chem::canonical_smiles(t.intermediate);
    const auto ct = chem::canonical_smiles(t.target);
    if (blocks.count(ci) || blocks.count(ct) || made.count(ci) || made.count(ct)) continue;
    made.insert(ci);
    made.insert(ct);
    w.candidates.push_back(t.intermediate);
    w.reactions.push_back({t.first_step, t.intermediate});
    w.reactions.push_back({t.last_step, t.target});
    w.targets.push_back(std::move(t));
  }
  return w;
}

}  // namespace retcl::testing
