#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "retcl/chem/canonical.hpp"
#include "retcl/chem/features.hpp"
#include "retcl/chem/reaction.hpp"
#include "retcl/chem/smiles.hpp"
#include "retcl/model/scoring.hpp"

namespace retcl::data {

using model::MolId;

enum class DataErrc {
  io,
  too_many_errors,
  empty_candidates,
  unknown_molecule,
  corrupt_checkpoint,
  version_mismatch,
  unknown_tensor,
  missing_tensor,
  shape_mismatch,
};

class DataError : public std::runtime_error {
 public:
  DataError(DataErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  DataErrc code() const { return code_; }

 private:
  DataErrc code_;
};

struct ReactionRecord {
  std::vector<MolId> reactants;  // ascending, no repeats
  MolId product = 0;
  std::optional<int> type;

  friend bool operator==(const ReactionRecord&, const ReactionRecord&) = default;
};

// Canonical SMILES <-> dense id, in first-seen order, with cached features.
class MoleculeTable {
 public:
  MolId intern(const chem::Molecule& mol) {
    auto canonical = chem::canonical_form(mol);
    if (const auto it = ids_.find(canonical); it != ids_.end()) return it->second;
    const MolId id = smiles_.size();
    ids_.emplace(canonical, id);
    smiles_.push_back(std::move(canonical));
    features_.push_back(chem::featurize(mol));
    return id;
  }

  MolId intern(std::string_view smiles) { return intern(chem::parse_smiles(smiles)); }

  std::optional<MolId> find(const std::string& canonical) const {
    const auto it = ids_.find(canonical);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return smiles_.size(); }
  const std::string& smiles(MolId id) const { return smiles_.at(id); }
  const chem::FeatureBundle& features(MolId id) const { return features_.at(id); }
  const std::vector<chem::FeatureBundle>& all_features() const { return features_; }

  std::vector<const chem::FeatureBundle*> feature_ptrs(const std::vector<MolId>& ids) const {
    std::vector<const chem::FeatureBundle*> out;
    out.reserve(ids.size());
    for (const auto id : ids) out.push_back(&features_.at(id));
    return out;
  }

  std::vector<std::string> names(const std::vector<MolId>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (const auto id : ids) out.push_back(smiles_.at(id));
    return out;
  }

 private:
  std::vector<std::string> smiles_;
  std::vector<chem::FeatureBundle> features_;
  std::unordered_map<std::string, MolId> ids_;
};

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

struct LoadReport {
  std::size_t lines = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t self_reactions_rejected = 0;
  std::size_t candidate_lines = 0;
  std::vector<std::string> errors;  // "source:line: message"
};

struct Corpus {
  MoleculeTable molecules;
  std::vector<ReactionRecord> train, val, test;
  std::vector<MolId> candidates;  // ascending
  int types = 0;                  // largest type label seen
  LoadReport report;

  std::vector<ReactionRecord>& split(Split s) {
    return s == Split::train ? train : s == Split::val ? val : test;
  }
  const std::vector<ReactionRecord>& split(Split s) const {
    return s == Split::train ? train : s == Split::val ? val : test;
  }

  // Sorted canonical SMILES of a reaction's reactants.
  std::vector<std::string> reactant_names(const ReactionRecord& r) const {
    auto out = molecules.names(r.reactants);
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct LoadOptions {
  double max_error_fraction = 0.01;
};

// Incremental corpus construction from text streams. Each source is checked
// against the error budget as soon as it is consumed.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(LoadOptions opts = {}) : opts_(opts) {}

  void add_reactions(std::istream& in, Split split, const std::string& source) {
    auto& out = corpus_.split(split);
    auto& seen = seen_[static_cast<int>(split)];
    std::size_t lines = 0, failed = 0, number = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++number;
      if (chem::trim(line).empty()) continue;
      ++lines;
      try {
        const auto parsed = chem::parse_reaction(line);
        if (parsed.type && *parsed.type < 1) {
          throw chem::ChemError(chem::ChemErrc::malformed_reaction, "reaction type must be >= 1");
        }
        ReactionRecord rec;
        rec.product = corpus_.molecules.intern(parsed.product);
        for (const auto& r : parsed.reactants) rec.reactants.push_back(corpus_.molecules.intern(r));
        std::sort(rec.reactants.begin(), rec.reactants.end());
        rec.reactants.erase(std::unique(rec.reactants.begin(), rec.reactants.end()),
                            rec.reactants.end());
        rec.type = parsed.type;
        if (std::binary_search(rec.reactants.begin(), rec.reactants.end(), rec.product)) {
          ++corpus_.report.self_reactions_rejected;
          continue;
        }
        if (!seen.insert({rec.reactants, rec.product, rec.type.value_or(0)}).second) {
          ++corpus_.report.duplicates_dropped;
          continue;
        }
        if (rec.type) corpus_.types = std::max(corpus_.types, *rec.type);
        out.push_back(std::move(rec));
      } catch (const std::exception& e) {
        ++failed;
        corpus_.report.errors.push_back(source + ":" + std::to_string(number) + ": " + e.what());
      }
    }
    corpus_.report.lines += lines;
    check_budget(source, lines, failed);
  }

  // One molecule per line; anything after the first whitespace is ignored.
  void add_candidates(std::istream& in, const std::string& source) {
    std::size_t lines = 0, failed = 0, number = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++number;
      const auto body = chem::trim(line);
      if (body.empty()) continue;
      ++lines;
      const auto token = body.substr(0, body.find_first_of(" \t"));
      try {
        explicit_candidates_.insert(corpus_.molecules.intern(token));
      } catch (const std::exception& e) {
        ++failed;
        corpus_.report.errors.push_back(source + ":" + std::to_string(number) + ": " + e.what());
      }
    }
    corpus_.report.candidate_lines += lines;
    have_candidate_file_ = true;
    if (lines == 0) {
      throw DataError(DataErrc::empty_candidates, source + ": candidate file is empty");
    }
    check_budget(source, lines, failed);
  }

  // Without a candidate file the pool is every reactant of every split.
  Corpus finish() && {
    std::set<MolId> pool = explicit_candidates_;
    if (!have_candidate_file_) {
      for (const auto s : {Split::train, Split::val, Split::test}) {
        for (const auto& r : corpus_.split(s)) pool.insert(r.reactants.begin(), r.reactants.end());
      }
    }
    if (pool.empty()) throw DataError(DataErrc::empty_candidates, "candidate pool is empty");
    corpus_.candidates.assign(pool.begin(), pool.end());
    return std::move(corpus_);
  }

 private:
  void check_budget(const std::string& source, std::size_t lines, std::size_t failed) const {
    if (failed > 0 && static_cast<double>(failed) > opts_.max_error_fraction * lines) {
      throw DataError(DataErrc::too_many_errors,
                      source + ": " + std::to_string(failed) + " of " + std::to_string(lines) +
                          " lines failed to parse; first: " +
                          corpus_.report.errors[corpus_.report.errors.size() - failed]);
    }
  }

  LoadOptions opts_;
  Corpus corpus_;
  std::set<std::tuple<std::vector<MolId>, MolId, int>> seen_[3];
  std::set<MolId> explicit_candidates_;
  bool have_candidate_file_ = false;
};

struct CorpusPaths {
  std::string train, val, test;
  std::string candidates;  // empty: derive from reactants
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrc::io, "cannot open " + path);
  return in;
}

inline Corpus load_corpus(const CorpusPaths& paths, LoadOptions opts = {}) {
  CorpusBuilder b(opts);
  // Candidates first, so their ids do not depend on which splits are given.
  if (!paths.candidates.empty()) {
    auto in = open_input(paths.candidates);
    b.add_candidates(in, paths.candidates);
  }
  const std::pair<const std::string*, Split> splits[] = {
      {&paths.train, Split::train}, {&paths.val, Split::val}, {&paths.test, Split::test}};
  for (const auto& [path, split] : splits) {
    if (path->empty()) continue;
    auto in = open_input(*path);
    b.add_reactions(in, split, *path);
  }
  return std::move(b).finish();
}

// Fraction of products whose true reactant set is among the first k
// predictions, for each k. Sets compare after sorting and removing repeats.
inline std::vector<double> topk_exact_match(
    const std::vector<std::vector<std::vector<std::string>>>& predictions,
    const std::vector<std::vector<std::string>>& truth, const std::vector<std::size_t>& ks) {
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("predictions and truth differ in length");
  }
  auto as_set = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  // First rank (1-based) at which the truth appears, 0 if never.
  std::vector<std::size_t> first_hit(truth.size(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = as_set(truth[i]);
    for (std::size_t r = 0; r < predictions[i].size(); ++r) {
      if (as_set(predictions[i][r]) == t) {
        first_hit[i] = r + 1;
        break;
      }
    }
  }
  std::vector<double> out;
  for (const auto k : ks) {
    std::size_t hits = 0;
    for (const auto h : first_hit) hits += (h != 0 && h <= k);
    out.push_back(truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size());
  }
  return out;
}

}  // namespace retcl::data
