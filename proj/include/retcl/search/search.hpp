#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "retcl/chem/canonical.hpp"
#include "retcl/chem/features.hpp"
#include "retcl/index/knn_index.hpp"
#include "retcl/model/encoder.hpp"
#include "retcl/model/scoring.hpp"

namespace retcl::search {

using model::Embeddings;
using model::MolId;
using model::ScoredSet;

class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hypothesis {
  std::vector<MolId> chosen;  // selection order
  std::vector<double> query;
  double cum_psi = 0.0;
  bool done = false;
};

struct BeamConfig {
  std::size_t beam = 200;
  std::size_t n_max = 4;
};

struct Prediction {
  ScoredSet set;
  std::vector<std::string> reactants;  // sorted canonical SMILES
};

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

// Everything needed to predict against one candidate pool: a copy of the
// model, the index with its halt row, and cached g/h embeddings of every
// candidate.
class Predictor {
 public:
  Predictor(const model::Model<float>& m, std::vector<MolId> ids,
            std::vector<std::string> canonical, std::span<const chem::FeatureBundle* const> feats,
            std::shared_ptr<const index::CandidateIndex> prebuilt = nullptr)
      : model_(m), ids_(std::move(ids)), canonical_(std::move(canonical)) {
    if (ids_.size() != canonical_.size() || ids_.size() != feats.size()) {
      throw SearchError("candidate ids, names and features must align");
    }
    if (prebuilt) {
      auto expected = ids_;
      expected.push_back(model::kHaltId);
      if (!prebuilt->includes_halt() || prebuilt->ids() != expected ||
          prebuilt->dim() != model_.dims.d) {
        throw SearchError("cached index does not match the candidate pool or model");
      }
      index_ = std::move(prebuilt);
    } else {
      index_ = std::make_shared<const index::CandidateIndex>(
          index::CandidateIndex::build(model_, feats, ids_, true));
    }
    const auto g = model::embed_molecules(model_, feats, model::Head::g);
    const auto h = model::embed_molecules(model_, feats, model::Head::h);
    emb_.resize(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      emb_[i].g = to_double(g.row(i));
      emb_[i].h = to_double(h.row(i));
      slot_.emplace(ids_[i], i);
      by_name_.emplace(canonical_[i], ids_[i]);
    }
    const auto& hk = model_.halt_key();
    halt_ = to_double(hk.data());
    for (std::size_t t = 0; t < model_.dims.types; ++t) {
      u_rows_.push_back(to_double(model_.store.value(model_.layout.type_u).row(t)));
      v_rows_.push_back(to_double(model_.store.value(model_.layout.type_v).row(t)));
    }
  }

  const model::Model<float>& model() const { return model_; }
  const index::CandidateIndex& index() const { return *index_; }
  std::size_t candidate_count() const { return ids_.size(); }
  const std::vector<MolId>& candidate_ids() const { return ids_; }

  const Embeddings& candidate(MolId id) const { return emb_.at(slot_.at(id)); }
  const std::string& name(MolId id) const { return canonical_.at(slot_.at(id)); }
  std::optional<MolId> find(const std::string& canonical) const {
    const auto it = by_name_.find(canonical);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  Embeddings embed(const chem::FeatureBundle& features) const {
    const chem::FeatureBundle* p = &features;
    std::span<const chem::FeatureBundle* const> one(&p, 1);
    Embeddings e;
    e.f = to_double(model::embed_molecules(model_, one, model::Head::f).data());
    e.g = to_double(model::embed_molecules(model_, one, model::Head::g).data());
    e.h = to_double(model::embed_molecules(model_, one, model::Head::h).data());
    return e;
  }

  Embeddings embed(const chem::Molecule& mol) const { return embed(chem::featurize(mol)); }

  // Halt key plus the type biases of `type` (1-based) if given.
  model::ScoreContext context(std::optional<int> type) const {
    model::ScoreContext ctx{halt_, {}, {}};
    if (type) {
      if (*type < 1 || static_cast<std::size_t>(*type) > model_.dims.types) {
        throw SearchError("reaction type out of range: " + std::to_string(*type));
      }
      ctx.u = u_rows_[*type - 1];
      ctx.v = v_rows_[*type - 1];
    }
    return ctx;
  }

 private:
  model::Model<float> model_;
  std::vector<MolId> ids_;
  std::vector<std::string> canonical_;
  std::shared_ptr<const index::CandidateIndex> index_;
  std::vector<Embeddings> emb_;
  std::unordered_map<MolId, std::size_t> slot_;
  std::unordered_map<std::string, MolId> by_name_;
  std::vector<double> halt_;
  std::vector<std::vector<double>> u_rows_, v_rows_;
};

namespace detail {

inline std::vector<MolId> sorted_ids(const std::vector<MolId>& v) {
  auto s = v;
  std::sort(s.begin(), s.end());
  return s;
}

// Keeps the highest cum_psi representative of every id set. Among equal
// scores the earlier entry wins, so the result is deterministic.
inline std::vector<Hypothesis> dedupe(std::vector<Hypothesis> hyps) {
  std::map<std::vector<MolId>, std::size_t> best;
  std::vector<Hypothesis> out;
  for (auto& h : hyps) {
    auto key = sorted_ids(h.chosen);
    const auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(std::move(key), out.size());
      out.push_back(std::move(h));
    } else if (h.cum_psi > out[it->second].cum_psi) {
      out[it->second] = std::move(h);
    }
  }
  return out;
}

}  // namespace detail

// Sequential selection with a beam. Every live hypothesis is extended by
// each admissible candidate and by halt; the best `beam` extensions survive,
// halted ones go to the result bank. Hypotheses still live at depth n_max
// are closed with a forced halt step.
inline std::vector<Hypothesis> beam_search(const Predictor& pred, const Embeddings& product,
                                           std::optional<MolId> product_id,
                                           const BeamConfig& cfg,
                                           std::optional<int> type = std::nullopt) {
  if (pred.candidate_count() == 0) throw SearchError("EmptyIndex: no candidates");
  if (cfg.beam == 0 || cfg.n_max == 0) throw SearchError("beam and n_max must be >= 1");
  const auto ctx = pred.context(type);
  const auto& idx = pred.index();

  struct Ext {
    std::size_t parent;
    MolId id;
    double score;
  };
  std::vector<Hypothesis> live(1);
  live[0].query = model::make_query(product_id.value_or(0), product.f, ctx.u).vector;
  std::vector<Hypothesis> bank;

  for (std::size_t depth = 0; depth < cfg.n_max && !live.empty(); ++depth) {
    std::vector<Ext> ext;
    for (std::size_t p = 0; p < live.size(); ++p) {
      const auto& h = live[p];
      std::vector<MolId> exclude = h.chosen;
      if (product_id) exclude.push_back(*product_id);
      const std::vector<float> q(h.query.begin(), h.query.end());
      // Only the parent's own top `beam` extensions can survive the cut.
      for (const auto& hit : idx.query_topk(q, cfg.beam, exclude)) {
        ext.push_back({p, hit.id, h.cum_psi + hit.score});
      }
    }
    std::stable_sort(ext.begin(), ext.end(), [](const Ext& a, const Ext& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.id < b.id;
    });
    if (ext.size() > cfg.beam) ext.resize(cfg.beam);
    std::vector<Hypothesis> next;
    for (const auto& e : ext) {
      Hypothesis h = live[e.parent];
      h.cum_psi = e.score;
      if (e.id == model::kHaltId) {
        h.done = true;
        bank.push_back(std::move(h));
        continue;
      }
      model::QueryVector qv{std::move(h.query), 0, {}};
      model::subtract_reactant(qv, e.id, pred.candidate(e.id).g);
      h.query = std::move(qv.vector);
      h.chosen.push_back(e.id);
      next.push_back(std::move(h));
    }
    live = detail::dedupe(std::move(next));
  }
  for (auto& h : live) {
    model::QueryVector qv{h.query, 0, {}};
    h.cum_psi += model::psi(qv, ctx.halt_key);
    h.done = true;
    bank.push_back(std::move(h));
  }
  return detail::dedupe(std::move(bank));
}

// Descending score, then fewer reactants, then lexicographic ids.
inline bool ranks_before(const ScoredSet& a, const ScoredSet& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.reactants.size() != b.reactants.size()) return a.reactants.size() < b.reactants.size();
  return a.reactants < b.reactants;
}

inline ScoredSet score_set(const Predictor& pred, MolId product_id, const Embeddings& product,
                           const std::vector<MolId>& ids, const model::ScoreContext& ctx) {
  std::vector<model::ReactantRef> refs;
  for (const auto id : ids) refs.push_back({id, &pred.candidate(id)});
  return model::reaction_score(product_id, product, refs, ctx);
}

inline std::vector<ScoredSet> rank(const Predictor& pred, const Embeddings& product,
                                   std::optional<MolId> product_id,
                                   const std::vector<Hypothesis>& hyps,
                                   std::optional<int> type = std::nullopt) {
  const auto ctx = pred.context(type);
  std::vector<ScoredSet> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) {
    out.push_back(score_set(pred, product_id.value_or(model::kHaltId), product, h.chosen, ctx));
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

inline std::vector<ScoredSet> predict_sets(const Predictor& pred, const Embeddings& product,
                                           std::optional<MolId> product_id, std::size_t k,
                                           const BeamConfig& cfg,
                                           std::optional<int> type = std::nullopt) {
  auto ranked =
      rank(pred, product, product_id, beam_search(pred, product, product_id, cfg, type), type);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

inline std::vector<Prediction> predict_topk(const Predictor& pred, const chem::Molecule& product,
                                            std::size_t k, const BeamConfig& cfg,
                                            std::optional<int> type = std::nullopt) {
  const auto pid = pred.find(chem::canonical_form(product));
  std::vector<Prediction> out;
  for (auto& s : predict_sets(pred, pred.embed(product), pid, k, cfg, type)) {
    Prediction p{std::move(s), {}};
    for (const auto id : p.set.reactants) p.reactants.push_back(pred.name(id));
    std::sort(p.reactants.begin(), p.reactants.end());
    out.push_back(std::move(p));
  }
  return out;
}

struct RouteStep {
  std::string product;
  std::vector<std::string> reactants;
  double score;
};

struct RouteResult {
  bool solved = false;
  double cost = 0.0;
  std::vector<RouteStep> steps;
  std::size_t expansions = 0;
};

struct RouteConfig {
  std::size_t max_expansions = 100;
  std::size_t k_per_step = 5;
  BeamConfig beam{};
};

// Best-first search over sets of molecules still to be made. Expanding a
// node takes its lexicographically first open molecule and branches on the
// top predictions, each adding 1 - score to the cost. Building blocks close
// immediately. Identical open sets are expanded at most once.
inline RouteResult route_search(const Predictor& pred, const std::string& target_canonical,
                                const std::set<std::string>& building_blocks,
                                const RouteConfig& cfg) {
  struct Node {
    std::vector<std::string> open;
    double cost;
    std::vector<RouteStep> steps;
    std::uint64_t seq;
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.cost != b.cost) return a.cost > b.cost;
    return a.seq > b.seq;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> frontier(worse);
  std::set<std::vector<std::string>> closed;
  std::map<std::string, std::vector<Prediction>> memo;
  std::uint64_t seq = 0;

  Node root{{}, 0.0, {}, seq++};
  if (!building_blocks.count(target_canonical)) root.open.push_back(target_canonical);
  frontier.push(std::move(root));
  RouteResult result;
  while (!frontier.empty()) {
    Node node = frontier.top();
    frontier.pop();
    if (node.open.empty()) {
      result.solved = true;
      result.cost = node.cost;
      result.steps = std::move(node.steps);
      return result;
    }
    if (!closed.insert(node.open).second) continue;
    if (result.expansions >= cfg.max_expansions) break;
    ++result.expansions;
    const auto& mol = node.open.front();
    auto it = memo.find(mol);
    if (it == memo.end()) {
      it = memo.emplace(mol, predict_topk(pred, chem::parse_smiles(mol), cfg.k_per_step, cfg.beam))
               .first;
    }
    for (const auto& p : it->second) {
      if (p.reactants.empty()) continue;
      if (std::find(p.reactants.begin(), p.reactants.end(), mol) != p.reactants.end()) continue;
      std::set<std::string> open(node.open.begin() + 1, node.open.end());
      for (const auto& r : p.reactants) {
        if (!building_blocks.count(r)) open.insert(r);
      }
      Node child{{open.begin(), open.end()}, node.cost + (1.0 - p.set.score), node.steps, seq++};
      child.steps.push_back({mol, p.reactants, p.set.score});
      if (closed.count(child.open)) continue;
      frontier.push(std::move(child));
    }
  }
  return result;
}

}  // namespace retcl::search
