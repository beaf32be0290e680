#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "retcl/data/corpus.hpp"
#include "retcl/index/knn_index.hpp"
#include "retcl/model/encoder.hpp"
#include "retcl/search/search.hpp"
#include "retcl/tensor/ops.hpp"
#include "retcl/tensor/optim.hpp"

namespace retcl::train {

using data::ReactionRecord;
using model::kHaltId;
using model::MolId;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  double clip_norm = 5.0;
  std::size_t total_iters = 200000;
  std::size_t eval_every = 1000;
  std::size_t refresh_every = 1000;
  double tau = 0.1;
  std::size_t hard_k = 4;
  std::uint64_t seed = 0;
  std::size_t perm_threshold = 5;
  // Halt competes in every backward step; false keeps it to the final step.
  bool halt_every_step = true;
  bool use_types = false;
  std::size_t val_cap = 500;
  std::size_t val_beam = 32;
  std::size_t n_max = 4;
  std::size_t log_every = 100;
  std::size_t threads = 1;

  void validate() const {
    sgd().validate();
    if (batch_size == 0 || eval_every == 0 || refresh_every == 0 || perm_threshold == 0 ||
        val_beam == 0 || n_max == 0 || log_every == 0 || threads == 0) {
      throw std::invalid_argument("training counts must be positive");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  }

  tensor::SgdConfig sgd() const { return {learning_rate, momentum, weight_decay, clip_norm}; }
};

// Top-K key neighbors of every anchor molecule among the candidates,
// recomputed from a fresh index snapshot on refresh.
class NeighborTable {
 public:
  void refresh(const model::Model<float>& m, const data::MoleculeTable& mols,
               const std::vector<MolId>& candidates, const std::vector<MolId>& anchors,
               std::size_t k, std::uint64_t step, std::size_t threads = 1) {
    const auto cand_feats = mols.feature_ptrs(candidates);
    handle_.publish(std::make_shared<const index::CandidateIndex>(
        index::CandidateIndex::build(m, cand_feats, candidates, false, step)));
    const auto idx = handle_.current();
    table_.clear();
    if (k == 0 || anchors.empty()) return;
    // Candidates reuse their index rows; other anchors are embedded here.
    std::vector<MolId> missing;
    for (const auto id : anchors) {
      if (!idx->row_of(id)) missing.push_back(id);
    }
    auto extra = model::embed_pool(
                     m, std::span<const chem::FeatureBundle* const>(mols.feature_ptrs(missing)))
                     .keys;
    Tensor<float> keys(anchors.size(), idx->dim());
    std::size_t next_missing = 0;
    std::vector<std::vector<MolId>> excludes;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const auto row = idx->row_of(anchors[i]);
      const auto src = row ? idx->keys().row(*row) : extra.row(next_missing++);
      std::copy(src.begin(), src.end(), keys.row(i).begin());
      excludes.push_back({anchors[i]});
    }
    const auto hits = idx->query_batch(keys, k, excludes, threads);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      auto& list = table_[anchors[i]];
      for (const auto& h : hits[i]) list.push_back(h.id);
    }
  }

  const std::vector<MolId>& of(MolId id) const {
    static const std::vector<MolId> kNone;
    const auto it = table_.find(id);
    return it == table_.end() ? kNone : it->second;
  }

  std::shared_ptr<const index::CandidateIndex> index() const { return handle_.current(); }

 private:
  std::unordered_map<MolId, std::vector<MolId>> table_;
  index::IndexHandle handle_;
};

// Every molecule of the batch plus up to K neighbors of each, ascending.
inline std::vector<MolId> batch_candidates(std::span<const ReactionRecord> batch,
                                           const NeighborTable* neighbors, std::size_t k) {
  std::vector<MolId> base;
  for (const auto& r : batch) {
    base.push_back(r.product);
    base.insert(base.end(), r.reactants.begin(), r.reactants.end());
  }
  std::vector<MolId> out = base;
  if (neighbors && k > 0) {
    for (const auto id : base) {
      const auto& n = neighbors->of(id);
      out.insert(out.end(), n.begin(), n.begin() + std::min(k, n.size()));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Class list of one backward step: every member of C~ except the product,
// plus halt when it competes at this step.
inline std::vector<MolId> backward_classes(const ReactionRecord& rec,
                                           std::span<const MolId> candidates, bool final_step,
                                           bool halt_every_step = true) {
  std::vector<MolId> out;
  for (const auto id : candidates) {
    if (id != rec.product) out.push_back(id);
  }
  if (final_step || halt_every_step) out.push_back(kHaltId);
  return out;
}

// Class list of the forward step: every member of C~ outside the reactants.
inline std::vector<MolId> forward_classes(const ReactionRecord& rec,
                                          std::span<const MolId> candidates) {
  std::vector<MolId> out;
  for (const auto id : candidates) {
    if (!std::binary_search(rec.reactants.begin(), rec.reactants.end(), id)) out.push_back(id);
  }
  return out;
}

template <std::floating_point T>
struct BatchLoss {
  Var backward;  // sum over the batch, not yet averaged
  Var forward;
  Var total;                               // (backward + forward) / |batch|
  std::vector<std::vector<MolId>> orders;  // chosen selection order per reaction
};

namespace detail {

inline model::Mode mode_for(std::size_t rows, model::Mode wanted) {
  return rows >= 2 ? wanted : model::Mode::eval;
}

// Node rows of the given molecules (positions in the graph batch) and a
// row -> slot map for segment sums.
struct RowSubset {
  std::vector<std::uint32_t> rows;
  std::shared_ptr<const std::vector<std::uint32_t>> owner;
};

inline RowSubset row_subset(const std::vector<std::uint32_t>& first_row,
                            const std::vector<std::uint32_t>& atom_counts,
                            const std::vector<std::size_t>& positions) {
  RowSubset s;
  std::vector<std::uint32_t> owner;
  for (std::size_t slot = 0; slot < positions.size(); ++slot) {
    const auto p = positions[slot];
    for (std::uint32_t a = 0; a < atom_counts[p]; ++a) {
      s.rows.push_back(first_row[p] + a);
      owner.push_back(static_cast<std::uint32_t>(slot));
    }
  }
  s.owner = std::make_shared<const std::vector<std::uint32_t>>(std::move(owner));
  return s;
}

inline double cos_row(std::span<const double> q, std::span<const double> unit_key) {
  double dot = 0.0, nq = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    dot += q[i] * unit_key[i];
    nq += q[i] * q[i];
  }
  nq = std::sqrt(nq);
  return nq < 1e-12 ? 0.0 : dot / nq;
}

// log-softmax of `target` over the allowed columns of one score row.
inline double log_prob(const std::vector<double>& scores, const std::vector<std::uint8_t>& allowed,
                       std::size_t target) {
  double mx = scores[target];
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (allowed[j]) mx = std::max(mx, scores[j]);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (allowed[j]) total += std::exp(scores[j] - mx);
  }
  return scores[target] - mx - std::log(total);
}

}  // namespace detail

// Builds both contrastive losses for a batch on `bind`'s tape. All
// embeddings of C~ come from one trunk pass in `mode`; the selection order
// of each reaction maximizes its summed backward log-probability under the
// current values (exhaustive up to perm_threshold reactants, greedy beyond).
template <std::floating_point T>
BatchLoss<T> build_losses(tensor::ParamBinder<T>& bind, const model::Model<T>& model,
                          const data::MoleculeTable& mols, std::span<const ReactionRecord> batch,
                          const std::vector<MolId>& candidates, const TrainConfig& cfg,
                          model::Mode mode = model::Mode::train) {
  if (batch.empty()) throw TrainError("empty batch");
  auto& tape = bind.tape();
  const auto& L = model.layout;
  const auto M = candidates.size();
  std::unordered_map<MolId, std::size_t> col;
  for (std::size_t i = 0; i < M; ++i) col.emplace(candidates[i], i);
  auto col_of = [&](MolId id) {
    const auto it = col.find(id);
    if (it == col.end()) {
      throw TrainError("ReactantNotInCandidates: molecule " + std::to_string(id) +
                       " is missing from the batch candidate set");
    }
    return it->second;
  };
  for (const auto& r : batch) {
    if (r.reactants.empty()) throw TrainError("reaction without reactants");
    if (std::binary_search(r.reactants.begin(), r.reactants.end(), r.product)) {
      throw TrainError("ProductInReactants: product listed as reactant");
    }
    col_of(r.product);
    for (const auto id : r.reactants) col_of(id);
  }

  // Trunk over every member of C~.
  const auto feats = mols.feature_ptrs(candidates);
  const auto graph =
      model::GraphBatch<T>::from_features(std::span<const chem::FeatureBundle* const>(feats));
  std::vector<std::uint32_t> first_row(M), atom_counts(M);
  for (std::uint32_t i = 0, base = 0; i < M; ++i) {
    first_row[i] = base;
    atom_counts[i] = static_cast<std::uint32_t>(feats[i]->atom_count);
    base += atom_counts[i];
  }
  const auto nodes =
      model::embed_nodes(bind, model, graph, detail::mode_for(graph.node_count(), mode));
  const auto key_emb = model::embed_head(bind, model, graph, nodes, model::Head::h,
                                         detail::mode_for(graph.node_count(), mode));

  // f over product rows, g over reactant rows.
  std::vector<MolId> products, reactants;
  for (const auto& r : batch) {
    products.push_back(r.product);
    reactants.insert(reactants.end(), r.reactants.begin(), r.reactants.end());
  }
  for (auto* v : {&products, &reactants}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  auto head_over = [&](const std::vector<MolId>& ids, model::Head head) {
    std::vector<std::size_t> pos;
    for (const auto id : ids) pos.push_back(col_of(id));
    auto sub = detail::row_subset(first_row, atom_counts, pos);
    const auto rows = sub.rows.size();
    return model::embed_head_rows(bind, model,
                                  tensor::gather_rows(tape, nodes, std::move(sub.rows)), sub.owner,
                                  ids.size(), head, detail::mode_for(rows, mode));
  };
  const auto f_emb = head_over(products, model::Head::f);
  const auto g_emb = head_over(reactants, model::Head::g);
  const auto unit_keys = tensor::normalize_rows(tape, key_emb);
  const auto all_keys =
      tensor::concat_rows(tape, {unit_keys, tensor::normalize_rows(tape, bind(L.halt_key))});

  std::unordered_map<MolId, std::size_t> p_slot, r_slot;
  for (std::size_t i = 0; i < products.size(); ++i) p_slot.emplace(products[i], i);
  for (std::size_t i = 0; i < reactants.size(); ++i) r_slot.emplace(reactants[i], i);
  const bool typed = cfg.use_types && std::any_of(batch.begin(), batch.end(),
                                                  [](const auto& r) { return r.type.has_value(); });
  auto type_row = [&](const ReactionRecord& r) -> std::optional<std::size_t> {
    if (!cfg.use_types || !r.type) return std::nullopt;
    if (*r.type < 1 || static_cast<std::size_t>(*r.type) > model.dims.types) {
      throw TrainError("reaction type out of range: " + std::to_string(*r.type));
    }
    return static_cast<std::size_t>(*r.type - 1);
  };

  // Current values, in double, for choosing selection orders.
  const auto& fv = tape.value(f_emb);
  const auto& gv = tape.value(g_emb);
  const auto& kv = tape.value(all_keys);
  const auto& uv = bind.store().value(L.type_u);
  const auto d = model.dims.d;
  const double inv_tau = 1.0 / cfg.tau;

  BatchLoss<T> out;
  std::vector<std::uint32_t> b_targets;
  std::vector<std::uint8_t> b_mask;
  std::vector<std::vector<double>> coef_rows;  // per step over [products; reactants]
  std::vector<std::optional<std::size_t>> step_types;
  for (const auto& r : batch) {
    const auto n = r.reactants.size();
    const auto classes_mid = backward_classes(r, candidates, false, cfg.halt_every_step);
    const auto classes_last = backward_classes(r, candidates, true, cfg.halt_every_step);
    auto mask_of = [&](const std::vector<MolId>& classes) {
      std::vector<std::uint8_t> m(M + 1, 0);
      for (const auto id : classes) m[id == kHaltId ? M : col.at(id)] = 1;
      return m;
    };
    const auto mask_mid = mask_of(classes_mid);
    const auto mask_last = mask_of(classes_last);
    const auto trow = type_row(r);

    // Step log-probabilities for every subset of reactants already given.
    auto subset_scores = [&](const std::vector<bool>& given) {
      std::vector<double> q(d);
      for (std::size_t j = 0; j < d; ++j) {
        q[j] = static_cast<double>(fv(p_slot.at(r.product), j));
        if (trow) q[j] += static_cast<double>(uv(*trow, j));
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!given[i]) continue;
        for (std::size_t j = 0; j < d; ++j)
          q[j] -= static_cast<double>(gv(r_slot.at(r.reactants[i]), j));
      }
      std::vector<double> s(M + 1);
      std::vector<double> key(d);
      for (std::size_t c = 0; c <= M; ++c) {
        for (std::size_t j = 0; j < d; ++j) key[j] = static_cast<double>(kv(c, j));
        s[c] = detail::cos_row(q, key) * inv_tau;
      }
      return s;
    };
    std::vector<std::size_t> order;
    if (n <= cfg.perm_threshold && n < 31) {
      const std::uint32_t full = (1u << n) - 1u;
      std::vector<std::vector<double>> lp(std::size_t{1} << n, std::vector<double>(n + 1, 0.0));
      for (std::uint32_t mask = 0; mask <= full; ++mask) {
        std::vector<bool> given(n);
        for (std::size_t i = 0; i < n; ++i) given[i] = (mask >> i) & 1u;
        const auto s = subset_scores(given);
        for (std::size_t i = 0; i < n; ++i) {
          if (!(mask & (1u << i)))
            lp[mask][i] = detail::log_prob(s, mask_mid, col.at(r.reactants[i]));
        }
        if (mask == full) lp[mask][n] = detail::log_prob(s, mask_last, M);
      }
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      double best = -std::numeric_limits<double>::infinity();
      do {
        double total = lp[full][n];
        std::uint32_t mask = 0;
        for (const auto i : perm) {
          total += lp[mask][i];
          mask |= 1u << i;
        }
        if (order.empty() || total > best) {
          best = total;
          order = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
      std::vector<bool> used(n, false);
      for (std::size_t k = 0; k < n; ++k) {
        const auto s = subset_scores(used);
        std::size_t pick = n;
        double pick_lp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (used[i]) continue;
          const double v = detail::log_prob(s, mask_mid, col.at(r.reactants[i]));
          if (pick == n || v > pick_lp) {
            pick = i;
            pick_lp = v;
          }
        }
        used[pick] = true;
        order.push_back(pick);
      }
    }

    // One score row per step: f(P) (+u) minus the g of the reactants given.
    std::vector<double> coef(products.size() + reactants.size(), 0.0);
    coef[p_slot.at(r.product)] = 1.0;
    std::vector<MolId> chosen;
    for (std::size_t step = 0; step <= n; ++step) {
      coef_rows.push_back(coef);
      step_types.push_back(trow);
      if (step < n) {
        const auto id = r.reactants[order[step]];
        b_targets.push_back(static_cast<std::uint32_t>(col.at(id)));
        b_mask.insert(b_mask.end(), mask_mid.begin(), mask_mid.end());
        coef[products.size() + r_slot.at(id)] -= 1.0;
        chosen.push_back(id);
      } else {
        b_targets.push_back(static_cast<std::uint32_t>(M));
        b_mask.insert(b_mask.end(), mask_last.begin(), mask_last.end());
      }
    }
    out.orders.push_back(std::move(chosen));
  }

  auto to_tensor = [](const std::vector<std::vector<double>>& rows, std::size_t cols) {
    Tensor<T> t(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) t(i, j) = static_cast<T>(rows[i][j]);
    }
    return t;
  };
  auto one_hot = [&](const std::vector<std::optional<std::size_t>>& types) {
    Tensor<T> t(types.size(), model.dims.types);
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (types[i]) t(i, *types[i]) = T{1};
    }
    return t;
  };
  const auto fg = tensor::concat_rows(tape, {f_emb, g_emb});
  auto queries = tensor::matmul(
      tape, tape.constant(to_tensor(coef_rows, products.size() + reactants.size())), fg);
  if (typed) {
    queries = tensor::add(tape, queries,
                          tensor::matmul(tape, tape.constant(one_hot(step_types)), bind(L.type_u)));
  }
  const auto b_scores =
      tensor::scale(tape, tensor::matmul_nt(tape, tensor::normalize_rows(tape, queries), all_keys),
                    static_cast<T>(inv_tau));
  const auto b_lp = tensor::log_softmax_pick(
      tape, b_scores, std::move(b_targets),
      std::make_shared<const std::vector<std::uint8_t>>(std::move(b_mask)));
  out.backward = tensor::scale(tape, tensor::sum(tape, b_lp), T{-1});

  // Forward: sum of g over R (+v) against the keys of C~ \ R.
  std::vector<std::vector<double>> sum_rows;
  std::vector<std::optional<std::size_t>> f_types;
  std::vector<std::uint32_t> f_targets;
  std::vector<std::uint8_t> f_mask;
  for (const auto& r : batch) {
    std::vector<double> row(reactants.size(), 0.0);
    for (const auto id : r.reactants) row[r_slot.at(id)] = 1.0;
    sum_rows.push_back(std::move(row));
    f_types.push_back(type_row(r));
    f_targets.push_back(static_cast<std::uint32_t>(col.at(r.product)));
    std::vector<std::uint8_t> m(M, 0);
    for (const auto id : forward_classes(r, candidates)) m[col.at(id)] = 1;
    f_mask.insert(f_mask.end(), m.begin(), m.end());
  }
  auto reactant_sums =
      tensor::matmul(tape, tape.constant(to_tensor(sum_rows, reactants.size())), g_emb);
  if (typed) {
    reactant_sums = tensor::add(
        tape, reactant_sums, tensor::matmul(tape, tape.constant(one_hot(f_types)), bind(L.type_v)));
  }
  const auto f_scores = tensor::scale(
      tape, tensor::matmul_nt(tape, tensor::normalize_rows(tape, reactant_sums), unit_keys),
      static_cast<T>(inv_tau));
  const auto f_lp = tensor::log_softmax_pick(
      tape, f_scores, std::move(f_targets),
      std::make_shared<const std::vector<std::uint8_t>>(std::move(f_mask)));
  out.forward = tensor::scale(tape, tensor::sum(tape, f_lp), T{-1});
  out.total = tensor::scale(tape, tensor::add(tape, out.backward, out.forward),
                            static_cast<T>(1.0 / static_cast<double>(batch.size())));
  return out;
}

struct StepMetrics {
  std::uint64_t step = 0;
  double loss_b = 0.0;  // batch means
  double loss_f = 0.0;
  double grad_norm = 0.0;     // before clipping
  double clipped_norm = 0.0;  // after clipping
};

// One forward / backward / clip / SGD cycle on the mean batch loss.
template <std::floating_point T>
StepMetrics train_step(model::Model<T>& model, tensor::Sgd<T>& opt, const data::MoleculeTable& mols,
                       std::span<const ReactionRecord> batch, const std::vector<MolId>& candidates,
                       const TrainConfig& cfg) {
  Tape<T> tape;
  tensor::ParamBinder<T> bind(tape, model.store);
  const auto loss = build_losses(bind, model, mols, batch, candidates, cfg);
  tape.backward(loss.total);
  auto grads = bind.gradients();
  StepMetrics m;
  const double scale = 1.0 / static_cast<double>(batch.size());
  m.loss_b = static_cast<double>(tape.value(loss.backward).item()) * scale;
  m.loss_f = static_cast<double>(tape.value(loss.forward).item()) * scale;
  m.grad_norm = tensor::clip_global_norm(grads, cfg.clip_norm);
  m.clipped_norm = tensor::global_norm(grads);
  opt.step(model.store, grads);
  m.step = model.store.step;
  return m;
}

// Top-1 exact match of `model` over (at most `cap`) reactions.
inline double top1_accuracy(const model::Model<float>& m, const data::Corpus& corpus,
                            std::span<const ReactionRecord> records, std::size_t cap,
                            const search::BeamConfig& beam, bool use_types) {
  if (records.empty()) return 0.0;
  const auto n = std::min(cap, records.size());
  const auto feats = corpus.molecules.feature_ptrs(corpus.candidates);
  const search::Predictor pred(m, corpus.candidates, corpus.molecules.names(corpus.candidates),
                               feats);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    const auto emb = pred.embed(corpus.molecules.features(r.product));
    const auto pid = pred.find(corpus.molecules.smiles(r.product));
    std::optional<int> type;
    if (use_types) type = r.type;
    const auto top = search::predict_sets(pred, emb, pid, 1, beam, type);
    hits += !top.empty() && top[0].reactants == r.reactants;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct TrainResult {
  model::Model<float> best;
  std::optional<double> best_val;  // unset when no validation ran
  std::uint64_t best_step = 0;
  std::vector<StepMetrics> history;
};

struct TrainHooks {
  std::ostream* metrics = nullptr;  // line-delimited JSON records
  std::function<void(const model::Model<float>&, double val_top1)> on_improved;
};

// Shuffled epochs over the training split. Hard neighbors are refreshed
// every refresh_every steps (starting before the first), validation runs
// every eval_every steps and at the end. Without a validation split the
// final model is returned.
inline TrainResult train(model::Model<float> model, const data::Corpus& corpus,
                         const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (corpus.train.empty() && cfg.total_iters > 0) throw TrainError("training split is empty");
  if (cfg.use_types && static_cast<std::size_t>(corpus.types) > model.dims.types) {
    throw TrainError("corpus has more reaction types than the model");
  }
  TrainResult result{model, std::nullopt, model.store.step, {}};
  tensor::Sgd<float> opt(cfg.sgd());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();

  std::vector<MolId> anchors;
  for (const auto& r : corpus.train) {
    anchors.push_back(r.product);
    anchors.insert(anchors.end(), r.reactants.begin(), r.reactants.end());
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  NeighborTable neighbors;
  const search::BeamConfig val_beam{cfg.val_beam, cfg.n_max};

  auto log = [&](const StepMetrics& m, std::optional<double> val) {
    if (!hooks.metrics) return;
    nlohmann::json rec{{"step", m.step},
                       {"loss_b", m.loss_b},
                       {"loss_f", m.loss_f},
                       {"grad_norm", m.grad_norm},
                       {"val_top1", nullptr}};
    if (val) rec["val_top1"] = *val;
    *hooks.metrics << rec.dump() << '\n';
  };

  const auto batch_size = std::min(cfg.batch_size, corpus.train.size());
  std::vector<ReactionRecord> batch;
  for (std::size_t it = 0; it < cfg.total_iters; ++it) {
    if (cfg.hard_k > 0 && it % cfg.refresh_every == 0) {
      neighbors.refresh(model, corpus.molecules, corpus.candidates, anchors, cfg.hard_k,
                        model.store.step, cfg.threads);
    }
    batch.clear();
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(corpus.train[order[cursor++]]);
    }
    const auto cands = batch_candidates(batch, cfg.hard_k > 0 ? &neighbors : nullptr, cfg.hard_k);
    const auto m = train_step(model, opt, corpus.molecules, batch, cands, cfg);
    result.history.push_back(m);

    std::optional<double> val;
    const bool last = it + 1 == cfg.total_iters;
    if (!corpus.val.empty() && ((it + 1) % cfg.eval_every == 0 || last)) {
      val = top1_accuracy(model, corpus, corpus.val, cfg.val_cap, val_beam, cfg.use_types);
      if (!result.best_val || *val > *result.best_val) {
        result.best_val = val;
        result.best = model;
        result.best_step = model.store.step;
        if (hooks.on_improved) hooks.on_improved(model, *val);
      }
    }
    if (val || (it + 1) % cfg.log_every == 0 || last) log(m, val);
  }
  if (corpus.val.empty()) {
    result.best = model;
    result.best_step = model.store.step;
  }
  return result;
}

}  // namespace retcl::train
