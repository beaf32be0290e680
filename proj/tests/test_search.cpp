#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "retcl/chem/canonical.hpp"
#include "retcl/chem/smiles.hpp"
#include "retcl/search/search.hpp"
#include "support/eq1_oracle.hpp"

namespace rc = retcl::chem;
namespace rm = retcl::model;
namespace rs = retcl::search;
using retcl::testing::oracle_score;
using retcl::testing::OracleEmb;

namespace {

const std::vector<std::string> kPool = {"CCO",  "CC(=O)O", "c1ccccc1", "CCN",
                                        "CCCl", "CC(C)O",  "CNC",      "OC(=O)c1ccccc1"};

rm::ModelDims dims() {
  rm::ModelDims d;
  d.d = 16;
  d.layers = 2;
  d.types = 3;
  return d;
}

// Candidate ids are spaced and shuffled so id order and pool order differ.
struct World {
  rm::Model<float> model;
  std::vector<rc::FeatureBundle> feats;
  std::vector<const rc::FeatureBundle*> ptrs;
  std::vector<rm::MolId> ids;
  std::vector<std::string> names;

  explicit World(std::uint64_t seed, const std::vector<std::string>& pool = kPool)
      : model(rm::init_params<float>(seed, dims())) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      feats.push_back(rc::featurize(rc::parse_smiles(pool[i])));
      names.push_back(rc::canonical_smiles(pool[i]));
      ids.push_back(100 + 7 * ((i * 5) % pool.size()));
    }
    for (const auto& f : feats) ptrs.push_back(&f);
  }

  rs::Predictor predictor() const { return rs::Predictor(model, ids, names, ptrs); }
};

OracleEmb oracle_of(const rm::Embeddings& e) { return {e.f, e.g, e.h}; }

std::vector<double> as_double(std::span<const float> v) { return {v.begin(), v.end()}; }

void randomize_types(rm::Model<float>& m, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.f, 0.5f);
  for (auto id : {m.layout.type_u, m.layout.type_v}) {
    for (auto& v : m.store.value(id).data()) v = n(rng);
  }
}

std::set<std::vector<rm::MolId>> id_sets(const std::vector<rs::Hypothesis>& hyps) {
  std::set<std::vector<rm::MolId>> out;
  for (const auto& h : hyps) {
    auto s = h.chosen;
    std::sort(s.begin(), s.end());
    out.insert(s);
  }
  return out;
}

}  // namespace

TEST(BeamSearch, WideBeamBanksEverySmallSubset) {
  const World w(1);
  const auto pred = w.predictor();
  const auto product = pred.embed(rc::parse_smiles("CCOC(C)=O"));
  const auto hyps = rs::beam_search(pred, product, std::nullopt, {200, 2});
  // 1 empty + 8 singletons + 28 pairs.
  EXPECT_EQ(hyps.size(), 37u);
  const auto sets = id_sets(hyps);
  EXPECT_EQ(sets.size(), 37u);
  for (const auto& s : sets) EXPECT_LE(s.size(), 2u);
  for (const auto& h : hyps) EXPECT_TRUE(h.done);
}

TEST(BeamSearch, RankingMatchesOracle) {
  for (const bool typed : {false, true}) {
    World w(2);
    if (typed) randomize_types(w.model, 9);
    const auto pred = w.predictor();
    const std::optional<int> type = typed ? std::optional<int>(2) : std::nullopt;
    const auto product = pred.embed(rc::parse_smiles("CCOC(C)=O"));
    const auto ranked =
        rs::rank(pred, product, std::nullopt,
                 rs::beam_search(pred, product, std::nullopt, {200, 2}, type), type);
    ASSERT_EQ(ranked.size(), 37u);

    const auto halt = as_double(w.model.halt_key().data());
    const auto u = typed ? as_double(w.model.u(2)) : std::vector<double>{};
    const auto v = typed ? as_double(w.model.v(2)) : std::vector<double>{};
    const auto po = oracle_of(product);
    std::map<rm::MolId, OracleEmb> cand;
    for (const auto id : w.ids) cand.emplace(id, oracle_of(pred.candidate(id)));
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      std::vector<const OracleEmb*> set;
      for (const auto id : ranked[i].reactants) set.push_back(&cand.at(id));
      EXPECT_NEAR(ranked[i].score, oracle_score(po, set, halt, u, v), 1e-12);
      if (i > 0) {
        EXPECT_GE(ranked[i - 1].score, ranked[i].score);
      }
    }
  }
}

TEST(BeamSearch, HaltOnTopGivesEmptySet) {
  World w(3);
  const auto mol = rc::parse_smiles("CCOC(C)=O");
  const auto f = rm::embed_molecule(w.model, mol, rm::Head::f);
  auto& hk = w.model.store.value(w.model.layout.halt_key);
  std::copy(f.begin(), f.end(), hk.data().begin());
  const auto pred = w.predictor();
  const auto out = rs::predict_topk(pred, mol, 1, {1, 4});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].reactants.empty());
  EXPECT_TRUE(out[0].set.reactants.empty());
}

TEST(BeamSearch, NeverSelectsProductOrRepeats) {
  const World w(4);
  const auto pred = w.predictor();
  for (const auto& smi : kPool) {
    const auto mol = rc::parse_smiles(smi);
    const auto pid = pred.find(rc::canonical_form(mol));
    ASSERT_TRUE(pid.has_value());
    const auto hyps = rs::beam_search(pred, pred.embed(mol), pid, {16, 3});
    for (const auto& h : hyps) {
      EXPECT_EQ(std::count(h.chosen.begin(), h.chosen.end(), *pid), 0);
      std::set<rm::MolId> uniq(h.chosen.begin(), h.chosen.end());
      EXPECT_EQ(uniq.size(), h.chosen.size());
      EXPECT_LE(h.chosen.size(), 3u);
    }
    for (const auto& p : rs::predict_topk(pred, mol, 10, {16, 3})) {
      EXPECT_EQ(std::count(p.reactants.begin(), p.reactants.end(), rc::canonical_smiles(smi)), 0);
    }
  }
}

TEST(BeamSearch, DeterministicAndDistinct) {
  const World w(5);
  const auto pred = w.predictor();
  const auto mol = rc::parse_smiles("CC(=O)OCC");
  const auto a = rs::predict_topk(pred, mol, 10, {8, 3});
  const auto b = rs::predict_topk(pred, mol, 10, {8, 3});
  ASSERT_EQ(a.size(), b.size());
  std::set<std::vector<rm::MolId>> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].set.reactants, b[i].set.reactants);
    EXPECT_EQ(a[i].set.score, b[i].set.score);
    EXPECT_TRUE(seen.insert(a[i].set.reactants).second);
    EXPECT_TRUE(std::is_sorted(a[i].reactants.begin(), a[i].reactants.end()));
  }
  const auto one = rs::predict_topk(pred, mol, 1, {8, 3});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].set.reactants, a[0].set.reactants);
}

TEST(Rank, OrderInsideHypothesisIsIrrelevant) {
  const World w(6);
  const auto pred = w.predictor();
  const auto product = pred.embed(rc::parse_smiles("CCOC(C)=O"));
  rs::Hypothesis fwd, rev;
  fwd.chosen = {w.ids[0], w.ids[3], w.ids[5]};
  rev.chosen = {w.ids[5], w.ids[0], w.ids[3]};
  const auto a = rs::rank(pred, product, std::nullopt, {fwd});
  const auto b = rs::rank(pred, product, std::nullopt, {rev});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].score, b[0].score);
  EXPECT_EQ(a[0].reactants, b[0].reactants);
  EXPECT_TRUE(std::is_sorted(a[0].reactants.begin(), a[0].reactants.end()));
}

TEST(Rank, TieBreaks) {
  rm::ScoredSet small{{3}, 0.5, {}, 0, 0}, big{{1, 2}, 0.5, {}, 0, 0}, low{{1}, 0.5, {}, 0, 0};
  EXPECT_TRUE(rs::ranks_before(small, big));
  EXPECT_TRUE(rs::ranks_before(low, small));
  rm::ScoredSet better{{1, 2}, 0.6, {}, 0, 0};
  EXPECT_TRUE(rs::ranks_before(better, low));
}

// Narrower beams can only lose: with a beam wide enough to bank every
// subset up to n_max, its top-1 is at least as good as any narrow beam's.
TEST(BeamSearch, ExhaustiveBeamDominatesNarrowBeams) {
  const World w(7);
  const auto pred = w.predictor();
  for (const auto* smi : {"CCOC(C)=O", "CCNC(C)=O", "Clc1ccccc1"}) {
    const auto mol = rc::parse_smiles(smi);
    const double wide = rs::predict_topk(pred, mol, 1, {200, 2})[0].set.score;
    for (const std::size_t beam : {1u, 2u, 4u, 8u}) {
      EXPECT_LE(rs::predict_topk(pred, mol, 1, {beam, 2})[0].set.score, wide + 1e-12);
    }
  }
}

TEST(BeamSearch, RejectsBadConfig) {
  const World w(8);
  const auto pred = w.predictor();
  const auto product = pred.embed(rc::parse_smiles("CCO"));
  EXPECT_THROW(rs::beam_search(pred, product, std::nullopt, {0, 2}), rs::SearchError);
  EXPECT_THROW(rs::beam_search(pred, product, std::nullopt, {2, 0}), rs::SearchError);
  EXPECT_THROW(pred.context(0), rs::SearchError);
  EXPECT_THROW(pred.context(4), rs::SearchError);
}

TEST(Route, TargetAlreadyInStock) {
  const World w(9);
  const auto pred = w.predictor();
  const auto target = rc::canonical_smiles("CCOC(C)=O");
  const auto r = rs::route_search(pred, target, {target}, {});
  EXPECT_TRUE(r.solved);
  EXPECT_EQ(r.cost, 0.0);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.expansions, 0u);
}

TEST(Route, OneStepWhenEveryCandidateIsStock) {
  const World w(10);
  const auto pred = w.predictor();
  const auto target = rc::canonical_smiles("CCOC(C)=O");
  const std::set<std::string> stock(w.names.begin(), w.names.end());
  rs::RouteConfig cfg;
  cfg.beam = {32, 2};
  const auto r = rs::route_search(pred, target, stock, cfg);
  ASSERT_TRUE(r.solved);
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.expansions, 1u);
  EXPECT_EQ(r.steps[0].product, target);
  // Best-first picks the highest scoring non-empty prediction.
  double best = -1e9;
  for (const auto& p : rs::predict_topk(pred, rc::parse_smiles(target), cfg.k_per_step, cfg.beam)) {
    if (!p.reactants.empty()) best = std::max(best, p.set.score);
  }
  EXPECT_DOUBLE_EQ(r.cost, 1.0 - best);
  EXPECT_DOUBLE_EQ(r.steps[0].score, best);
}

TEST(Route, BudgetExhaustion) {
  const World w(11);
  const auto pred = w.predictor();
  const auto target = rc::canonical_smiles("CCOC(C)=O");
  rs::RouteConfig cfg;
  cfg.max_expansions = 0;
  const auto r = rs::route_search(pred, target, {}, cfg);
  EXPECT_FALSE(r.solved);
  EXPECT_EQ(r.expansions, 0u);
  cfg.max_expansions = 3;
  const auto r3 = rs::route_search(pred, target, {}, cfg);
  EXPECT_FALSE(r3.solved);
  EXPECT_LE(r3.expansions, 3u);
}
