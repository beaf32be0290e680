// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "retcl/chem/canonical.hpp"
#include "retcl/chem/molecule.hpp"
#include "retcl/chem/smiles.hpp"
#include "retcl/cli/cli.hpp"
#include "retcl/data/corpus.hpp"
#include "retcl/index/knn_index.hpp"
#include "retcl/model/encoder.hpp"
#include "retcl/model/scoring.hpp"
#include "retcl/search/search.hpp"
#include "retcl/train/train.hpp"
#include "support/eq1_oracle.hpp"
#include "support/finite_diff.hpp"
#include "support/generic_point.hpp"
#include "support/graph_oracle.hpp"
#include "support/knn_oracle.hpp"
#include "support/toy_world.hpp"

namespace fs = std::filesystem;
namespace rc = retcl::chem;
namespace rd = retcl::data;
namespace ri = retcl::index;
namespace rm = retcl::model;
namespace rs = retcl::search;
namespace rt = retcl::tensor;
namespace rtr = retcl::train;
namespace rx = retcl::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool soft = false;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// Toy-scale model shared by the training criteria.
rm::ModelDims toy_dims() {
  rm::ModelDims d;
  d.d = 32;
  d.layers = 2;
  d.types = 1;
  return d;
}

rtr::TrainConfig toy_config() {
  rtr::TrainConfig cfg;  // tau 0.1, K 4, lr 0.01 and the other defaults
  cfg.batch_size = 16;
  cfg.total_iters = 2000;
  return cfg;
}

std::string lines_of(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += s + "\n";
  return out;
}

std::string reaction_text(const std::vector<rx::ToyReaction>& rs) {
  std::string out;
  for (const auto& r : rs) out += rx::toy_line(r) + "\n";
  return out;
}

rd::Corpus corpus_from(const std::string& candidates, const std::string& train) {
  rd::CorpusBuilder b;
  std::istringstream ci(candidates), ti(train);
  b.add_candidates(ci, "candidates");
  b.add_reactions(ti, rd::Split::train, "train");
  return std::move(b).finish();
}

rs::Predictor predictor_for(const rm::Model<float>& m, const rd::Corpus& c) {
  const auto feats = c.molecules.feature_ptrs(c.candidates);
  return rs::Predictor(m, c.candidates, c.molecules.names(c.candidates), feats);
}

// Fraction of training reactions whose reactant set is ranked first / in the top five.
std::pair<double, double> train_topk(const rm::Model<float>& m, const rd::Corpus& c) {
  const auto pred = predictor_for(m, c);
  std::size_t h1 = 0, h5 = 0;
  for (const auto& r : c.train) {
    const auto top =
        rs::predict_sets(pred, pred.embed(c.molecules.features(r.product)),
                         pred.find(c.molecules.smiles(r.product)), 5, rs::BeamConfig{200, 3});
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (top[i].reactants == r.reactants) {
        h1 += i == 0;
        ++h5;
      }
    }
  }
  const double n = static_cast<double>(c.train.size());
  return {h1 / n, h5 / n};
}

template <class V>
double max_rel_diff(const V& a, const V& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  return diff / std::max(scale, 1e-12);
}

// Every distinct molecule of the toy world, including distractors.
std::vector<rc::Molecule> toy_molecules(const rx::ToyWorld& w) {
  std::vector<std::string> smiles = w.candidates;
  smiles.insert(smiles.end(), w.distractors.begin(), w.distractors.end());
  for (const auto& r : w.reactions) smiles.push_back(r.product);
  std::set<std::string> seen;
  std::vector<rc::Molecule> out;
  for (const auto& s : smiles) {
    auto m = rc::parse_smiles(s);
    if (seen.insert(rc::canonical_form(m)).second) out.push_back(std::move(m));
  }
  return out;
}

Outcome criterion_readme() {
  std::ifstream in(std::string(RETCL_SOURCE_DIR) + "/README.md");
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  const bool ok = text.find("not reproducible at desk scale") != std::string::npos;
  return {ok, ok ? "README documents the full-scale gap; criteria 2-12 stand in for it"
                 : "README.md lacks the desk-scale statement"};
}

Outcome criterion_gradient() {
  const auto t0 = Clock::now();
  // Molecules of at most 10 heavy atoms drawn from the fragment grammar.
  const auto w = rx::make_toy_world(3, 60, 40, 1);
  std::vector<std::string> small;
  for (const auto& s : w.candidates) {
    if (rc::parse_smiles(s).atom_count() <= 10) small.push_back(s);
  }
  rm::ModelDims dims;
  dims.d = 6;
  dims.layers = 2;
  dims.types = 3;
  rx::GradCheck worst;
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    rd::MoleculeTable mols;
    std::shuffle(small.begin(), small.end(), rng);
    for (std::size_t i = 0; i < 14; ++i) mols.intern(small[i]);
    std::vector<rd::ReactionRecord> batch;
    std::uniform_int_distribution<int> type(1, 3), count(1, 3);
    for (rd::MolId p = 0; p < 4; ++p) {
      rd::ReactionRecord r;
      r.product = p;
      std::set<rd::MolId> rs;
      const int n = count(rng);
      while (static_cast<int>(rs.size()) < n) rs.insert(4 + rng() % 10);
      r.reactants.assign(rs.begin(), rs.end());
      r.type = type(rng);
      batch.push_back(r);
    }
    std::vector<rd::MolId> cands(mols.size());
    for (std::size_t i = 0; i < cands.size(); ++i) cands[i] = i;

    auto m = rm::init_params<double>(100 + trial, dims);
    rx::randomize_offsets(m, 200 + trial);
    rtr::TrainConfig cfg;
    cfg.use_types = trial != 1;
    cfg.halt_every_step = trial != 2;
    auto loss = [&] {
      rt::Tape<double> tape;
      rt::ParamBinder<double> bind(tape, m.store, false);
      const auto l = rtr::build_losses(bind, m, mols, batch, cands, cfg);
      return tape.value(l.total).item();
    };
    std::vector<rt::Tensor<double>> analytic;
    {
      rt::Tape<double> tape;
      rt::ParamBinder<double> bind(tape, m.store);
      const auto l = rtr::build_losses(bind, m, mols, batch, cands, cfg);
      tape.backward(l.total);
      analytic = bind.gradients();
    }
    std::vector<rt::Tensor<double>*> targets;
    std::vector<rt::Tensor<double>> wanted;
    for (std::size_t i = 0; i < m.store.size(); ++i) {
      if (!rt::trainable(m.store.params()[i].kind)) continue;
      targets.push_back(&m.store.params()[i].value);
      wanted.push_back(analytic[i]);
    }
    const auto r = rx::finite_difference_check(targets, wanted, loss, 1e-5);
    worst.max_rel = std::max(worst.max_rel, r.max_rel);
    worst.max_abs = std::max(worst.max_abs, r.max_abs);
    worst.checked += r.checked;
  }
  const double secs = seconds_since(t0);
  return {worst.max_rel < 1e-4 && secs < 60.0,
          "max rel err " + fmt("%.2e", worst.max_rel) + " over " +
              std::to_string(worst.checked) + " entries, 3 batches, " + fmt("%.1f s", secs)};
}

Outcome criterion_search_oracle() {
  const auto t0 = Clock::now();
  const auto w = rx::make_toy_world(5, 60, 10, 1);
  std::vector<std::string> pool = w.candidates;
  pool.insert(pool.end(), w.distractors.begin(), w.distractors.end());
  std::mt19937_64 rng(33);
  rm::ModelDims dims;
  dims.d = 16;
  dims.layers = 2;
  dims.types = 1;
  std::size_t mismatches = 0, compared = 0;
  for (int world = 0; world < 50; ++world) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto model = rm::init_params<float>(1000 + world, dims);
    std::vector<rc::FeatureBundle> feats;
    std::vector<rm::MolId> ids;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < 8; ++i) {
      feats.push_back(rc::featurize(rc::parse_smiles(pool[i])));
      names.push_back(rc::canonical_smiles(pool[i]));
      ids.push_back(10 + (i * 3) % 8);
    }
    std::vector<const rc::FeatureBundle*> ptrs;
    for (const auto& f : feats) ptrs.push_back(&f);
    const rs::Predictor pred(model, ids, names, ptrs);
    const auto product = rc::parse_smiles(pool[8]);
    const auto got = rs::predict_topk(pred, product, 100, rs::BeamConfig{200, 2});

    const auto pe = pred.embed(product);
    const rx::OracleEmb po{pe.f, pe.g, pe.h};
    std::map<rm::MolId, rx::OracleEmb> ce;
    for (const auto id : ids) {
      const auto& e = pred.candidate(id);
      ce[id] = {e.f, e.g, e.h};
    }
    std::vector<double> halt(model.halt_key().data().begin(), model.halt_key().data().end());
    std::vector<rm::ScoredSet> want;
    auto add = [&](std::vector<rm::MolId> set) {
      std::vector<const rx::OracleEmb*> refs;
      for (const auto id : set) refs.push_back(&ce[id]);
      std::sort(set.begin(), set.end());
      rm::ScoredSet s;
      s.reactants = set;
      s.score = rx::oracle_score(po, refs, halt);
      want.push_back(s);
    };
    add({});
    for (std::size_t a = 0; a < ids.size(); ++a) {
      add({ids[a]});
      for (std::size_t b = a + 1; b < ids.size(); ++b) add({ids[a], ids[b]});
    }
    std::sort(want.begin(), want.end(), rs::ranks_before);
    ++compared;
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].set.reactants == want[i].reactants &&
             std::abs(got[i].set.score - want[i].score) < 1e-9;
    }
    mismatches += !same;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 30.0,
          std::to_string(compared - mismatches) + "/" + std::to_string(compared) +
              " worlds rank all 37 subsets exactly as the exhaustive oracle, " +
              fmt("%.1f s", secs)};
}

struct ToyRun {
  rx::ToyWorld world;
  rm::Model<float> model;
  double train_seconds = 0.0;
  double top1 = 0.0, top5 = 0.0, eval_seconds = 0.0;
};

ToyRun run_toy() {
  ToyRun run{rx::make_toy_world(1), {}, 0.0};
  const auto corpus = corpus_from(lines_of(run.world.candidates), reaction_text(run.world.reactions));
  const auto t0 = Clock::now();
  run.model = rtr::train(rm::init_params<float>(0, toy_dims()), corpus, toy_config()).best;
  run.train_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  std::tie(run.top1, run.top5) = train_topk(run.model, corpus);
  run.eval_seconds = seconds_since(t1);
  return run;
}

Outcome criterion_memorization(const ToyRun& run) {
  const double total = run.train_seconds + run.eval_seconds;
  return {run.top1 >= 0.90 && run.top5 >= 0.98 && total < 300.0,
          "100 reactions, 300 candidates: train top-1 " + fmt("%.1f%%", 100 * run.top1) +
              ", top-5 " + fmt("%.1f%%", 100 * run.top5) + " after 2000 steps (" +
              fmt("%.1f s", total) + ")"};
}

Outcome criterion_unseen(const ToyRun& run) {
  const auto corpus =
      corpus_from(lines_of(run.world.candidates) + lines_of(run.world.distractors),
                  reaction_text(run.world.reactions));
  const auto [top1, top5] = train_topk(run.model, corpus);
  const double drop = run.top5 - top5;
  return {drop <= 0.10, "pool " + std::to_string(corpus.candidates.size()) + " (+" +
                            std::to_string(run.world.distractors.size()) + " distractors): top-5 " +
                            fmt("%.1f%%", 100 * top5) + ", drop " + fmt("%.1f points", 100 * drop) +
                            ", top-1 " + fmt("%.1f%%", 100 * top1)};
}

Outcome criterion_index() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(44);
  std::size_t instances = 0, queries = 0, failures = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = inst < 100 ? 1 + rng() % 256 : 257 + rng() % 1744;
    const std::size_t d = 1 + rng() % 128;
    // Coarse values and copied rows produce exact score ties.
    std::uniform_int_distribution<int> coarse(-3, 3);
    rt::Tensor<float> keys(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      if (r > 0 && rng() % 5 == 0) {
        const auto src = rng() % r;
        for (std::size_t j = 0; j < d; ++j) keys(r, j) = keys(src, j);
      } else {
        for (std::size_t j = 0; j < d; ++j) keys(r, j) = static_cast<float>(coarse(rng));
      }
    }
    std::vector<rm::MolId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = 7 * i + (i * 13) % 5;
    std::shuffle(ids.begin(), ids.end(), rng);
    const ri::CandidateIndex index(keys, ids, false);
    std::vector<float> q(d);
    for (auto& v : q) v = static_cast<float>(coarse(rng));
    std::set<std::uint64_t> exclude;
    for (int e = 0; e < 3; ++e) exclude.insert(ids[rng() % n]);
    const std::vector<rm::MolId> excl(exclude.begin(), exclude.end());
    const auto full = rx::naive_topk(index.keys(), ids, q, n, exclude);
    std::vector<std::size_t> ks;
    if (n <= 256) {
      for (std::size_t k = 0; k <= n + 2; ++k) ks.push_back(k);
    } else {
      ks = {0, 1, 2, 3, 5, 10, 50, 100, 200, n / 2, n - 4, n - 3, n, n + 5};
      for (int i = 0; i < 10; ++i) ks.push_back(rng() % n);
    }
    for (const auto k : ks) {
      const auto hits = index.query_topk(q, k, excl);
      const auto want = std::min(k, full.size());
      bool ok = hits.size() == want;
      for (std::size_t i = 0; ok && i < want; ++i) ok = hits[i].id == full[i].first;
      failures += !ok;
      ++queries;
    }
    ++instances;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 10.0,
          std::to_string(queries - failures) + "/" + std::to_string(queries) + " queries over " +
              std::to_string(instances) + " instances match the naive scan id for id, " +
              fmt("%.1f s", secs)};
}

Outcome criterion_encoder(const ToyRun& run) {
  const auto mols = toy_molecules(run.world);
  std::mt19937_64 rng(55);
  double perm = 0.0, additive = 0.0, doubling = 0.0;
  const auto heads = {rm::Head::f, rm::Head::g, rm::Head::h};
  for (std::size_t i = 0; i < mols.size(); ++i) {
    const auto& m = mols[i];
    const auto& other = mols[(i + 1) % mols.size()];
    const auto shuffled = rc::renumber_atoms(m, rx::random_permutation(m.atom_count(), rng));
    const auto both = rc::disjoint_union(m, other);
    const auto twice = rc::disjoint_union(m, m);
    for (const auto head : heads) {
      const auto e = rm::embed_molecule(run.model, m, head);
      perm = std::max(perm, max_rel_diff(rm::embed_molecule(run.model, shuffled, head), e));
      auto sum = e;
      const auto eo = rm::embed_molecule(run.model, other, head);
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += eo[j];
      additive = std::max(additive, max_rel_diff(rm::embed_molecule(run.model, both, head), sum));
      auto dbl = e;
      for (auto& v : dbl) v *= 2.0f;
      doubling = std::max(doubling, max_rel_diff(rm::embed_molecule(run.model, twice, head), dbl));
    }
  }
  return {perm <= 1e-5 && additive <= 1e-5 && doubling <= 1e-5,
          std::to_string(mols.size()) + " molecules, 3 heads: permutation " +
              fmt("%.1e", perm) + ", additivity " + fmt("%.1e", additive) + ", M+M vs 2M " +
              fmt("%.1e", doubling)};
}

Outcome criterion_order_invariance() {
  std::mt19937_64 rng(66);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto vec = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = nd(rng);
    return v;
  };
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 4 + rng() % 29;
    const auto n = rng() % 5;
    const rm::Embeddings p{vec(d), vec(d), vec(d)};
    std::vector<rm::Embeddings> es(n);
    std::vector<rm::ReactantRef> refs;
    for (std::size_t i = 0; i < n; ++i) {
      es[i] = {vec(d), vec(d), vec(d)};
      refs.push_back({1 + rng() % 1000000 * 8 + i, &es[i]});
    }
    const auto halt = vec(d), u = vec(d), v = vec(d);
    const bool typed = t % 2 == 1;
    const rm::ScoreContext ctx{halt, typed ? std::span<const double>(u) : std::span<const double>(),
                               typed ? std::span<const double>(v) : std::span<const double>()};
    const auto base = rm::reaction_score(0, p, refs, ctx);
    for (int r = 0; r < 10; ++r) {
      std::shuffle(refs.begin(), refs.end(), rng);
      const auto s = rm::reaction_score(0, p, refs, ctx);
      bad += std::memcmp(&s.score, &base.score, sizeof(double)) != 0 ||
             s.reactants != base.reactants;
    }
  }
  return {bad == 0, "1000 sets of up to 4 reactants x 10 orderings: " + std::to_string(bad) +
                        " scores differ in any bit"};
}

Outcome criterion_parser(const ToyRun& run) {
  const auto t0 = Clock::now();
  const auto mols = toy_molecules(run.world);
  std::vector<std::string> canon;
  for (const auto& m : mols) canon.push_back(rc::canonical_form(m));
  std::mt19937_64 rng(77);
  std::size_t rewrite_bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& m = mols[i % mols.size()];
    const auto order = rx::random_permutation(m.atom_count(), rng);
    const auto text = rc::write_smiles(m, std::span<const std::uint32_t>(order));
    rewrite_bad += rc::canonical_form(rc::parse_smiles(text)) != canon[i % mols.size()];
  }
  const std::string alphabet = "CNOSPFIBrcnos()[]=#@+-123456789%.Hl/\\*:$ ";
  std::size_t fuzz_ok = 0, fuzz_bad = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string s(rng() % 33, ' ');
    for (auto& ch : s) {
      ch = rng() % 4 == 0 ? static_cast<char>(rng() % 256) : alphabet[rng() % alphabet.size()];
    }
    try {
      const auto m = rc::parse_smiles(s, {.allow_fragments = true});
      rc::canonical_form(m);
      ++fuzz_ok;
    } catch (const rc::ChemError&) {
      ++fuzz_ok;
    } catch (...) {
      ++fuzz_bad;
    }
  }
  std::size_t iso_checked = 0, iso_bad = 0;
  for (std::size_t i = 0; i < mols.size(); ++i) {
    if (mols[i].atom_count() > 16) continue;
    ++iso_checked;
    iso_bad += !rx::isomorphic(mols[i], rc::parse_smiles(canon[i]));
  }
  return {rewrite_bad == 0 && fuzz_bad == 0 && iso_bad == 0,
          "10000 rewrites: " + std::to_string(rewrite_bad) + " canonical mismatches; 100000 fuzz "
              "inputs: " + std::to_string(fuzz_bad) + " unexpected failures; " +
              std::to_string(iso_checked) + " round trips: " + std::to_string(iso_bad) +
              " non-isomorphic (" + fmt("%.1f s", seconds_since(t0)) + ")"};
}

Outcome criterion_determinism() {
  const auto w = rx::make_toy_world(9);
  const auto dir = fs::temp_directory_path() / ("retcl_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto file = [&](const std::string& name, const std::string& text) {
    const auto p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
  };
  const std::vector<rx::ToyReaction> val(w.reactions.begin(), w.reactions.begin() + 20);
  const std::vector<rx::ToyReaction> train(w.reactions.begin() + 20, w.reactions.end());
  const auto train_path = file("train.txt", reaction_text(train));
  const auto val_path = file("val.txt", reaction_text(val));
  const auto cand_path = file("candidates.txt", lines_of(w.candidates));
  auto run = [&](const std::string& ckpt) {
    const std::vector<std::string> args = {
        "retcl", "train", "--train", train_path, "--val", val_path, "--candidates", cand_path,
        "--checkpoint", (dir / ckpt).string(), "--dim", "32", "--layers", "2", "--types", "1",
        "--batch-size", "16", "--total-iters", "150", "--refresh-every", "50", "--eval-every",
        "50", "--seed", "3", "--threads", "1"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in;
    std::ostringstream out, err;
    const int code = retcl::cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
    std::ifstream f(dir / ckpt, std::ios::binary);
    return std::make_pair(code, std::string((std::istreambuf_iterator<char>(f)), {}));
  };
  const auto a = run("a.ckpt");
  const auto b = run("b.ckpt");
  fs::remove_all(dir);
  const bool ok = a.first == 0 && b.first == 0 && !a.second.empty() && a.second == b.second;
  return {ok, "two train runs (150 steps, refresh and validation included): checkpoints of " +
                  std::to_string(a.second.size()) + " bytes are " +
                  (a.second == b.second ? "identical" : "different")};
}

Outcome criterion_throughput() {
  const std::size_t n = 100000, d = 256;
  std::mt19937_64 rng(88);
  std::normal_distribution<float> nd(0.f, 1.f);
  rt::Tensor<float> keys(n, d);
  for (auto& v : keys.data()) v = nd(rng);
  std::vector<rm::MolId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  const ri::CandidateIndex index(std::move(keys), std::move(ids), false);
  std::vector<double> ms;
  for (int t = 0; t < 21; ++t) {
    std::vector<float> q(d);
    for (auto& v : q) v = nd(rng);
    const auto t0 = Clock::now();
    const auto hits = index.query_topk(q, 200);
    ms.push_back(1000.0 * seconds_since(t0));
    if (hits.size() != 200) return {false, "query returned " + std::to_string(hits.size())};
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  const auto cores = std::thread::hardware_concurrency();
  return {median <= 50.0,
          "top-200 over 100000 x 256, single-threaded query: median " + fmt("%.1f ms", median) +
              " (" + std::to_string(cores) + " hardware thread" + (cores == 1 ? "" : "s") + ")",
          true};
}

Outcome criterion_route() {
  const auto t0 = Clock::now();
  const auto w = rx::make_route_world(2);
  const auto corpus = corpus_from(lines_of(w.candidates), reaction_text(w.reactions));
  const auto model = rtr::train(rm::init_params<float>(0, toy_dims()), corpus, toy_config()).best;
  const auto pred = predictor_for(model, corpus);
  std::set<std::string> blocks;
  for (const auto& s : w.building_blocks) blocks.insert(rc::canonical_smiles(s));
  auto canon_set = [](std::vector<std::string> v) {
    for (auto& s : v) s = rc::canonical_smiles(s);
    std::sort(v.begin(), v.end());
    return v;
  };
  std::size_t recovered = 0, solved = 0, expansions = 0;
  for (const auto& t : w.targets) {
    const auto r = rs::route_search(pred, rc::canonical_smiles(t.target), blocks,
                                    rs::RouteConfig{100, 5, rs::BeamConfig{200, 3}});
    solved += r.solved;
    expansions = std::max(expansions, r.expansions);
    recovered += r.solved && r.steps.size() == 2 &&
                 r.steps[0].product == rc::canonical_smiles(t.target) &&
                 r.steps[0].reactants == canon_set(t.last_step) &&
                 r.steps[1].product == rc::canonical_smiles(t.intermediate) &&
                 r.steps[1].reactants == canon_set(t.first_step);
  }
  const double frac = static_cast<double>(recovered) / w.targets.size();
  return {frac >= 0.90, std::to_string(recovered) + "/" + std::to_string(w.targets.size()) +
                            " planted routes recovered (" + std::to_string(solved) +
                            " solved, at most " + std::to_string(expansions) +
                            " expansions, " + fmt("%.1f s", seconds_since(t0)) + " incl. training)"};
}

}  // namespace

int main() {
  const std::vector<std::string> names = {
      "full-scale gap documented",    "end-to-end gradient check",   "beam search vs exhaustive",
      "toy memorization",             "unseen-candidate robustness", "index exactness",
      "encoder invariants",           "score order invariance",      "parser robustness",
      "training determinism",         "retrieval throughput",        "multi-step routes"};
  std::vector<Outcome> results(12);
  auto guarded = [](auto&& fn) -> Outcome {
    try {
      return fn();
    } catch (const std::exception& e) {
      return {false, std::string("threw: ") + e.what()};
    }
  };
  results[0] = guarded(criterion_readme);
  results[1] = guarded(criterion_gradient);
  results[2] = guarded(criterion_search_oracle);
  std::optional<ToyRun> toy;
  try {
    toy = run_toy();
  } catch (const std::exception& e) {
    for (const int i : {3, 4, 6, 8}) results[i] = {false, std::string("toy run threw: ") + e.what()};
  }
  if (toy) {
    results[3] = guarded([&] { return criterion_memorization(*toy); });
    results[4] = guarded([&] { return criterion_unseen(*toy); });
    results[6] = guarded([&] { return criterion_encoder(*toy); });
    results[8] = guarded([&] { return criterion_parser(*toy); });
  }
  results[5] = guarded(criterion_index);
  results[7] = guarded(criterion_order_invariance);
  results[9] = guarded(criterion_determinism);
  results[10] = guarded(criterion_throughput);
  results[11] = guarded(criterion_route);

  bool all = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::cout << "criterion " << (i + 1 < 10 ? " " : "") << i + 1 << ": "
              << (r.pass ? "PASS" : "FAIL") << (r.soft ? " (soft)" : "") << "  " << names[i]
              << ": " << r.detail << std::endl;
    if (!r.pass && !r.soft) all = false;
  }
  return all ? 0 : 1;
}
