#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "retcl/chem/canonical.hpp"
#include "retcl/chem/reaction.hpp"
#include "retcl/chem/smiles.hpp"
#include "retcl/data/checkpoint.hpp"
#include "retcl/data/corpus.hpp"
#include "retcl/index/knn_index.hpp"
#include "retcl/search/search.hpp"
#include "retcl/train/train.hpp"
#include "retcl/util/parallel.hpp"

namespace retcl::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2 };

// Splices the flags of a JSON config file (given to a subcommand as
// --config PATH) into the argument list, right after the subcommand name.
// Keys are long flag names without dashes; underscores and dashes are
// interchangeable. A key is skipped when the same flag is also given
// explicitly, so explicit flags take precedence.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::size_t sub = 1;
  while (sub < args.size() && !args[sub].empty() && args[sub][0] == '-') ++sub;
  std::string path;
  std::set<std::string> explicit_flags;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const auto name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    if (name == "config") {
      if (eq != std::string::npos) {
        path = a.substr(eq + 1);
      } else if (i + 1 < args.size()) {
        path = args[i + 1];
      }
    }
    explicit_flags.insert(name);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw data::DataError(data::DataErrc::io, "cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw CLI::ValidationError("config " + path + " must be a JSON object");
  std::vector<std::string> flags;
  for (const auto& [key, value] : doc.items()) {
    auto name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw CLI::ValidationError("config files cannot nest");
    if (explicit_flags.count(name)) continue;
    auto text = [&](const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean() || v.is_number()) return v.dump();
      throw CLI::ValidationError("config value for '" + key + "' must be a scalar or a list");
    };
    const auto values = value.is_array() ? value : nlohmann::json::array({value});
    for (const auto& v : values) flags.push_back("--" + name + "=" + text(v));
  }
  auto out = args;
  out.insert(out.begin() + static_cast<long>(std::min(sub + 1, out.size())), flags.begin(),
             flags.end());
  return out;
}

struct PoolPaths {
  std::string train, val, test, candidates;
  double max_error_fraction = 0.01;

  data::Corpus load() const {
    if (train.empty() && val.empty() && test.empty() && candidates.empty()) {
      throw CLI::ValidationError("give --candidates or at least one reaction file");
    }
    data::LoadOptions opts;
    opts.max_error_fraction = max_error_fraction;
    return data::load_corpus({train, val, test, candidates}, opts);
  }
};

struct Options {
  PoolPaths paths;
  train::TrainConfig train;
  model::ModelDims dims;
  std::string checkpoint, index_cache, output, input, metrics, predictions, building_blocks;
  std::string config;
  std::vector<std::string> targets;
  std::size_t k = 10;
  std::size_t beam = 200;
  std::vector<std::size_t> ks{1, 3, 5, 10, 20, 50};
  std::size_t max_expansions = 100;
  std::size_t route_k = 5;
};

// Output sink: a file when a path is given, otherwise the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw data::DataError(data::DataErrc::io, "cannot write " + path);
    }
    os_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

// Lines of `path`, or of `fallback` when the path is empty or "-".
inline std::vector<std::string> read_lines(const std::string& path, std::istream& fallback) {
  std::vector<std::string> lines;
  std::string line;
  if (path.empty() || path == "-") {
    while (std::getline(fallback, line)) lines.push_back(line);
  } else {
    auto in = data::open_input(path);
    while (std::getline(in, line)) lines.push_back(line);
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * fraction);
  return buf;
}

inline std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", score);
  return buf;
}

inline search::Predictor make_predictor(const model::Model<float>& m, const data::Corpus& corpus,
                                        const std::string& index_cache) {
  std::shared_ptr<const index::CandidateIndex> cached;
  if (!index_cache.empty()) {
    cached = std::make_shared<const index::CandidateIndex>(
        index::CandidateIndex::load(index_cache));
  }
  const auto feats = corpus.molecules.feature_ptrs(corpus.candidates);
  return search::Predictor(m, corpus.candidates, corpus.molecules.names(corpus.candidates), feats,
                           std::move(cached));
}

struct ProductQuery {
  chem::Molecule mol;
  std::string canonical;
  std::optional<int> type;
};

// "SMILES [type]" per non-empty line.
inline std::vector<ProductQuery> parse_products(const std::vector<std::string>& lines,
                                                const std::string& source) {
  std::vector<ProductQuery> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto body = chem::trim(lines[i]);
    if (body.empty()) continue;
    std::istringstream fields{std::string(body)};
    std::string smiles, type_text;
    fields >> smiles >> type_text;
    try {
      ProductQuery q{chem::parse_smiles(smiles), "", std::nullopt};
      q.canonical = chem::canonical_form(q.mol);
      if (!type_text.empty()) {
        std::size_t used = 0;
        const int t = std::stoi(type_text, &used);
        if (used != type_text.size() || t < 1) throw std::invalid_argument("bad type");
        q.type = t;
      }
      out.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw data::DataError(data::DataErrc::io,
                            source + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<std::vector<search::Prediction>> predict_all(
    const search::Predictor& pred, const std::vector<ProductQuery>& queries, std::size_t k,
    const search::BeamConfig& beam, bool use_types, std::size_t threads) {
  std::vector<std::vector<search::Prediction>> out(queries.size());
  util::parallel_for(queries.size(), threads, [&](std::size_t i) {
    std::optional<int> type;
    if (use_types) type = queries[i].type;
    out[i] = search::predict_topk(pred, queries[i].mol, k, beam, type);
  });
  return out;
}

// Prediction file: the canonical product on its own line, then one
// "rank<TAB>score<TAB>reactants" line per prediction with reactants joined
// by '.', and an empty reactant field for the empty set.
inline void write_predictions(std::ostream& os, const std::vector<ProductQuery>& queries,
                              const std::vector<std::vector<search::Prediction>>& preds) {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    os << queries[i].canonical << '\n';
    for (std::size_t r = 0; r < preds[i].size(); ++r) {
      os << r + 1 << '\t' << format_score(preds[i][r].set.score) << '\t'
         << join(preds[i][r].reactants, '.') << '\n';
    }
  }
}

struct PredictionBlock {
  std::string product;
  std::vector<std::vector<std::string>> sets;
};

inline std::vector<PredictionBlock> read_predictions(const std::string& path) {
  auto in = data::open_input(path);
  std::vector<PredictionBlock> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (chem::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      out.push_back({chem::canonical_smiles(chem::trim(line)), {}});
      continue;
    }
    if (out.empty()) {
      throw data::DataError(data::DataErrc::io, path + ":" + std::to_string(number) +
                                                    ": prediction before any product line");
    }
    const auto last_tab = line.rfind('\t');
    const auto field = line.substr(last_tab + 1);
    std::vector<std::string> set;
    std::size_t start = 0;
    while (start < field.size()) {
      const auto dot = std::min(field.find('.', start), field.size());
      if (dot > start) set.push_back(chem::canonical_smiles(field.substr(start, dot - start)));
      start = dot + 1;
    }
    out.back().sets.push_back(std::move(set));
  }
  return out;
}

inline void write_topk_table(std::ostream& os, const std::vector<std::size_t>& ks,
                             const std::vector<double>& acc, std::size_t products) {
  os << "products\t" << products << '\n';
  os << "k\ttop_k\n";
  for (std::size_t i = 0; i < ks.size(); ++i) os << ks[i] << '\t' << format_percent(acc[i]) << '\n';
}

inline void add_pool_flags(CLI::App* sub, PoolPaths& p, bool with_test = true) {
  sub->add_option("--train", p.train, "Training reactions, one 'reactants>>product [type]' per line");
  sub->add_option("--val", p.val, "Validation reactions");
  if (with_test) sub->add_option("--test", p.test, "Test reactions");
  sub->add_option("--candidates", p.candidates,
                  "Candidate molecules, one SMILES per line (default: every reactant of the "
                  "reaction files)");
  sub->add_option("--max-error-fraction", p.max_error_fraction,
                  "Abort loading when more than this fraction of a file's lines fail")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
}

inline void add_search_flags(CLI::App* sub, Options& o) {
  sub->add_option("--beam", o.beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--n-max", o.train.n_max, "Most reactants per prediction")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_flag("--use-types", o.train.use_types,
                "Condition on the reaction type given after each product");
  sub->add_option("--threads", o.train.threads, "Worker threads; 1 is fully deterministic")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--index-cache", o.index_cache, "Candidate index written by 'index'");
}

inline void add_train_flags(CLI::App* sub, Options& o) {
  auto& t = o.train;
  sub->add_option("--learning-rate", t.learning_rate, "SGD learning rate")->capture_default_str();
  sub->add_option("--momentum", t.momentum, "SGD momentum")->capture_default_str();
  sub->add_option("--weight-decay", t.weight_decay, "L2 weight decay")->capture_default_str();
  sub->add_option("--batch-size", t.batch_size, "Reactions per step")->capture_default_str();
  sub->add_option("--clip-norm", t.clip_norm, "Global gradient norm clip")->capture_default_str();
  sub->add_option("--total-iters", t.total_iters, "Training steps")->capture_default_str();
  sub->add_option("--eval-every", t.eval_every, "Steps between validation runs")
      ->capture_default_str();
  sub->add_option("--refresh-every", t.refresh_every, "Steps between hard-neighbor refreshes")
      ->capture_default_str();
  sub->add_option("--tau", t.tau, "Softmax temperature")->capture_default_str();
  sub->add_option("--hard-k", t.hard_k, "Nearest neighbors added per batch molecule")
      ->capture_default_str();
  sub->add_option("--seed", t.seed, "Seed for initialization and shuffling")->capture_default_str();
  sub->add_option("--perm-threshold", t.perm_threshold,
                  "Largest reactant count whose selection orders are searched exhaustively")
      ->capture_default_str();
  sub->add_option("--halt-every-step", t.halt_every_step,
                  "Let the stop key compete at every backward step (false: final step only)")
      ->capture_default_str();
  sub->add_flag("--use-types", t.use_types, "Train the reaction-type biases");
  sub->add_option("--val-cap", t.val_cap, "Most validation reactions scored per evaluation")
      ->capture_default_str();
  sub->add_option("--val-beam", t.val_beam, "Beam width during validation")->capture_default_str();
  sub->add_option("--n-max", t.n_max, "Most reactants per prediction during validation")
      ->capture_default_str();
  sub->add_option("--log-every", t.log_every, "Steps between metric records")
      ->capture_default_str();
  sub->add_option("--threads", t.threads, "Worker threads; 1 is fully deterministic")
      ->capture_default_str();
  sub->add_option("--dim", o.dims.d, "Embedding width")->capture_default_str()->check(
      CLI::PositiveNumber);
  sub->add_option("--layers", o.dims.layers, "Message-passing layers")->capture_default_str();
  sub->add_option("--types", o.dims.types, "Reaction type slots in the model")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

inline void with_config(CLI::App* sub, std::string& path) {
  sub->add_option("--config", path, "JSON object of flag values; explicit flags take precedence");
}

inline int cmd_canon(const Options& o, std::istream& in, std::ostream& out) {
  Sink sink(o.output, out);
  const auto lines = read_lines(o.input, in);
  const std::string source = o.input.empty() ? "stdin" : o.input;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto body = chem::trim(lines[i]);
    if (body.empty()) continue;
    try {
      *sink << chem::canonical_smiles(body.substr(0, body.find_first_of(" \t"))) << '\n';
    } catch (const std::exception& e) {
      throw data::DataError(data::DataErrc::io,
                            source + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return kOk;
}

inline int cmd_train(Options o, std::ostream& out) {
  o.train.validate();
  const auto corpus = o.paths.load();
  if (o.train.use_types && static_cast<std::size_t>(corpus.types) > o.dims.types) {
    throw CLI::ValidationError("--types is smaller than the largest reaction type in the data");
  }
  std::unique_ptr<Sink> metrics;
  train::TrainHooks hooks;
  if (!o.metrics.empty()) {
    metrics = std::make_unique<Sink>(o.metrics, out);
    hooks.metrics = &**metrics;
  }
  auto model = model::init_params<float>(o.train.seed, o.dims);
  const auto result = train::train(std::move(model), corpus, o.train, hooks);
  data::save_checkpoint({result.best, o.train.tau, o.train.seed}, o.checkpoint);
  out << "step\t" << result.best_step << "\tval_top1\t"
      << (result.best_val ? format_percent(*result.best_val) : std::string("n/a")) << '\n';
  return kOk;
}

inline int cmd_index(const Options& o, std::ostream& out) {
  const auto ck = data::load_checkpoint(o.checkpoint);
  const auto corpus = o.paths.load();
  const auto feats = corpus.molecules.feature_ptrs(corpus.candidates);
  const auto idx = index::CandidateIndex::build(ck.model, feats, corpus.candidates, true,
                                                ck.model.store.step);
  idx.save(o.index_cache);
  out << "candidates\t" << corpus.candidates.size() << "\tdim\t" << idx.dim() << '\n';
  return kOk;
}

inline int cmd_predict(const Options& o, std::istream& in, std::ostream& out) {
  const auto ck = data::load_checkpoint(o.checkpoint);
  const auto corpus = o.paths.load();
  const auto pred = make_predictor(ck.model, corpus, o.index_cache);
  const auto queries = parse_products(read_lines(o.input, in), o.input.empty() ? "stdin" : o.input);
  const auto preds =
      predict_all(pred, queries, o.k, {o.beam, o.train.n_max}, o.train.use_types, o.train.threads);
  Sink sink(o.output, out);
  write_predictions(*sink, queries, preds);
  return kOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
  if (o.ks.empty()) throw CLI::ValidationError("--ks needs at least one value");
  const auto max_k = *std::max_element(o.ks.begin(), o.ks.end());
  std::vector<std::vector<std::string>> truth;
  std::vector<std::vector<std::vector<std::string>>> predicted;
  if (!o.predictions.empty()) {
    if (o.paths.test.empty()) throw CLI::ValidationError("--predictions needs --test");
    data::CorpusBuilder b({o.paths.max_error_fraction});
    auto in = data::open_input(o.paths.test);
    b.add_reactions(in, data::Split::test, o.paths.test);
    const auto corpus = std::move(b).finish();
    const auto blocks = read_predictions(o.predictions);
    if (blocks.size() != corpus.test.size()) {
      throw data::DataError(data::DataErrc::io,
                            "prediction file has " + std::to_string(blocks.size()) +
                                " products but the test split has " +
                                std::to_string(corpus.test.size()));
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& r = corpus.test[i];
      if (blocks[i].product != corpus.molecules.smiles(r.product)) {
        throw data::DataError(data::DataErrc::io, "prediction block " + std::to_string(i + 1) +
                                                      " is for a different product");
      }
      truth.push_back(corpus.reactant_names(r));
      predicted.push_back(blocks[i].sets);
    }
  } else {
    if (o.paths.test.empty()) throw CLI::ValidationError("evaluate needs --test");
    const auto ck = data::load_checkpoint(o.checkpoint);
    const auto corpus = o.paths.load();
    const auto pred = make_predictor(ck.model, corpus, o.index_cache);
    std::vector<ProductQuery> queries;
    for (const auto& r : corpus.test) {
      queries.push_back({chem::parse_smiles(corpus.molecules.smiles(r.product)),
                         corpus.molecules.smiles(r.product), r.type});
      truth.push_back(corpus.reactant_names(r));
    }
    const auto preds = predict_all(pred, queries, max_k, {o.beam, o.train.n_max},
                                   o.train.use_types, o.train.threads);
    for (const auto& list : preds) {
      predicted.emplace_back();
      for (const auto& p : list) predicted.back().push_back(p.reactants);
    }
  }
  Sink sink(o.output, out);
  write_topk_table(*sink, o.ks, data::topk_exact_match(predicted, truth, o.ks), truth.size());
  return kOk;
}

inline int cmd_route(const Options& o, std::istream& in, std::ostream& out) {
  const auto ck = data::load_checkpoint(o.checkpoint);
  const auto corpus = o.paths.load();
  const auto pred = make_predictor(ck.model, corpus, o.index_cache);
  std::set<std::string> blocks;
  if (o.building_blocks.empty()) {
    for (const auto id : corpus.candidates) blocks.insert(corpus.molecules.smiles(id));
  } else {
    auto lines = read_lines(o.building_blocks, in);
    for (const auto& q : parse_products(lines, o.building_blocks)) blocks.insert(q.canonical);
  }
  std::vector<ProductQuery> targets;
  if (!o.targets.empty()) {
    targets = parse_products(o.targets, "--target");
  } else {
    targets = parse_products(read_lines(o.input, in), o.input.empty() ? "stdin" : o.input);
  }
  search::RouteConfig cfg{o.max_expansions, o.route_k, {o.beam, o.train.n_max}};
  Sink sink(o.output, out);
  for (const auto& t : targets) {
    const auto r = search::route_search(pred, t.canonical, blocks, cfg);
    *sink << t.canonical << '\t' << (r.solved ? "solved" : "unsolved") << '\t'
          << format_score(r.cost) << '\t' << r.expansions << '\n';
    for (const auto& s : r.steps) {
      *sink << '\t' << s.product << "\t<=\t" << join(s.reactants, '.') << '\t'
            << format_score(s.score) << '\n';
    }
  }
  return kOk;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

// Parses argv and runs one subcommand. Returns 0 on success, 1 on a usage
// error and 2 on a data error, with a one-line diagnostic on `err`.
inline int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Retrosynthesis by contrastive retrieval over a candidate pool", "retcl"};
  app.require_subcommand(1);
  Options o;

  auto* canon = app.add_subcommand("canon", "Print the canonical SMILES of each input line");
  canon->add_option("--input", o.input, "Input file (default: standard input)");
  canon->add_option("--output", o.output, "Output file (default: standard output)");

  auto* train = app.add_subcommand("train", "Train a model and save the best checkpoint");
  with_config(train, o.config);
  add_pool_flags(train, o.paths, false);
  add_train_flags(train, o);
  train->add_option("--checkpoint", o.checkpoint, "Where to write the checkpoint")->required();
  train->add_option("--metrics", o.metrics, "Line-delimited JSON metrics file");

  auto* idx = app.add_subcommand("index", "Embed the candidate pool and cache the index");
  with_config(idx, o.config);
  add_pool_flags(idx, o.paths);
  idx->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  idx->add_option("--index-cache", o.index_cache, "Where to write the index")->required();

  auto* predict = app.add_subcommand("predict", "Rank reactant sets for each product");
  with_config(predict, o.config);
  add_pool_flags(predict, o.paths);
  add_search_flags(predict, o);
  predict->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  predict->add_option("--input", o.input,
                      "Products, one 'SMILES [type]' per line (default: standard input)");
  predict->add_option("--output", o.output, "Output file (default: standard output)");
  predict->add_option("-k,--k", o.k, "Predictions per product")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Top-k exact match on the test split");
  with_config(evaluate, o.config);
  add_pool_flags(evaluate, o.paths);
  add_search_flags(evaluate, o);
  evaluate->add_option("--checkpoint", o.checkpoint, "Model checkpoint (unless --predictions)");
  evaluate->add_option("--predictions", o.predictions,
                       "Score an existing prediction file instead of running the model");
  evaluate->add_option("--ks", o.ks, "Cutoffs to report")->capture_default_str()->check(
      CLI::PositiveNumber);
  evaluate->add_option("--output", o.output, "Output file (default: standard output)");

  auto* route = app.add_subcommand("route", "Multi-step route search down to building blocks");
  with_config(route, o.config);
  add_pool_flags(route, o.paths);
  add_search_flags(route, o);
  route->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  route->add_option("--target", o.targets, "Target SMILES (repeatable)");
  route->add_option("--input", o.input, "Targets, one per line (default: standard input)");
  route->add_option("--building-blocks", o.building_blocks,
                    "Purchasable molecules, one per line (default: the candidate pool)");
  route->add_option("--max-expansions", o.max_expansions, "Node expansion budget per target")
      ->capture_default_str();
  route->add_option("--per-step", o.route_k, "Predictions branched on per expansion")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  route->add_option("--output", o.output, "Output file (default: standard output)");

  std::vector<std::string> args(argv, argv + argc);
  std::vector<const char*> expanded;
  try {
    args = expand_config(args);
    for (const auto& a : args) expanded.push_back(a.c_str());
    app.parse(static_cast<int>(expanded.size()), expanded.data());
  } catch (const data::DataError& e) {
    err << "retcl: data error: " << one_line(e.what()) << '\n';
    return kDataError;
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "retcl: usage error: " << one_line(e.what()) << '\n';
    return kUsage;
  }

  try {
    if (canon->parsed()) return cmd_canon(o, in, out);
    if (train->parsed()) return cmd_train(o, out);
    if (idx->parsed()) return cmd_index(o, out);
    if (predict->parsed()) return cmd_predict(o, in, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out);
    return cmd_route(o, in, out);
  } catch (const CLI::Error& e) {
    err << "retcl: usage error: " << one_line(e.what()) << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "retcl: usage error: " << one_line(e.what()) << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "retcl: data error: " << one_line(e.what()) << '\n';
    return kDataError;
  }
}

}  // namespace retcl::cli
