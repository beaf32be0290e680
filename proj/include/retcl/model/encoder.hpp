#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "retcl/chem/features.hpp"
#include "retcl/chem/molecule.hpp"
#include "retcl/tensor/ops.hpp"
#include "retcl/tensor/param_store.hpp"
#include "retcl/tensor/tape.hpp"

namespace retcl::model {

using tensor::ParamBinder;
using tensor::ParamId;
using tensor::ParamKind;
using tensor::ParamStore;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

enum class Head : std::uint8_t { f = 0, g = 1, h = 2 };
enum class Mode : std::uint8_t { train, eval };

inline const char* head_name(Head h) {
  switch (h) {
    case Head::f: return "f";
    case Head::g: return "g";
    case Head::h: return "h";
  }
  return "?";
}

struct ModelDims {
  std::size_t d_atom = chem::kAtomFeatureDim;
  std::size_t d_bond = chem::kBondFeatureDim;
  std::size_t d = 256;
  std::size_t layers = 5;
  std::size_t types = 10;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Trainable scalar count as a closed form of the dimensions.
inline std::size_t expected_trainable_count(const ModelDims& m) {
  const auto d = m.d;
  const std::size_t bn = 2 * d;
  const std::size_t layer0 = m.d_atom * d + m.d_bond * d + bn;
  const std::size_t layer = d * d + m.d_bond * d + bn + d * d + bn;
  const std::size_t last = d * d + d;
  const std::size_t head = d * d + bn + d * d + bn;
  return layer0 + m.layers * layer + last + 3 * head + 2 * m.types * d + d;
}

struct BatchNormIds {
  ParamId gamma, beta, mean, var;
};

struct LayerIds {
  ParamId w1, w_bond, w2;
  BatchNormIds bn1, bn2;
};

struct HeadIds {
  ParamId w1, w2;
  BatchNormIds bn1, bn2;
};

// Parameter handles resolved by name, so a store loaded from disk works the
// same as a freshly initialized one.
struct Layout {
  ParamId w0_atom, w0_bond;
  BatchNormIds bn0;
  std::vector<LayerIds> layers;
  ParamId w_last, b_last;
  HeadIds heads[3];
  ParamId type_u, type_v, halt_key;

  template <class T>
  static Layout resolve(const ParamStore<T>& s, std::size_t layers) {
    auto bn = [&](const std::string& p) {
      return BatchNormIds{s.id(p + ".gamma"), s.id(p + ".beta"), s.id(p + ".running_mean"),
                          s.id(p + ".running_var")};
    };
    Layout out;
    out.w0_atom = s.id("gnn.0.w_atom");
    out.w0_bond = s.id("gnn.0.w_bond");
    out.bn0 = bn("gnn.0.bn");
    for (std::size_t l = 1; l <= layers; ++l) {
      const auto p = "gnn." + std::to_string(l);
      out.layers.push_back(
          {s.id(p + ".w1"), s.id(p + ".w_bond"), s.id(p + ".w2"), bn(p + ".bn1"), bn(p + ".bn2")});
    }
    out.w_last = s.id("gnn.last.w");
    out.b_last = s.id("gnn.last.b");
    for (const Head h : {Head::f, Head::g, Head::h}) {
      const auto p = std::string("head.") + head_name(h);
      out.heads[static_cast<int>(h)] = {s.id(p + ".w1"), s.id(p + ".w2"), bn(p + ".bn1"),
                                        bn(p + ".bn2")};
    }
    out.type_u = s.id("type.u");
    out.type_v = s.id("type.v");
    out.halt_key = s.id("halt_key");
    return out;
  }
};

template <std::floating_point T>
struct Model {
  ModelDims dims;
  ParamStore<T> store;
  Layout layout;

  const Tensor<T>& halt_key() const { return store.value(layout.halt_key); }
  // Row t-1 of the type bias tables (types are 1-based).
  std::span<const T> u(int type) const { return store.value(layout.type_u).row(type - 1); }
  std::span<const T> v(int type) const { return store.value(layout.type_v).row(type - 1); }

  template <std::floating_point U>
  Model<U> cast() const {
    Model<U> out{dims, store.template cast<U>(), {}};
    out.layout = Layout::resolve(out.store, dims.layers);
    return out;
  }
};

// Weights uniform in +-1/sqrt(fan_in), halt key likewise with fan_in = d;
// BN scale 1, shifts, biases, type biases and running means 0; running
// variances 1.
template <std::floating_point T>
Model<T> init_params(std::uint64_t seed, const ModelDims& dims) {
  if (dims.d == 0 || dims.d_atom == 0 || dims.d_bond == 0 || dims.types == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  Model<T> m;
  m.dims = dims;
  auto& s = m.store;
  auto uniform = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> t(rows, cols);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
  };
  const auto d = dims.d;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    s.add(name, ParamKind::weight, uniform(in, out, in));
  };
  auto bn = [&](const std::string& p) {
    s.add(p + ".gamma", ParamKind::norm_scale, Tensor<T>(1, d, T{1}));
    s.add(p + ".beta", ParamKind::norm_shift, Tensor<T>(1, d));
    s.add(p + ".running_mean", ParamKind::buffer, Tensor<T>(1, d));
    s.add(p + ".running_var", ParamKind::buffer, Tensor<T>(1, d, T{1}));
  };
  weight("gnn.0.w_atom", dims.d_atom, d);
  weight("gnn.0.w_bond", dims.d_bond, d);
  bn("gnn.0.bn");
  for (std::size_t l = 1; l <= dims.layers; ++l) {
    const auto p = "gnn." + std::to_string(l);
    weight(p + ".w1", d, d);
    weight(p + ".w_bond", dims.d_bond, d);
    bn(p + ".bn1");
    weight(p + ".w2", d, d);
    bn(p + ".bn2");
  }
  weight("gnn.last.w", d, d);
  s.add("gnn.last.b", ParamKind::bias, Tensor<T>(1, d));
  for (const Head h : {Head::f, Head::g, Head::h}) {
    const auto p = std::string("head.") + head_name(h);
    weight(p + ".w1", d, d);
    bn(p + ".bn1");
    weight(p + ".w2", d, d);
    bn(p + ".bn2");
  }
  s.add("type.u", ParamKind::embedding, Tensor<T>(dims.types, d));
  s.add("type.v", ParamKind::embedding, Tensor<T>(dims.types, d));
  s.add("halt_key", ParamKind::embedding, uniform(1, d, d));
  m.layout = Layout::resolve(s, dims.layers);
  return m;
}

// Several molecules flattened into one disconnected graph.
template <std::floating_point T>
struct GraphBatch {
  std::size_t molecule_count = 0;
  Tensor<T> atom_features;      // nodes x d_atom
  Tensor<T> bond_neighbor_sum;  // nodes x d_bond: sum of incoming edge features
  std::vector<std::uint32_t> edge_src;
  std::shared_ptr<const std::vector<std::uint32_t>> edge_dst;
  std::shared_ptr<const std::vector<std::uint32_t>> node_molecule;

  std::size_t node_count() const { return atom_features.rows(); }

  static GraphBatch from_features(std::span<const chem::FeatureBundle* const> bundles) {
    GraphBatch b;
    b.molecule_count = bundles.size();
    std::size_t nodes = 0, edges = 0;
    for (const auto* f : bundles) {
      nodes += f->atom_count;
      edges += f->edge_count();
    }
    b.atom_features = Tensor<T>(nodes, chem::kAtomFeatureDim);
    b.bond_neighbor_sum = Tensor<T>(nodes, chem::kBondFeatureDim);
    b.edge_src.reserve(edges);
    std::vector<std::uint32_t> dst, owner;
    dst.reserve(edges);
    owner.reserve(nodes);
    std::uint32_t base = 0;
    for (std::size_t m = 0; m < bundles.size(); ++m) {
      const auto& f = *bundles[m];
      std::copy(f.atom_features.begin(), f.atom_features.end(),
                b.atom_features.data().begin() + std::size_t{base} * chem::kAtomFeatureDim);
      for (std::size_t e = 0; e < f.edge_count(); ++e) {
        b.edge_src.push_back(base + f.edge_src[e]);
        dst.push_back(base + f.edge_dst[e]);
        auto row = b.bond_neighbor_sum.row(base + f.edge_dst[e]);
        for (std::size_t k = 0; k < row.size(); ++k) {
          row[k] += f.bond_features[e * chem::kBondFeatureDim + k];
        }
      }
      owner.insert(owner.end(), f.atom_count, static_cast<std::uint32_t>(m));
      base += static_cast<std::uint32_t>(f.atom_count);
    }
    b.edge_dst = std::make_shared<const std::vector<std::uint32_t>>(std::move(dst));
    b.node_molecule = std::make_shared<const std::vector<std::uint32_t>>(std::move(owner));
    return b;
  }

  static GraphBatch from_features(const std::vector<chem::FeatureBundle>& bundles) {
    std::vector<const chem::FeatureBundle*> ptrs;
    for (const auto& f : bundles) ptrs.push_back(&f);
    return from_features(std::span<const chem::FeatureBundle* const>(ptrs));
  }
};

namespace detail {

template <class T>
Var batchnorm(ParamBinder<T>& bind, Var x, const BatchNormIds& ids, Mode mode) {
  auto& tape = bind.tape();
  auto& store = bind.store();
  const auto gamma = bind(ids.gamma);
  const auto beta = bind(ids.beta);
  if (mode == Mode::train) {
    return tensor::batchnorm_train(tape, x, gamma, beta, store.value(ids.mean),
                                   store.value(ids.var));
  }
  return tensor::batchnorm_eval(tape, x, gamma, beta, store.value(ids.mean),
                                store.value(ids.var));
}

}  // namespace detail

// Node embeddings H (nodes x d) of the shared trunk. Train mode normalizes
// over all node rows of the batch and updates running statistics.
template <std::floating_point T>
Var embed_nodes(ParamBinder<T>& bind, const Model<T>& model, const GraphBatch<T>& batch,
                Mode mode) {
  auto& tape = bind.tape();
  const auto& L = model.layout;
  if (batch.atom_features.cols() != model.dims.d_atom ||
      batch.bond_neighbor_sum.cols() != model.dims.d_bond) {
    throw tensor::TensorError(tensor::TensorErrc::shape_mismatch,
                              "feature width does not match the model");
  }
  const auto n = batch.node_count();
  const auto x = tape.constant(batch.atom_features);
  const auto xb = tape.constant(batch.bond_neighbor_sum);
  using tensor::add;
  using tensor::matmul;
  using tensor::relu;
  auto h = relu(tape, detail::batchnorm(bind,
                                        add(tape, matmul(tape, x, bind(L.w0_atom)),
                                            matmul(tape, xb, bind(L.w0_bond))),
                                        L.bn0, mode));
  for (const auto& layer : L.layers) {
    const auto msg = tensor::segment_sum(tape, tensor::gather_rows(tape, h, batch.edge_src),
                                         batch.edge_dst, n);
    auto a = detail::batchnorm(
        bind, add(tape, matmul(tape, msg, bind(layer.w1)), matmul(tape, xb, bind(layer.w_bond))),
        layer.bn1, mode);
    a = relu(tape, a);
    h = relu(tape, detail::batchnorm(bind, add(tape, matmul(tape, a, bind(layer.w2)), h),
                                     layer.bn2, mode));
  }
  return tensor::linear(tape, h, bind(L.w_last), bind(L.b_last));
}

// Head embeddings of `count` molecules whose node rows are `nodes`, with
// `owner` mapping each row to its molecule: sum over nodes of
// H + BN(W2 ReLU(BN(W1 ReLU(H)))).
template <std::floating_point T>
Var embed_head_rows(ParamBinder<T>& bind, const Model<T>& model, Var nodes,
                    std::shared_ptr<const std::vector<std::uint32_t>> owner, std::size_t count,
                    Head head, Mode mode) {
  auto& tape = bind.tape();
  const auto& ids = model.layout.heads[static_cast<int>(head)];
  auto r = tensor::relu(tape, nodes);
  r = tensor::relu(tape,
                   detail::batchnorm(bind, tensor::matmul(tape, r, bind(ids.w1)), ids.bn1, mode));
  r = detail::batchnorm(bind, tensor::matmul(tape, r, bind(ids.w2)), ids.bn2, mode);
  return tensor::segment_sum(tape, tensor::add(tape, nodes, r), std::move(owner), count);
}

template <std::floating_point T>
Var embed_head(ParamBinder<T>& bind, const Model<T>& model, const GraphBatch<T>& batch, Var nodes,
               Head head, Mode mode) {
  return embed_head_rows(bind, model, nodes, batch.node_molecule, batch.molecule_count, head,
                         mode);
}

// Eval-mode embeddings for a list of molecules, processed in chunks.
template <std::floating_point T>
Tensor<T> embed_molecules(const Model<T>& model, std::span<const chem::FeatureBundle* const> feats,
                          Head head, std::size_t chunk = 256) {
  Tensor<T> out(feats.size(), model.dims.d);
  auto& store = const_cast<ParamStore<T>&>(model.store);  // eval mode never writes
  for (std::size_t start = 0; start < feats.size(); start += chunk) {
    const auto count = std::min(chunk, feats.size() - start);
    const auto batch = GraphBatch<T>::from_features(feats.subspan(start, count));
    Tape<T> tape;
    ParamBinder<T> bind(tape, store, false);
    const auto nodes = embed_nodes(bind, model, batch, Mode::eval);
    const auto& e = tape.value(embed_head(bind, model, batch, nodes, head, Mode::eval));
    std::copy(e.data().begin(), e.data().end(), out.data().begin() + start * model.dims.d);
  }
  return out;
}

template <std::floating_point T>
Tensor<T> embed_molecules(const Model<T>& model, const std::vector<chem::FeatureBundle>& feats,
                          Head head, std::size_t chunk = 256) {
  std::vector<const chem::FeatureBundle*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  return embed_molecules(model, std::span<const chem::FeatureBundle* const>(ptrs), head, chunk);
}

template <std::floating_point T>
std::vector<T> embed_molecule(const Model<T>& model, const chem::Molecule& mol, Head head) {
  const auto f = chem::featurize(mol);
  const chem::FeatureBundle* p = &f;
  const auto e = embed_molecules(model, std::span<const chem::FeatureBundle* const>(&p, 1), head);
  return {e.data().begin(), e.data().end()};
}

// Scales rows to unit norm in place; returns the indices of zero rows,
// which are left as zero.
template <std::floating_point T>
std::vector<std::size_t> normalize_rows_inplace(Tensor<T>& m) {
  std::vector<std::size_t> zero;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double sq = 0.0;
    for (const T v : r) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) {
      std::fill(r.begin(), r.end(), T{0});
      zero.push_back(i);
      continue;
    }
    for (auto& v : r) v = static_cast<T>(v / norm);
  }
  return zero;
}

template <std::floating_point T>
struct PoolEmbedding {
  Tensor<T> keys;  // unit rows
  std::vector<std::size_t> zero_rows;
};

// Unit-normalized h embeddings in input order.
template <std::floating_point T>
PoolEmbedding<T> embed_pool(const Model<T>& model,
                            std::span<const chem::FeatureBundle* const> feats) {
  PoolEmbedding<T> out{embed_molecules(model, feats, Head::h), {}};
  out.zero_rows = normalize_rows_inplace(out.keys);
  return out;
}

}  // namespace retcl::model
