#include "convdysat/model.hpp"

#include <cmath>
#include <random>

#include "convdysat/error.hpp"
#include "convdysat/random.hpp"

namespace convdysat {
namespace {

constexpr double kLogFloor = 1e-12;

std::string structural_prefix(std::size_t layer) { return "structural." + std::to_string(layer); }

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

struct ExpectedShape {
  std::string name;
  Shape shape;
};

std::vector<ExpectedShape> expected_shapes(const ModelConfig& cfg, std::size_t node_count, int num_steps) {
  std::vector<ExpectedShape> out;
  std::size_t in_dim = node_count;
  for (std::size_t l = 0; l < cfg.structural_dims.size(); ++l) {
    const std::size_t f = cfg.structural_dims[l];
    const std::size_t head_dim = f / cfg.structural_heads;
    out.push_back({structural_prefix(l) + ".weight", {in_dim, f}});
    for (std::size_t h = 0; h < cfg.structural_heads; ++h) {
      out.push_back({structural_prefix(l) + ".attention." + std::to_string(h), {2 * head_dim, 1}});
    }
    in_dim = f;
  }
  const std::size_t head_dim = cfg.temporal_dim / cfg.temporal_heads;
  out.push_back({"temporal.position", {static_cast<std::size_t>(num_steps), in_dim}});
  for (std::size_t h = 0; h < cfg.temporal_heads; ++h) {
    const std::string hs = std::to_string(h);
    out.push_back({"temporal.query." + hs + ".kernel", {cfg.qk_kernel, in_dim, head_dim}});
    out.push_back({"temporal.query." + hs + ".bias", {head_dim}});
    out.push_back({"temporal.key." + hs + ".kernel", {cfg.qk_kernel, in_dim, head_dim}});
    out.push_back({"temporal.key." + hs + ".bias", {head_dim}});
    out.push_back({"temporal.value." + hs + ".kernel", {1, in_dim, head_dim}});
    out.push_back({"temporal.value." + hs + ".bias", {head_dim}});
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (structural_dims.empty()) throw InputError("model: at least one structural layer is required");
  if (structural_heads == 0 || temporal_heads == 0) throw InputError("model: head counts must be positive");
  for (auto d : structural_dims) {
    if (d == 0 || d % structural_heads != 0) {
      throw InputError("model: structural dim " + std::to_string(d) + " not divisible by " +
                       std::to_string(structural_heads) + " heads");
    }
  }
  if (temporal_dim == 0 || temporal_dim % temporal_heads != 0) {
    throw InputError("model: temporal dim " + std::to_string(temporal_dim) + " not divisible by " +
                     std::to_string(temporal_heads) + " heads");
  }
  if (qk_kernel != 2 && qk_kernel != 3) throw InputError("model: query/key kernel size must be 2 or 3");
  if (negative_weight < 0.0) throw InputError("model: negative weight must be non-negative");
}

EmbeddingTable::EmbeddingTable(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3) throw DimensionError("embedding table must be [T x N x d], got " + shape_string(values_.shape()));
}

std::span<const double> EmbeddingTable::row(int t, NodeId v) const {
  if (t < 1 || t > steps() || v >= node_count()) throw DimensionError("embedding row out of range");
  const std::size_t d = dim();
  return values_.data().subspan((static_cast<std::size_t>(t - 1) * node_count() + v) * d, d);
}

GraphTensors::GraphTensors(const DynamicGraph& graph) : node_count_(graph.node_count()) {
  snapshots_.reserve(static_cast<std::size_t>(graph.num_steps()));
  for (int t = 1; t <= graph.num_steps(); ++t) snapshots_.push_back(dense_adjacency(graph.snapshot(t)));
}

ParameterSet init_parameters(const ModelConfig& cfg, std::size_t node_count, int num_steps, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed({seed, 0x1A17ULL}));
  std::normal_distribution<double> position(0.0, 0.1);
  ParameterSet params;
  for (const auto& [name, shape] : expected_shapes(cfg, node_count, num_steps)) {
    if (name.ends_with(".bias")) {
      params.add(name, Tensor(shape, 0.0));
    } else if (name == "temporal.position") {
      Tensor t(shape);
      for (auto& v : t.data()) v = position(rng);
      params.add(name, std::move(t));
    } else if (shape.size() == 3) {
      params.add(name, glorot(shape, shape[0] * shape[1], shape[2], rng));
    } else {
      params.add(name, glorot(shape, shape[0], shape[1], rng));
    }
  }
  return params;
}

void check_parameters(const ParameterSet& params, const ModelConfig& cfg, std::size_t node_count, int num_steps) {
  const auto expected = expected_shapes(cfg, node_count, num_steps);
  for (const auto& [name, shape] : expected) {
    if (!params.contains(name)) throw ShapeMismatchError("parameter '" + name + "' missing");
    if (params.at(name).shape() != shape) {
      throw ShapeMismatchError("parameter '" + name + "' has shape " + shape_string(params.at(name).shape()) +
                               ", configuration expects " + shape_string(shape));
    }
  }
  if (params.size() != expected.size()) throw ShapeMismatchError("parameter set has unexpected extra tensors");
}

bool is_decayed_parameter(const std::string& name) { return name.ends_with(".weight") || name.ends_with(".kernel"); }

Var forward(Tape& tape, const GraphTensors& graph, ParameterSet& params, const ModelConfig& cfg, int up_to) {
  if (up_to < 1 || up_to > graph.num_steps()) {
    throw DimensionError("forward: up_to=" + std::to_string(up_to) + " outside [1, " + std::to_string(graph.num_steps()) + "]");
  }
  const auto steps = static_cast<std::size_t>(up_to);
  const std::size_t n = graph.node_count();

  std::vector<StructuralWeights> structural;
  for (std::size_t l = 0; l < cfg.structural_dims.size(); ++l) {
    StructuralWeights w;
    w.weight = tape.leaf(params.at(structural_prefix(l) + ".weight"));
    for (std::size_t h = 0; h < cfg.structural_heads; ++h) {
      w.attention.push_back(tape.leaf(params.at(structural_prefix(l) + ".attention." + std::to_string(h))));
    }
    w.slope = cfg.attention_slope;
    structural.push_back(std::move(w));
  }

  std::vector<Var> per_step;
  per_step.reserve(steps);
  for (int t = 1; t <= up_to; ++t) {
    const auto& adj = graph.snapshot(t);
    Var h = structural_attention_one_hot(adj, structural.front());
    for (std::size_t l = 1; l < structural.size(); ++l) h = structural_attention(adj, h, structural[l]);
    per_step.push_back(h);
  }
  const std::size_t width = per_step.front().shape()[1];
  Var sequence = reshape(steps == 1 ? per_step.front() : concat(per_step, 1), Shape{n, steps, width});

  Var position = slice(tape.leaf(params.at("temporal.position")), 0, 0, steps);
  sequence = add_position_embeddings(sequence, position);

  TemporalWeights tw;
  tw.scale_by_full_dim = cfg.scale_by_full_dim;
  for (std::size_t h = 0; h < cfg.temporal_heads; ++h) {
    const std::string hs = std::to_string(h);
    tw.query_kernel.push_back(tape.leaf(params.at("temporal.query." + hs + ".kernel")));
    tw.query_bias.push_back(tape.leaf(params.at("temporal.query." + hs + ".bias")));
    tw.key_kernel.push_back(tape.leaf(params.at("temporal.key." + hs + ".kernel")));
    tw.key_bias.push_back(tape.leaf(params.at("temporal.key." + hs + ".bias")));
    tw.value_kernel.push_back(tape.leaf(params.at("temporal.value." + hs + ".kernel")));
    tw.value_bias.push_back(tape.leaf(params.at("temporal.value." + hs + ".bias")));
  }
  return temporal_attention(sequence, tw, build_mask(steps));
}

EmbeddingTable embed(const GraphTensors& graph, const ParameterSet& params, const ModelConfig& cfg, int up_to) {
  ParameterSet frozen = params;
  for (auto& [name, t] : frozen) t.set_requires_grad(false);
  Tape tape;
  const Tensor& out = forward(tape, graph, frozen, cfg, up_to).value();
  const std::size_t n = out.dim(0), steps = out.dim(1), d = out.dim(2);
  Tensor table(Shape{steps, n, d});
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < d; ++k) table.at(t, v, k) = out.at(v, t, k);
  return EmbeddingTable(std::move(table));
}

Var context_loss(const Var& embeddings, const LossBatch& batch, double negative_weight, LossReduction reduction) {
  if (batch.positives.empty()) throw DomainError("context_loss: no positive pairs");
  const auto& es = embeddings.shape();
  if (es.size() != 3) throw DimensionError("context_loss: embeddings must be [N x T x d], got " + shape_string(es));
  const std::size_t n = es[0], steps = es[1], d = es[2];
  Var flat = reshape(embeddings, Shape{n * steps, d});

  auto score = [&](const std::vector<PairSample>& pairs) {
    std::vector<std::size_t> left, right;
    left.reserve(pairs.size());
    right.reserve(pairs.size());
    for (const auto& p : pairs) {
      if (p.step < 1 || static_cast<std::size_t>(p.step) > steps || p.u >= n || p.v >= n) {
        throw DimensionError("context_loss: pair (" + std::to_string(p.step) + ", " + std::to_string(p.u) + ", " +
                             std::to_string(p.v) + ") outside embeddings " + shape_string(es));
      }
      left.push_back(p.u * steps + static_cast<std::size_t>(p.step - 1));
      right.push_back(p.v * steps + static_cast<std::size_t>(p.step - 1));
    }
    return row_sum(multiply(gather_rows(flat, left), gather_rows(flat, right)));
  };

  Var positive = sum(negate(log(clamp_min(sigmoid(score(batch.positives)), kLogFloor))));
  Var total = positive;
  if (!batch.negatives.empty() && negative_weight != 0.0) {
    Var negative = sum(negate(log(clamp_min(sigmoid(negate(score(batch.negatives))), kLogFloor))));
    total = add(positive, scale(negative, negative_weight));
  }
  if (reduction == LossReduction::Mean) total = scale(total, 1.0 / static_cast<double>(batch.positives.size()));
  return total;
}

}  // namespace convdysat
