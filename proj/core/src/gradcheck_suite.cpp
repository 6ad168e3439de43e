#include <random>

#include "convdysat/gradcheck.hpp"
#include "convdysat/layers.hpp"
#include "convdysat/model.hpp"
#include "convdysat/ops.hpp"
#include "convdysat/random.hpp"

namespace convdysat {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

// sum(out * r) for a fixed random r shaped like out.
Var project(Tape& tape, const Var& out, std::uint64_t seed) {
  Rng rng = make_rng({seed, 0x5052});
  return sum(multiply(out, tape.constant(random_tensor(out.shape(), rng))));
}

DynamicGraph toy_graph() {
  std::vector<EdgeRecord> records = {
      {"a", "b", 1.0, 0.0}, {"b", "c", 2.0, 0.2}, {"c", "d", 1.0, 0.5},
      {"a", "c", 1.0, 1.1}, {"b", "d", 1.5, 1.6}, {"a", "b", 1.0, 1.9},
      {"a", "d", 1.0, 2.2}, {"c", "d", 3.0, 2.6}, {"b", "c", 1.0, 3.0},
  };
  return build_snapshots(records, 3, SnapshotMode::Binned);
}

}  // namespace

std::vector<ComponentCheck> run_gradcheck_suite(std::uint64_t seed, double layer_threshold, double composed_threshold) {
  Rng rng = make_rng({seed});
  const DynamicGraph graph = toy_graph();
  const GraphTensors tensors(graph);
  const std::size_t n = graph.node_count();
  std::vector<ComponentCheck> out;

  {
    // Dense input features so the input projection is exercised too.
    Tensor x = random_tensor({n, 3}, rng);
    Tensor w = random_tensor({3, 4}, rng, 0.7);
    Tensor a0 = random_tensor({4, 1}, rng, 0.7);
    Tensor a1 = random_tensor({4, 1}, rng, 0.7);
    const NamedTensor inputs[] = {{"features", &x}, {"weight", &w}, {"attention.0", &a0}, {"attention.1", &a1}};
    auto f = [&](Tape& tape) {
      StructuralWeights sw{tape.leaf(w), {tape.leaf(a0), tape.leaf(a1)}, 0.2};
      return project(tape, structural_attention(tensors.snapshot(2), tape.leaf(x), sw), seed);
    };
    out.push_back({"structural_attention", finite_difference_check(f, inputs), layer_threshold});
  }
  {
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor k = random_tensor({2, 4, 3}, rng, 0.5);
    Tensor b = random_tensor({3}, rng, 0.5);
    const NamedTensor inputs[] = {{"input", &x}, {"kernel", &k}, {"bias", &b}};
    auto f = [&](Tape& tape) { return project(tape, causal_conv1d(tape.leaf(x), tape.leaf(k), tape.leaf(b)), seed); };
    out.push_back({"causal_conv1d", finite_difference_check(f, inputs), layer_threshold});
  }
  {
    Tensor logits = random_tensor({2, 3, 3}, rng);
    Tensor mask(Shape{2, 3, 3});
    const Tensor causal = build_mask(3);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 9; ++i) mask[b * 9 + i] = causal[i];
    const NamedTensor inputs[] = {{"logits", &logits}};
    auto f = [&](Tape& tape) { return project(tape, masked_softmax(tape.leaf(logits), mask), seed); };
    out.push_back({"masked_softmax", finite_difference_check(f, inputs), layer_threshold});
  }
  {
    const std::size_t heads = 2, dim = 4, head_dim = 2;
    Tensor x = random_tensor({n, 3, dim}, rng);
    std::vector<Tensor> kernels, biases;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t width : {std::size_t{2}, std::size_t{2}, std::size_t{1}}) {
        kernels.push_back(random_tensor({width, dim, head_dim}, rng, 0.5));
        biases.push_back(random_tensor({head_dim}, rng, 0.5));
      }
    }
    std::vector<NamedTensor> inputs{{"input", &x}};
    const char* roles[] = {"query", "key", "value"};
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      const std::string name = std::string(roles[i % 3]) + "." + std::to_string(i / 3);
      inputs.push_back({name + ".kernel", &kernels[i]});
      inputs.push_back({name + ".bias", &biases[i]});
    }
    const Tensor mask = build_mask(3);
    auto f = [&](Tape& tape) {
      TemporalWeights tw;
      for (std::size_t h = 0; h < heads; ++h) {
        tw.query_kernel.push_back(tape.leaf(kernels[3 * h]));
        tw.query_bias.push_back(tape.leaf(biases[3 * h]));
        tw.key_kernel.push_back(tape.leaf(kernels[3 * h + 1]));
        tw.key_bias.push_back(tape.leaf(biases[3 * h + 1]));
        tw.value_kernel.push_back(tape.leaf(kernels[3 * h + 2]));
        tw.value_bias.push_back(tape.leaf(biases[3 * h + 2]));
      }
      return project(tape, temporal_attention(tape.leaf(x), tw, mask), seed);
    };
    out.push_back({"temporal_attention", finite_difference_check(f, inputs), layer_threshold});
  }
  {
    Tensor h = random_tensor({n, 3, 4}, rng);
    Tensor p = random_tensor({3, 4}, rng);
    const NamedTensor inputs[] = {{"sequence", &h}, {"position", &p}};
    auto f = [&](Tape& tape) { return project(tape, add_position_embeddings(tape.leaf(h), tape.leaf(p)), seed); };
    out.push_back({"position_embeddings", finite_difference_check(f, inputs), layer_threshold});
  }
  {
    ModelConfig cfg;
    cfg.structural_dims = {4};
    cfg.structural_heads = 2;
    cfg.temporal_dim = 4;
    cfg.temporal_heads = 2;
    ParameterSet params = init_parameters(cfg, n, graph.num_steps(), seed);
    // Larger than the initial scale so attention is far from uniform.
    for (auto& [name, t] : params) {
      for (auto& v : t.data()) v = v * 2.0 + 0.1;
    }
    LossBatch batch;
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
    std::uniform_int_distribution<int> step(1, graph.num_steps());
    for (int i = 0; i < 6; ++i) batch.positives.push_back({step(rng), node(rng), node(rng)});
    for (int i = 0; i < 12; ++i) batch.negatives.push_back({step(rng), node(rng), node(rng)});
    std::vector<NamedTensor> inputs;
    for (auto& [name, t] : params) inputs.push_back({name, &t});
    auto f = [&](Tape& tape) {
      return context_loss(forward(tape, tensors, params, cfg, graph.num_steps()), batch, 1.0, LossReduction::Mean);
    };
    out.push_back({"context_loss", finite_difference_check(f, inputs), composed_threshold});
  }
  return out;
}

}  // namespace convdysat
