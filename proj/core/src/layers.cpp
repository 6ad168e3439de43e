#include "convdysat/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convdysat/error.hpp"

namespace convdysat {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Var attend(const DenseAdjacency& adj, const Var& projected, const StructuralWeights& w) {
  const std::size_t n = adj.weights.dim(0);
  const auto& ps = projected.shape();
  if (ps.size() != 2 || ps[0] != n) {
    throw DimensionError("structural_attention: projected features " + shape_string(ps) + " do not match " +
                         std::to_string(n) + " nodes");
  }
  const std::size_t heads = w.attention.size();
  if (heads == 0 || ps[1] % heads != 0) {
    throw DimensionError("structural_attention: output width " + std::to_string(ps[1]) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = ps[1] / heads;
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var z = heads == 1 ? projected : slice(projected, 1, h * head_dim, head_dim);
    Var alpha = structural_attention_weights(adj, z, w.attention[h], w.slope);
    outputs.push_back(elu(matmul(alpha, z)));
  }
  return heads == 1 ? outputs.front() : concat(outputs, 1);
}

}  // namespace

DenseAdjacency dense_adjacency(const Snapshot& snapshot) {
  const std::size_t n = snapshot.node_count();
  DenseAdjacency adj{Tensor(Shape{n, n}, 0.0), Tensor(Shape{n, n}, kNegInf)};
  for (NodeId v = 0; v < n; ++v) {
    for (const auto& nb : snapshot.adjacency(v)) {
      adj.weights.at(v, nb.node) = nb.weight;
      adj.mask.at(v, nb.node) = 0.0;
    }
  }
  return adj;
}

Tensor build_mask(std::size_t steps) {
  if (steps == 0) throw DimensionError("build_mask: need at least one time step");
  Tensor mask(Shape{steps, steps}, kNegInf);
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t j = 0; j <= i; ++j) mask.at(i, j) = 0.0;
  return mask;
}

Var structural_attention_weights(const DenseAdjacency& adj, const Var& projected, const Var& attention, double slope) {
  const std::size_t n = projected.shape()[0];
  const std::size_t f = projected.shape()[1];
  const auto& as = attention.shape();
  if (as.size() != 2 || as[0] != 2 * f || as[1] != 1) {
    throw DimensionError("structural_attention: attention vector " + shape_string(as) + " does not match head width " +
                         std::to_string(f));
  }
  Tape& tape = *projected.tape();
  Var neighbour_score = reshape(matmul(projected, slice(attention, 0, 0, f)), Shape{n});
  Var self_score = reshape(matmul(projected, slice(attention, 0, f, f)), Shape{n});
  // logits[v][u] = A_vu * (a_self . z_v + a_nbr . z_u)
  Var logits = multiply(pairwise_sum(self_score, neighbour_score), tape.constant(adj.weights));
  return masked_softmax(leaky_relu(logits, slope), adj.mask);
}

Var structural_attention(const DenseAdjacency& adj, const Var& features, const StructuralWeights& w) {
  const auto& fs = features.shape();
  const auto& ws = w.weight.shape();
  if (fs.size() != 2 || ws.size() != 2 || fs[1] != ws[0]) {
    throw DimensionError("structural_attention: features " + shape_string(fs) + " incompatible with weight " +
                         shape_string(ws));
  }
  return attend(adj, matmul(features, w.weight), w);
}

Var structural_attention_one_hot(const DenseAdjacency& adj, const StructuralWeights& w) {
  if (w.weight.shape().size() != 2 || w.weight.shape()[0] != adj.weights.dim(0)) {
    throw DimensionError("structural_attention: one-hot weight " + shape_string(w.weight.shape()) + " needs one row per node (" +
                         std::to_string(adj.weights.dim(0)) + ")");
  }
  return attend(adj, w.weight, w);
}

Var temporal_attention(const Var& sequence, const TemporalWeights& w, const Tensor& mask) {
  const auto& xs = sequence.shape();
  if (xs.size() != 2 && xs.size() != 3) {
    throw DimensionError("temporal_attention: input must be [T x D] or [B x T x D], got " + shape_string(xs));
  }
  const bool batched = xs.size() == 3;
  const std::size_t batch = batched ? xs[0] : 1;
  const std::size_t steps = xs[xs.size() - 2];
  if (mask.shape() != Shape{steps, steps}) {
    throw DimensionError("temporal_attention: mask " + shape_string(mask.shape()) + " does not match " +
                         std::to_string(steps) + " time steps");
  }
  const std::size_t heads = w.query_kernel.size();
  if (heads == 0 || w.key_kernel.size() != heads || w.value_kernel.size() != heads || w.query_bias.size() != heads ||
      w.key_bias.size() != heads || w.value_bias.size() != heads) {
    throw DimensionError("temporal_attention: inconsistent number of heads");
  }

  Var x = batched ? sequence : reshape(sequence, Shape{1, steps, xs[1]});
  Tensor batch_mask(Shape{batch, steps, steps});
  for (std::size_t b = 0; b < batch; ++b) std::copy(mask.data().begin(), mask.data().end(), batch_mask.data().begin() + b * steps * steps);

  std::size_t total_dim = 0;
  for (const auto& k : w.query_kernel) total_dim += k.shape()[2];
  // All heads share one convolution per projection; each head reads its own column block.
  auto project = [&](const std::vector<Var>& kernels, const std::vector<Var>& biases) {
    if (heads == 1) return causal_conv1d(x, kernels.front(), biases.front());
    return causal_conv1d(x, concat(kernels, 2), concat(biases, 0));
  };
  const Var q_all = project(w.query_kernel, w.query_bias);
  const Var k_all = project(w.key_kernel, w.key_bias);
  const Var v_all = project(w.value_kernel, w.value_bias);
  auto head = [&](const Var& all, const std::vector<Var>& kernels, std::size_t h) {
    if (heads == 1) return all;
    std::size_t start = 0;
    for (std::size_t i = 0; i < h; ++i) start += kernels[i].shape()[2];
    return slice(all, 2, start, kernels[h].shape()[2]);
  };

  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var q = head(q_all, w.query_kernel, h);
    Var k = head(k_all, w.key_kernel, h);
    Var v = head(v_all, w.value_kernel, h);
    const double width = static_cast<double>(w.scale_by_full_dim ? total_dim : q.shape()[2]);
    Var logits = scale(batched_matmul(q, transpose(k)), 1.0 / std::sqrt(width));
    Var beta = masked_softmax(logits, batch_mask);
    outputs.push_back(batched_matmul(beta, v));
  }
  Var out = heads == 1 ? outputs.front() : concat(outputs, 2);
  if (!batched) out = reshape(out, Shape{steps, out.shape()[2]});
  return out;
}

Var add_position_embeddings(const Var& h, const Var& p) {
  const auto& hs = h.shape();
  const auto& ps = p.shape();
  if (hs == ps) return add(h, p);
  if (hs.size() == 3 && ps.size() == 2 && hs[1] == ps[0] && hs[2] == ps[1]) return add(h, repeat(p, hs[0]));
  throw DimensionError("add_position_embeddings: incompatible shapes " + shape_string(hs) + " and " + shape_string(ps));
}

}  // namespace convdysat
