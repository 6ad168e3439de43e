#pragma once

#include <cstddef>
#include <vector>

#include "convdysat/graph.hpp"
#include "convdysat/ops.hpp"

namespace convdysat {

// Dense view of one snapshot: link weights A (0 off the neighbourhood, self-loops
// included) and the matching {0, -inf} neighbourhood mask, both [N x N] with row v
// describing node v's neighbours.
struct DenseAdjacency {
  Tensor weights;
  Tensor mask;
};

DenseAdjacency dense_adjacency(const Snapshot& snapshot);

// Temporal mask: entry [i][j] is 0 when j <= i (query i sees keys up to itself), -inf otherwise.
Tensor build_mask(std::size_t steps);

// Trainable tensors of one structural layer, already bound to a tape.
struct StructuralWeights {
  Var weight;                  // [D x F]; column block h belongs to head h
  std::vector<Var> attention;  // per head [2 * F/H x 1]: first half scores the neighbour, second half the centre
  double slope = 0.2;          // leaky ReLU slope on attention logits
};

/// Graph attention over each node's neighbourhood, one output block per head.
///
/// Per head: z = X W_h, e_vu = leaky_relu(A_vu * (a_nbr . z_u + a_self . z_v)) for u in
/// N(v), alpha = softmax_u(e_v.), out_v = elu(sum_u alpha_vu z_u). Heads are concatenated.
Var structural_attention(const DenseAdjacency& adj, const Var& features, const StructuralWeights& w);

// Same layer for one-hot input features, where X W is W itself.
Var structural_attention_one_hot(const DenseAdjacency& adj, const StructuralWeights& w);

// Attention weights alpha of one head, [N x N]; exposed for inspection and tests.
Var structural_attention_weights(const DenseAdjacency& adj, const Var& projected, const Var& attention, double slope);

struct TemporalWeights {
  std::vector<Var> query_kernel, query_bias;
  std::vector<Var> key_kernel, key_bias;
  std::vector<Var> value_kernel, value_bias;
  bool scale_by_full_dim = false;  // divide logits by sqrt(F') instead of sqrt(F'/H)
};

/// Masked multi-head self-attention across time for one node ([T x D']) or a batch of
/// nodes ([B x T x D']).
///
/// Queries and keys come from causal convolutions (the kernel size is taken from the
/// kernels), values from a kernel-1 convolution. Heads are concatenated on the last axis.
Var temporal_attention(const Var& sequence, const TemporalWeights& w, const Tensor& mask);

// h + p for one sequence ([T x D'] + [T x D']) or every sequence of a batch
// ([B x T x D'] + [T x D']); p is shared across nodes.
Var add_position_embeddings(const Var& h, const Var& p);

}  // namespace convdysat
