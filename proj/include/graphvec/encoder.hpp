#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "graphvec/graph.hpp"
#include "graphvec/params.hpp"
#include "graphvec/tape.hpp"

namespace graphvec {

// GIN + graph-transformer backbone.  One independent 3-layer GIN stack per
// kernel scale; the per-depth stack outputs are concatenated across scales,
// the deepest concat is projected to the transformer width and run through
// the transformer blocks with per-graph attention.  Six node-state taps (3
// GIN depth concats, then 3 transformer states) feed the readout, and the
// final node matrix is [last transformer state ∥ last GIN concat].

struct EncoderConfig {
  int scales = 6;
  int embed_dim = 32;    // per-scale input width
  int gin_layers = 3;
  int gin_hidden = 128;
  int gt_blocks = 3;
  int heads = 4;
  int head_dim = 48;
  int ffn_hidden = -1;   // -1 -> transformer width
  double epsilon = 0.0;  // GIN self-loop weight: aggregation is (A + I + εI)·Z
  double ln_eps = 1e-5;

  int d_model() const { return heads * head_dim; }
  int ffn_width() const { return ffn_hidden > 0 ? ffn_hidden : d_model(); }
  int tap_count() const { return gin_layers + gt_blocks; }
  int tap_width(int layer) const;  // width of the layer-th tapped state
  int final_width() const { return d_model() + scales * gin_hidden; }
  void validate() const;
};

// One batch of graphs stacked block-diagonally: per-scale node features plus
// the combined self-loop adjacency.
struct NodeBatch {
  std::vector<Matrix> z;  // per scale: total_rows × embed_dim
  Matrix a_hat;           // total_rows × total_rows, A + (1+ε)I block diagonal
  std::vector<int> offsets;
  std::vector<int> sizes;

  int num_graphs() const { return static_cast<int>(sizes.size()); }
  int total_rows() const;
};

// Assembles a NodeBatch from whole graphs and per-graph, per-scale node
// features (already rotated into the aligned frame).
NodeBatch make_node_batch(const std::vector<const Graph*>& graphs,
                          const std::vector<std::vector<Matrix>>& per_graph_z,
                          const EncoderConfig& cfg);

struct EncoderTaps {
  std::vector<ad::Var> layers;  // tap_count() states, each total_rows × tap_width
  ad::Var final_h;              // total_rows × final_width
};

class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg);

  // Registers all weights (Xavier-uniform, biases zero, layer-norm gain 1 /
  // bias 0) and remembers their indices.  Must be called exactly once.
  void init_params(ParamSet& ps, std::uint64_t seed);
  // Recomputes indices against a ParamSet that already holds the weights
  // (e.g. after checkpoint restore).
  void locate_params(const ParamSet& ps);

  EncoderTaps forward(ad::Tape& tape, const NodeBatch& batch,
                      const std::vector<ad::Var>& params) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  struct GinLayerIdx {
    int w1, b1, w2, b2;
  };
  struct BlockIdx {
    std::vector<std::array<int, 3>> head_qkv;  // per head: {wq, wk, wv}
    int out_w, out_b;
    int ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    int ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  };

  template <typename AddFn>
  void walk_params(AddFn&& addfn);

  EncoderConfig cfg_;
  std::vector<std::vector<GinLayerIdx>> gin_;  // [scale][depth]
  int proj_w_ = -1, proj_b_ = -1;
  std::vector<BlockIdx> blocks_;
  bool located_ = false;
};

}  // namespace graphvec
