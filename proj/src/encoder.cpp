#include "graphvec/encoder.hpp"

#include <cmath>
#include <string>

#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

void EncoderConfig::validate() const {
  if (scales < 1) throw ParameterError("EncoderConfig: scales must be >= 1");
  if (embed_dim < 1) throw ParameterError("EncoderConfig: embed_dim must be >= 1");
  if (gin_layers < 1) throw ParameterError("EncoderConfig: gin_layers must be >= 1");
  if (gin_hidden < 1) throw ParameterError("EncoderConfig: gin_hidden must be >= 1");
  if (gt_blocks < 0) throw ParameterError("EncoderConfig: gt_blocks must be >= 0");
  if (heads < 1) throw ParameterError("EncoderConfig: heads must be >= 1");
  if (head_dim < 1) throw ParameterError("EncoderConfig: head_dim must be >= 1");
  if (epsilon < -1.0) throw ParameterError("EncoderConfig: epsilon must be >= -1");
  if (ln_eps <= 0.0) throw ParameterError("EncoderConfig: ln_eps must be positive");
}

int EncoderConfig::tap_width(int layer) const {
  if (layer < 0 || layer >= tap_count())
    throw ParameterError("EncoderConfig: tap index out of range");
  return layer < gin_layers ? scales * gin_hidden : d_model();
}

int NodeBatch::total_rows() const {
  int n = 0;
  for (int s : sizes) n += s;
  return n;
}

NodeBatch make_node_batch(const std::vector<const Graph*>& graphs,
                          const std::vector<std::vector<Matrix>>& per_graph_z,
                          const EncoderConfig& cfg) {
  cfg.validate();
  if (graphs.empty()) throw ParameterError("make_node_batch: empty batch");
  if (per_graph_z.size() != graphs.size())
    throw ParameterError("make_node_batch: feature list length != graph count");

  NodeBatch batch;
  int total = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const int n = graphs[g]->n();
    if (static_cast<int>(per_graph_z[g].size()) != cfg.scales)
      throw ParameterError("make_node_batch: scale count mismatch");
    for (const auto& z : per_graph_z[g])
      if (z.rows() != n || z.cols() != cfg.embed_dim)
        throw ShapeError("make_node_batch: node feature shape mismatch");
    batch.offsets.push_back(total);
    batch.sizes.push_back(n);
    total += n;
  }

  batch.a_hat = Matrix::Zero(total, total);
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const int off = batch.offsets[g];
    const int n = batch.sizes[g];
    batch.a_hat.block(off, off, n, n) = graphs[g]->adjacency;
    batch.a_hat.block(off, off, n, n).diagonal().array() += 1.0 + cfg.epsilon;
  }
  batch.z.assign(static_cast<std::size_t>(cfg.scales), Matrix());
  for (int q = 0; q < cfg.scales; ++q) {
    Matrix& zq = batch.z[static_cast<std::size_t>(q)];
    zq.resize(total, cfg.embed_dim);
    for (std::size_t g = 0; g < graphs.size(); ++g)
      zq.middleRows(batch.offsets[g], batch.sizes[g]) =
          per_graph_z[g][static_cast<std::size_t>(q)];
  }
  return batch;
}

Encoder::Encoder(const EncoderConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

template <typename AddFn>
void Encoder::walk_params(AddFn&& addfn) {
  gin_.assign(static_cast<std::size_t>(cfg_.scales), {});
  for (int q = 0; q < cfg_.scales; ++q) {
    for (int d = 0; d < cfg_.gin_layers; ++d) {
      const int in = d == 0 ? cfg_.embed_dim : cfg_.gin_hidden;
      const std::string base =
          "enc.gin.s" + std::to_string(q) + ".d" + std::to_string(d) + ".";
      GinLayerIdx idx;
      idx.w1 = addfn(base + "w1", in, cfg_.gin_hidden, 'x');
      idx.b1 = addfn(base + "b1", 1, cfg_.gin_hidden, '0');
      idx.w2 = addfn(base + "w2", cfg_.gin_hidden, cfg_.gin_hidden, 'x');
      idx.b2 = addfn(base + "b2", 1, cfg_.gin_hidden, '0');
      gin_[static_cast<std::size_t>(q)].push_back(idx);
    }
  }
  const int dm = cfg_.d_model();
  proj_w_ = addfn("enc.proj.w", cfg_.scales * cfg_.gin_hidden, dm, 'x');
  proj_b_ = addfn("enc.proj.b", 1, dm, '0');
  blocks_.clear();
  for (int b = 0; b < cfg_.gt_blocks; ++b) {
    const std::string base = "enc.gt" + std::to_string(b) + ".";
    BlockIdx blk;
    for (int h = 0; h < cfg_.heads; ++h) {
      const std::string hb = base + "h" + std::to_string(h) + ".";
      blk.head_qkv.push_back({addfn(hb + "wq", dm, cfg_.head_dim, 'x'),
                              addfn(hb + "wk", dm, cfg_.head_dim, 'x'),
                              addfn(hb + "wv", dm, cfg_.head_dim, 'x')});
    }
    blk.out_w = addfn(base + "attn.w", dm, dm, 'x');
    blk.out_b = addfn(base + "attn.b", 1, dm, '0');
    blk.ffn_w1 = addfn(base + "ffn.w1", dm, cfg_.ffn_width(), 'x');
    blk.ffn_b1 = addfn(base + "ffn.b1", 1, cfg_.ffn_width(), '0');
    blk.ffn_w2 = addfn(base + "ffn.w2", cfg_.ffn_width(), dm, 'x');
    blk.ffn_b2 = addfn(base + "ffn.b2", 1, dm, '0');
    blk.ln1_gain = addfn(base + "ln1.gain", 1, dm, '1');
    blk.ln1_bias = addfn(base + "ln1.bias", 1, dm, '0');
    blk.ln2_gain = addfn(base + "ln2.gain", 1, dm, '1');
    blk.ln2_bias = addfn(base + "ln2.bias", 1, dm, '0');
    blocks_.push_back(std::move(blk));
  }
  located_ = true;
}

void Encoder::init_params(ParamSet& ps, std::uint64_t seed) {
  if (located_) throw ContractError("Encoder: parameters already initialised");
  Rng rng(seed);
  walk_params([&](const std::string& name, int rows, int cols, char kind) {
    Matrix m(rows, cols);
    switch (kind) {
      case 'x': {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
        break;
      }
      case '0':
        m.setZero();
        break;
      case '1':
        m.setOnes();
        break;
      default:
        throw ContractError("Encoder: unknown init kind");
    }
    return ps.add(name, m);
  });
}

void Encoder::locate_params(const ParamSet& ps) {
  walk_params([&](const std::string& name, int rows, int cols, char) {
    const int idx = ps.index_of(name);
    if (idx < 0) throw ContractError("Encoder: parameter '" + name + "' missing");
    const Matrix& v = ps.at(idx).value;
    if (v.rows() != rows || v.cols() != cols)
      throw ShapeError("Encoder: parameter '" + name + "' has wrong shape");
    return idx;
  });
}

EncoderTaps Encoder::forward(ad::Tape& tape, const NodeBatch& batch,
                             const std::vector<ad::Var>& params) const {
  if (!located_) throw ContractError("Encoder: parameters not initialised");
  if (static_cast<int>(batch.z.size()) != cfg_.scales)
    throw ParameterError("Encoder: batch scale count mismatch");
  const int n = batch.total_rows();
  if (n < 1) throw ParameterError("Encoder: empty batch");
  for (const auto& z : batch.z)
    if (z.rows() != n || z.cols() != cfg_.embed_dim)
      throw ShapeError("Encoder: node feature shape mismatch");
  if (batch.a_hat.rows() != n || batch.a_hat.cols() != n)
    throw ShapeError("Encoder: adjacency shape mismatch");

  auto P = [&](int idx) -> ad::Var {
    if (idx < 0 || idx >= static_cast<int>(params.size()))
      throw ContractError("Encoder: parameter variable out of range");
    return params[static_cast<std::size_t>(idx)];
  };

  const ad::Var a_hat = tape.input(batch.a_hat);
  std::vector<ad::Var> cur;
  for (const auto& z : batch.z) cur.push_back(tape.input(z));

  EncoderTaps taps;
  for (int d = 0; d < cfg_.gin_layers; ++d) {
    for (int q = 0; q < cfg_.scales; ++q) {
      const GinLayerIdx& idx = gin_[static_cast<std::size_t>(q)][static_cast<std::size_t>(d)];
      const ad::Var agg = tape.matmul(a_hat, cur[static_cast<std::size_t>(q)]);
      const ad::Var hid =
          tape.relu(tape.add_row_vec(tape.matmul(agg, P(idx.w1)), P(idx.b1)));
      cur[static_cast<std::size_t>(q)] =
          tape.add_row_vec(tape.matmul(hid, P(idx.w2)), P(idx.b2));
    }
    taps.layers.push_back(cfg_.scales == 1 ? cur[0] : tape.concat_cols(cur));
  }

  ad::Var state = tape.add_row_vec(tape.matmul(taps.layers.back(), P(proj_w_)), P(proj_b_));
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim));
  for (const BlockIdx& blk : blocks_) {
    std::vector<ad::Var> per_graph;
    for (int g = 0; g < batch.num_graphs(); ++g) {
      const ad::Var rows = tape.slice_rows(state, batch.offsets[static_cast<std::size_t>(g)],
                                           batch.sizes[static_cast<std::size_t>(g)]);
      std::vector<ad::Var> head_outs;
      for (const auto& qkv : blk.head_qkv) {
        const ad::Var qm = tape.matmul(rows, P(qkv[0]));
        const ad::Var km = tape.matmul(rows, P(qkv[1]));
        const ad::Var vm = tape.matmul(rows, P(qkv[2]));
        const ad::Var scores = tape.scale(tape.matmul(qm, tape.transpose(km)), attn_scale);
        head_outs.push_back(tape.matmul(tape.row_softmax(scores), vm));
      }
      per_graph.push_back(head_outs.size() == 1 ? head_outs[0]
                                                : tape.concat_cols(head_outs));
    }
    const ad::Var attn =
        per_graph.size() == 1 ? per_graph[0] : tape.concat_rows(per_graph);
    const ad::Var attn_out = tape.add_row_vec(tape.matmul(attn, P(blk.out_w)), P(blk.out_b));
    const ad::Var normed = tape.layer_norm(tape.add(state, attn_out), P(blk.ln1_gain),
                                           P(blk.ln1_bias), cfg_.ln_eps);
    const ad::Var ffn_hid =
        tape.relu(tape.add_row_vec(tape.matmul(normed, P(blk.ffn_w1)), P(blk.ffn_b1)));
    const ad::Var ffn = tape.add_row_vec(tape.matmul(ffn_hid, P(blk.ffn_w2)), P(blk.ffn_b2));
    state = tape.layer_norm(tape.add(normed, ffn), P(blk.ln2_gain), P(blk.ln2_bias),
                            cfg_.ln_eps);
    taps.layers.push_back(state);
  }

  taps.final_h = tape.concat_cols({state, taps.layers[static_cast<std::size_t>(
                                              cfg_.gin_layers - 1)]});
  return taps;
}

}  // namespace graphvec
