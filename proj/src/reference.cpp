#include "graphvec/reference.hpp"

#include <cmath>
#include <string>

#include "graphvec/errors.hpp"
#include "graphvec/kernels.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

void ReferenceConfig::validate() const {
  if (num_refs < 1) throw ParameterError("ReferenceConfig: num_refs must be >= 1");
  if (ref_rows < 1) throw ParameterError("ReferenceConfig: ref_rows must be >= 1");
}

ReferenceLayer::ReferenceLayer(const ReferenceConfig& cfg, const EncoderConfig& enc)
    : cfg_(cfg), enc_(enc) {
  cfg_.validate();
  enc_.validate();
}

void ReferenceLayer::init_params(ParamSet& ps, std::uint64_t seed) {
  if (located_) throw ContractError("ReferenceLayer: parameters already initialised");
  Rng rng(seed);
  ref_idx_.assign(static_cast<std::size_t>(enc_.tap_count()), {});
  for (int l = 0; l < enc_.tap_count(); ++l) {
    const int d = enc_.tap_width(l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int r = 0; r < cfg_.num_refs; ++r) {
      Matrix v(cfg_.ref_rows, d);
      for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) v(i, j) = scale * rng.normal();
      ref_idx_[static_cast<std::size_t>(l)].push_back(
          ps.add("ref.l" + std::to_string(l) + ".r" + std::to_string(r), v));
    }
  }
  log_gamma_ = ps.add("ref.log_gamma", Matrix::Zero(1, 1), /*lr_override=*/0.1,
                      /*decay=*/false);
  located_ = true;
}

void ReferenceLayer::locate_params(const ParamSet& ps) {
  ref_idx_.assign(static_cast<std::size_t>(enc_.tap_count()), {});
  auto find = [&](const std::string& name, int rows, int cols) {
    const int idx = ps.index_of(name);
    if (idx < 0)
      throw ContractError("ReferenceLayer: parameter '" + name + "' missing");
    const Matrix& v = ps.at(idx).value;
    if (v.rows() != rows || v.cols() != cols)
      throw ShapeError("ReferenceLayer: parameter '" + name + "' has wrong shape");
    return idx;
  };
  for (int l = 0; l < enc_.tap_count(); ++l)
    for (int r = 0; r < cfg_.num_refs; ++r)
      ref_idx_[static_cast<std::size_t>(l)].push_back(
          find("ref.l" + std::to_string(l) + ".r" + std::to_string(r),
               cfg_.ref_rows, enc_.tap_width(l)));
  log_gamma_ = find("ref.log_gamma", 1, 1);
  located_ = true;
}

ad::Var ReferenceLayer::graph_vectors(ad::Tape& tape, const EncoderTaps& taps,
                                      const NodeBatch& batch,
                                      const std::vector<ad::Var>& params) const {
  if (!located_) throw ContractError("ReferenceLayer: parameters not initialised");
  if (static_cast<int>(taps.layers.size()) != enc_.tap_count())
    throw ShapeError("ReferenceLayer: tapped state count mismatch");
  const int n = batch.total_rows();
  for (int l = 0; l < enc_.tap_count(); ++l) {
    const Matrix& state = tape.value(taps.layers[static_cast<std::size_t>(l)]);
    if (state.rows() != n || state.cols() != enc_.tap_width(l))
      throw ShapeError("ReferenceLayer: tapped state shape mismatch");
  }
  if (tape.value(taps.final_h).cols() != enc_.final_width())
    throw ShapeError("ReferenceLayer: final state width mismatch");

  auto P = [&](int idx) -> ad::Var {
    if (idx < 0 || idx >= static_cast<int>(params.size()))
      throw ContractError("ReferenceLayer: parameter variable out of range");
    return params[static_cast<std::size_t>(idx)];
  };

  const int R = cfg_.num_refs;
  const int m = cfg_.ref_rows;
  const ad::Var neg_gamma = tape.neg(tape.exp(P(log_gamma_)));
  const ad::Var ones_row = tape.input(Matrix::Ones(1, R));
  // Column-block averaging: (R·m × R) map taking per-column means of an
  // n×R·m kernel matrix down to the R per-reference means.
  Matrix bavg = Matrix::Zero(R * m, R);
  for (int r = 0; r < R; ++r) bavg.block(r * m, r, m, 1).setConstant(1.0 / m);
  const ad::Var block_avg = tape.input(bavg);

  // Per-layer machinery shared across graphs: the stacked reference rows and
  // the row of mean k(V_r, V_r) terms.
  std::vector<ad::Var> v_stacks, vv_rows;
  for (int l = 0; l < enc_.tap_count(); ++l) {
    std::vector<ad::Var> refs;
    for (int r = 0; r < R; ++r)
      refs.push_back(P(ref_idx_[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)]));
    v_stacks.push_back(refs.size() == 1 ? refs[0] : tape.concat_rows(refs));
    std::vector<ad::Var> vv;
    for (int r = 0; r < R; ++r)
      vv.push_back(tape.mean_all(
          tape.exp(tape.scale_var(neg_gamma, tape.sqdist(refs[static_cast<std::size_t>(r)],
                                                         refs[static_cast<std::size_t>(r)])))));
    vv_rows.push_back(vv.size() == 1 ? vv[0] : tape.concat_cols(vv));
  }

  std::vector<ad::Var> rows;
  for (int g = 0; g < batch.num_graphs(); ++g) {
    const int off = batch.offsets[static_cast<std::size_t>(g)];
    const int cnt = batch.sizes[static_cast<std::size_t>(g)];
    std::vector<ad::Var> parts;
    for (int l = 0; l < enc_.tap_count(); ++l) {
      const ad::Var h = tape.slice_rows(taps.layers[static_cast<std::size_t>(l)], off, cnt);
      const ad::Var hh =
          tape.mean_all(tape.exp(tape.scale_var(neg_gamma, tape.sqdist(h, h))));
      const ad::Var k_hv = tape.exp(tape.scale_var(
          neg_gamma, tape.sqdist(h, v_stacks[static_cast<std::size_t>(l)])));
      const ad::Var hv_row = tape.matmul(tape.col_mean(k_hv), block_avg);
      const ad::Var radicand =
          tape.sub(tape.add(tape.scale_var(hh, ones_row),
                            vv_rows[static_cast<std::size_t>(l)]),
                   tape.scale(hv_row, 2.0));
      parts.push_back(tape.neg(tape.sqrt(tape.clamp_min(radicand, 0.0))));
    }
    parts.push_back(tape.col_mean(tape.slice_rows(taps.final_h, off, cnt)));
    rows.push_back(tape.concat_cols(parts));
  }
  return rows.size() == 1 ? rows[0] : tape.concat_rows(rows);
}

double mmd_distance(const Matrix& h, const Matrix& v, double gamma) {
  if (h.rows() < 1 || v.rows() < 1)
    throw ParameterError("mmd_distance: both point sets need at least one row");
  if (h.cols() != v.cols())
    throw ShapeError("mmd_distance: point dimensions differ");
  if (!(gamma > 0.0)) throw ParameterError("mmd_distance: gamma must be positive");
  auto kmean = [&](const Matrix& a, const Matrix& b) {
    return (-gamma * pairwise_sqdist_serial(a, b).array()).exp().mean();
  };
  const double radicand = kmean(h, h) + kmean(v, v) - 2.0 * kmean(h, v);
  return std::sqrt(std::max(0.0, radicand));
}

}  // namespace graphvec
