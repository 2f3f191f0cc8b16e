#pragma once

#include <cstdint>
#include <vector>

#include "graphvec/encoder.hpp"
#include "graphvec/params.hpp"
#include "graphvec/tape.hpp"

namespace graphvec {

// Reference-distribution readout.  Each tapped encoder state is compared
// against R learnable reference point sets (m rows each, matching the tap
// width) through a Gaussian-kernel MMD; the similarity block s collects the
// negated MMDs layer-major, and the readout block p is the column mean of the
// final node matrix.  The per-graph vector is g = s ∥ p.

struct ReferenceConfig {
  int num_refs = 16;  // reference sets per tapped layer
  int ref_rows = 8;   // rows per reference set
  void validate() const;
};

class ReferenceLayer {
 public:
  ReferenceLayer(const ReferenceConfig& cfg, const EncoderConfig& enc);

  // Reference matrices are seeded standard normal scaled by 1/√d_l; the
  // kernel width trains as exp(log_gamma) with log_gamma starting at 0 and
  // its own learning rate (no weight decay).
  void init_params(ParamSet& ps, std::uint64_t seed);
  void locate_params(const ParamSet& ps);

  // One row per graph: [ −mmd(layer 0, ref 0), …, −mmd(layer L−1, ref R−1),
  // column mean of the graph's final node matrix ].
  ad::Var graph_vectors(ad::Tape& tape, const EncoderTaps& taps,
                        const NodeBatch& batch,
                        const std::vector<ad::Var>& params) const;

  int similarity_width() const { return enc_.tap_count() * cfg_.num_refs; }
  int vector_width() const { return similarity_width() + enc_.final_width(); }
  const ReferenceConfig& config() const { return cfg_; }

 private:
  ReferenceConfig cfg_;
  EncoderConfig enc_;
  std::vector<std::vector<int>> ref_idx_;  // [layer][ref]
  int log_gamma_ = -1;
  bool located_ = false;
};

// Plain (non-tape) Gaussian-kernel MMD between two row sets: the square root
// of mean k(h,h) + mean k(v,v) − 2·mean k(h,v) with the radicand clamped at
// zero, k(x,y) = exp(−γ‖x−y‖²).
double mmd_distance(const Matrix& h, const Matrix& v, double gamma);

}  // namespace graphvec
