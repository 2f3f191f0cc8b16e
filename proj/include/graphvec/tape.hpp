#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "graphvec/kernels.hpp"

namespace graphvec::ad {

using graphvec::Matrix;

// Eager reverse-mode autodiff over dense matrices.  Every operation appends a
// node holding its forward value; the append order is the topological order
// used by backward().  Each forward result is checked for finiteness and a
// NumericError names the offending op.  Training builds one tape per batch
// and binds parameters once as inputs.

struct Var {
  int index = -1;
};

class Tape {
 public:
  Var input(const Matrix& value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);    // same shape
  Var sub(Var a, Var b);    // same shape
  Var mul(Var a, Var b);    // elementwise, same shape
  Var divide(Var a, Var b); // elementwise, same shape
  Var scale(Var a, double c);
  Var scale_var(Var s, Var a);     // s must be 1×1
  Var add_row_vec(Var a, Var r);   // r is 1×cols(a), broadcast over rows
  Var row_sum(Var a);              // n×d -> n×1
  Var row_mean(Var a);             // n×d -> n×1
  Var col_mean(Var a);             // n×d -> 1×d
  Var sum_all(Var a);              // -> 1×1
  Var mean_all(Var a);             // -> 1×1
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var relu(Var a);                 // subgradient 0 at the kink (strict > mask)
  Var clamp_min(Var a, double c);
  Var sqrt(Var a);
  Var row_softmax(Var a);          // max-shifted, row-wise
  Var layer_norm(Var x, Var gain, Var bias, double eps);  // row-wise, fused
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  Var slice_rows(Var a, int start, int count);
  Var transpose(Var a);
  Var sqdist(Var a, Var b);        // out(i,j) = ‖a_i − b_j‖²
  Var diag(Var a);                 // square n×n -> its diagonal as n×1
  Var neg(Var a);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;  // zeros if backward never reached it

  // Root must be 1×1 (ContractError otherwise); clears old gradients, seeds
  // with 1 and accumulates into every reachable node.
  void backward(Var root);
  // Same but with an explicit seed matching the root's shape.
  void backward_seeded(Var root, const Matrix& seed);

  std::size_t size() const { return nodes_.size(); }

  // Folded hash of every relu/clamp activation pattern seen during forward;
  // two evaluations straddling a kink produce different signatures.
  std::uint64_t kink_signature() const { return kink_sig_; }

 private:
  enum class Op {
    Input, MatMul, Add, Sub, Mul, Div, Scale, ScaleVar, AddRowVec, RowSum,
    RowMean, ColMean, SumAll, MeanAll, Exp, Log, Tanh, Relu, ClampMin, Sqrt,
    RowSoftmax, LayerNorm, ConcatCols, ConcatRows, SliceCols, SliceRows,
    Transpose, SqDist, Diag, Neg,
  };

  struct Node {
    Op op;
    std::array<int, 3> in{-1, -1, -1};
    std::vector<int> many;  // concat inputs
    double c0 = 0.0;        // scale factor / clamp bound / layer-norm eps
    int i0 = 0, i1 = 0;     // slice start / count
    Matrix value;
    Matrix grad;
    Matrix aux0, aux1;      // backward scratch (e.g. normalised rows, 1/σ)
  };

  Var push(Node&& node, const char* name);
  const Node& at(Var v) const;
  Matrix& grad_slot(int index);
  void fold_mask(const Matrix& src, double bound);

  std::vector<Node> nodes_;
  std::uint64_t kink_sig_ = 1469598103934665603ULL;
};

// Central-difference gradient verification.  `build` is re-invoked on fresh
// tapes with perturbed copies of `leaves` and must deterministically return a
// 1×1 root.  Up to `max_coords` seeded coordinates per leaf are probed with
// step h; probes whose ±h evaluations land on different relu/clamp activation
// patterns are skipped (the derivative jumps there) and counted.
struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;
};

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

GradCheckResult grad_check(const BuildFn& build, const std::vector<Matrix>& leaves,
                           std::uint64_t seed, int max_coords = 64, double step = 1e-5);

}  // namespace graphvec::ad
