#include "graphvec/tape.hpp"

#include <cmath>
#include <string>

#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec::ad {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": operand shapes differ");
}

}  // namespace

Var Tape::push(Node&& node, const char* name) {
  if (!node.value.allFinite())
    throw NumericError(std::string("tape: nonfinite result from ") + name);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::at(Var v) const {
  if (v.index < 0 || v.index >= static_cast<int>(nodes_.size()))
    throw ContractError("tape: variable does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.index)];
}

Matrix& Tape::grad_slot(int index) {
  Node& n = nodes_[static_cast<std::size_t>(index)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::fold_mask(const Matrix& src, double bound) {
  std::uint64_t sig = kink_sig_;
  for (Eigen::Index j = 0; j < src.cols(); ++j)
    for (Eigen::Index i = 0; i < src.rows(); ++i) {
      sig ^= src(i, j) > bound ? 0x9eULL : 0x31ULL;
      sig *= 1099511628211ULL;
    }
  kink_sig_ = sig;
}

Var Tape::input(const Matrix& value) {
  Node n;
  n.op = Op::Input;
  n.value = value;
  return push(std::move(n), "input");
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (va.cols() != vb.rows()) throw ShapeError("matmul: inner dimensions differ");
  Node n;
  n.op = Op::MatMul;
  n.in = {a.index, b.index, -1};
  n.value = va * vb;
  return push(std::move(n), "matmul");
}

Var Tape::add(Var a, Var b) {
  check_same_shape(at(a).value, at(b).value, "add");
  Node n;
  n.op = Op::Add;
  n.in = {a.index, b.index, -1};
  n.value = at(a).value + at(b).value;
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(at(a).value, at(b).value, "sub");
  Node n;
  n.op = Op::Sub;
  n.in = {a.index, b.index, -1};
  n.value = at(a).value - at(b).value;
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(at(a).value, at(b).value, "mul");
  Node n;
  n.op = Op::Mul;
  n.in = {a.index, b.index, -1};
  n.value = at(a).value.cwiseProduct(at(b).value);
  return push(std::move(n), "mul");
}

Var Tape::divide(Var a, Var b) {
  check_same_shape(at(a).value, at(b).value, "divide");
  Node n;
  n.op = Op::Div;
  n.in = {a.index, b.index, -1};
  n.value = at(a).value.cwiseQuotient(at(b).value);
  return push(std::move(n), "divide");
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.in = {a.index, -1, -1};
  n.c0 = c;
  n.value = c * at(a).value;
  return push(std::move(n), "scale");
}

Var Tape::scale_var(Var s, Var a) {
  if (at(s).value.size() != 1) throw ContractError("scale_var: scale operand must be 1x1");
  Node n;
  n.op = Op::ScaleVar;
  n.in = {s.index, a.index, -1};
  n.value = at(s).value(0, 0) * at(a).value;
  return push(std::move(n), "scale_var");
}

Var Tape::add_row_vec(Var a, Var r) {
  const Matrix& va = at(a).value;
  const Matrix& vr = at(r).value;
  if (vr.rows() != 1 || vr.cols() != va.cols())
    throw ShapeError("add_row_vec: expected a 1×cols row vector");
  Node n;
  n.op = Op::AddRowVec;
  n.in = {a.index, r.index, -1};
  n.value = va.rowwise() + vr.row(0);
  return push(std::move(n), "add_row_vec");
}

Var Tape::row_sum(Var a) {
  Node n;
  n.op = Op::RowSum;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.rowwise().sum();
  return push(std::move(n), "row_sum");
}

Var Tape::row_mean(Var a) {
  Node n;
  n.op = Op::RowMean;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.rowwise().mean();
  return push(std::move(n), "row_mean");
}

Var Tape::col_mean(Var a) {
  Node n;
  n.op = Op::ColMean;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.colwise().mean();
  return push(std::move(n), "col_mean");
}

Var Tape::sum_all(Var a) {
  Node n;
  n.op = Op::SumAll;
  n.in = {a.index, -1, -1};
  n.value = Matrix::Constant(1, 1, at(a).value.sum());
  return push(std::move(n), "sum_all");
}

Var Tape::mean_all(Var a) {
  Node n;
  n.op = Op::MeanAll;
  n.in = {a.index, -1, -1};
  n.value = Matrix::Constant(1, 1, at(a).value.mean());
  return push(std::move(n), "mean_all");
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.array().exp();
  return push(std::move(n), "exp");
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::Log;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.array().log();
  return push(std::move(n), "log");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.array().tanh();
  return push(std::move(n), "tanh");
}

Var Tape::relu(Var a) {
  fold_mask(at(a).value, 0.0);
  Node n;
  n.op = Op::Relu;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.cwiseMax(0.0);
  return push(std::move(n), "relu");
}

Var Tape::clamp_min(Var a, double c) {
  fold_mask(at(a).value, c);
  Node n;
  n.op = Op::ClampMin;
  n.in = {a.index, -1, -1};
  n.c0 = c;
  n.value = at(a).value.cwiseMax(c);
  return push(std::move(n), "clamp_min");
}

Var Tape::sqrt(Var a) {
  Node n;
  n.op = Op::Sqrt;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.array().sqrt();
  return push(std::move(n), "sqrt");
}

Var Tape::row_softmax(Var a) {
  const Matrix& x = at(a).value;
  Node n;
  n.op = Op::RowSoftmax;
  n.in = {a.index, -1, -1};
  n.value.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
    n.value.row(i) = e / e.sum();
  }
  return push(std::move(n), "row_softmax");
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& vx = at(x).value;
  const Matrix& vg = at(gain).value;
  const Matrix& vb = at(bias).value;
  if (vg.rows() != 1 || vg.cols() != vx.cols() || vb.rows() != 1 || vb.cols() != vx.cols())
    throw ShapeError("layer_norm: gain/bias must be 1×cols row vectors");
  if (eps <= 0.0) throw ParameterError("layer_norm: eps must be positive");
  Node n;
  n.op = Op::LayerNorm;
  n.in = {x.index, gain.index, bias.index};
  n.c0 = eps;
  const Eigen::Index rows = vx.rows(), cols = vx.cols();
  n.aux0.resize(rows, cols);       // normalised rows x̂
  n.aux1.resize(rows, 1);          // 1/σ per row
  n.value.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mean = vx.row(i).mean();
    const double var = (vx.row(i).array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + eps);
    n.aux1(i, 0) = inv_std;
    n.aux0.row(i) = (vx.row(i).array() - mean) * inv_std;
    n.value.row(i) = n.aux0.row(i).cwiseProduct(vg.row(0)) + vb.row(0);
  }
  return push(std::move(n), "layer_norm");
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ParameterError("concat_cols: no inputs");
  const Eigen::Index rows = at(parts[0]).value.rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (at(p).value.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += at(p).value.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    n.many.push_back(p.index);
    n.value.middleCols(off, at(p).value.cols()) = at(p).value;
    off += at(p).value.cols();
  }
  return push(std::move(n), "concat_cols");
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ParameterError("concat_rows: no inputs");
  const Eigen::Index cols = at(parts[0]).value.cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (at(p).value.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += at(p).value.rows();
  }
  Node n;
  n.op = Op::ConcatRows;
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    n.many.push_back(p.index);
    n.value.middleRows(off, at(p).value.rows()) = at(p).value;
    off += at(p).value.rows();
  }
  return push(std::move(n), "concat_rows");
}

Var Tape::slice_cols(Var a, int start, int count) {
  const Matrix& v = at(a).value;
  if (start < 0 || count < 1 || start + count > v.cols())
    throw ShapeError("slice_cols: range out of bounds");
  Node n;
  n.op = Op::SliceCols;
  n.in = {a.index, -1, -1};
  n.i0 = start;
  n.i1 = count;
  n.value = v.middleCols(start, count);
  return push(std::move(n), "slice_cols");
}

Var Tape::slice_rows(Var a, int start, int count) {
  const Matrix& v = at(a).value;
  if (start < 0 || count < 1 || start + count > v.rows())
    throw ShapeError("slice_rows: range out of bounds");
  Node n;
  n.op = Op::SliceRows;
  n.in = {a.index, -1, -1};
  n.i0 = start;
  n.i1 = count;
  n.value = v.middleRows(start, count);
  return push(std::move(n), "slice_rows");
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::Transpose;
  n.in = {a.index, -1, -1};
  n.value = at(a).value.transpose();
  return push(std::move(n), "transpose");
}

Var Tape::sqdist(Var a, Var b) {
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (va.cols() != vb.cols()) throw ShapeError("sqdist: feature dimensions differ");
  Node n;
  n.op = Op::SqDist;
  n.in = {a.index, b.index, -1};
  n.value = pairwise_sqdist_serial(va, vb);
  return push(std::move(n), "sqdist");
}

Var Tape::diag(Var a) {
  const Matrix& v = at(a).value;
  if (v.rows() != v.cols()) throw ShapeError("diag: matrix not square");
  Node n;
  n.op = Op::Diag;
  n.in = {a.index, -1, -1};
  n.value = v.diagonal();
  return push(std::move(n), "diag");
}

Var Tape::neg(Var a) {
  Node n;
  n.op = Op::Neg;
  n.in = {a.index, -1, -1};
  n.value = -at(a).value;
  return push(std::move(n), "neg");
}

const Matrix& Tape::value(Var v) const { return at(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = at(v);
  if (n.grad.size() == 0) {
    static thread_local Matrix zeros;
    zeros = Matrix::Zero(n.value.rows(), n.value.cols());
    return zeros;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  if (at(root).value.size() != 1)
    throw ContractError("backward: root must be 1x1 (use backward_seeded otherwise)");
  backward_seeded(root, Matrix::Ones(1, 1));
}

void Tape::backward_seeded(Var root, const Matrix& seed) {
  const Node& r = at(root);
  if (seed.rows() != r.value.rows() || seed.cols() != r.value.cols())
    throw ContractError("backward_seeded: seed shape must match the root value");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_slot(root.index) = seed;

  for (int idx = root.index; idx >= 0; --idx) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Input:
        break;
      case Op::MatMul: {
        const Matrix& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const Matrix& b = nodes_[static_cast<std::size_t>(n.in[1])].value;
        grad_slot(n.in[0]) += g * b.transpose();
        grad_slot(n.in[1]) += a.transpose() * g;
        break;
      }
      case Op::Add:
        grad_slot(n.in[0]) += g;
        grad_slot(n.in[1]) += g;
        break;
      case Op::Sub:
        grad_slot(n.in[0]) += g;
        grad_slot(n.in[1]) -= g;
        break;
      case Op::Mul:
        grad_slot(n.in[0]) += g.cwiseProduct(nodes_[static_cast<std::size_t>(n.in[1])].value);
        grad_slot(n.in[1]) += g.cwiseProduct(nodes_[static_cast<std::size_t>(n.in[0])].value);
        break;
      case Op::Div: {
        const Matrix& b = nodes_[static_cast<std::size_t>(n.in[1])].value;
        grad_slot(n.in[0]) += g.cwiseQuotient(b);
        grad_slot(n.in[1]) -= g.cwiseProduct(n.value).cwiseQuotient(b);
        break;
      }
      case Op::Scale:
        grad_slot(n.in[0]) += n.c0 * g;
        break;
      case Op::ScaleVar: {
        const Matrix& a = nodes_[static_cast<std::size_t>(n.in[1])].value;
        const double s = nodes_[static_cast<std::size_t>(n.in[0])].value(0, 0);
        grad_slot(n.in[0])(0, 0) += g.cwiseProduct(a).sum();
        grad_slot(n.in[1]) += s * g;
        break;
      }
      case Op::AddRowVec:
        grad_slot(n.in[0]) += g;
        grad_slot(n.in[1]) += g.colwise().sum();
        break;
      case Op::RowSum:
        grad_slot(n.in[0]).colwise() += g.col(0);
        break;
      case Op::RowMean: {
        Matrix& ga = grad_slot(n.in[0]);
        ga.colwise() += g.col(0) / static_cast<double>(ga.cols());
        break;
      }
      case Op::ColMean: {
        Matrix& ga = grad_slot(n.in[0]);
        ga.rowwise() += g.row(0) / static_cast<double>(ga.rows());
        break;
      }
      case Op::SumAll:
        grad_slot(n.in[0]).array() += g(0, 0);
        break;
      case Op::MeanAll: {
        Matrix& ga = grad_slot(n.in[0]);
        ga.array() += g(0, 0) / static_cast<double>(ga.size());
        break;
      }
      case Op::Exp:
        grad_slot(n.in[0]) += g.cwiseProduct(n.value);
        break;
      case Op::Log:
        grad_slot(n.in[0]) += g.cwiseQuotient(nodes_[static_cast<std::size_t>(n.in[0])].value);
        break;
      case Op::Tanh:
        grad_slot(n.in[0]).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Relu: {
        const Matrix& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        grad_slot(n.in[0]).array() += g.array() * (a.array() > 0.0).cast<double>();
        break;
      }
      case Op::ClampMin: {
        const Matrix& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        grad_slot(n.in[0]).array() += g.array() * (a.array() > n.c0).cast<double>();
        break;
      }
      case Op::Sqrt:
        grad_slot(n.in[0]).array() += g.array() / (2.0 * n.value.array().max(1e-150));
        break;
      case Op::RowSoftmax: {
        Matrix& ga = grad_slot(n.in[0]);
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const double dot = g.row(i).dot(n.value.row(i));
          ga.row(i).array() += n.value.row(i).array() * (g.row(i).array() - dot);
        }
        break;
      }
      case Op::LayerNorm: {
        const Matrix& gain = nodes_[static_cast<std::size_t>(n.in[1])].value;
        Matrix& gx = grad_slot(n.in[0]);
        Matrix& ggain = grad_slot(n.in[1]);
        Matrix& gbias = grad_slot(n.in[2]);
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const Eigen::RowVectorXd q = g.row(i).cwiseProduct(gain.row(0));
          const double mq = q.mean();
          const double mqx = q.cwiseProduct(n.aux0.row(i)).mean();
          gx.row(i).array() +=
              (q.array() - mq - n.aux0.row(i).array() * mqx) * n.aux1(i, 0);
          ggain.row(0) += g.row(i).cwiseProduct(n.aux0.row(i));
          gbias.row(0) += g.row(i);
        }
        break;
      }
      case Op::ConcatCols: {
        Eigen::Index off = 0;
        for (int src : n.many) {
          Matrix& gs = grad_slot(src);
          gs += g.middleCols(off, gs.cols());
          off += gs.cols();
        }
        break;
      }
      case Op::ConcatRows: {
        Eigen::Index off = 0;
        for (int src : n.many) {
          Matrix& gs = grad_slot(src);
          gs += g.middleRows(off, gs.rows());
          off += gs.rows();
        }
        break;
      }
      case Op::SliceCols:
        grad_slot(n.in[0]).middleCols(n.i0, n.i1) += g;
        break;
      case Op::SliceRows:
        grad_slot(n.in[0]).middleRows(n.i0, n.i1) += g;
        break;
      case Op::Transpose:
        grad_slot(n.in[0]) += g.transpose();
        break;
      case Op::SqDist: {
        const Matrix& a = nodes_[static_cast<std::size_t>(n.in[0])].value;
        const Matrix& b = nodes_[static_cast<std::size_t>(n.in[1])].value;
        grad_slot(n.in[0]) +=
            2.0 * (g.rowwise().sum().asDiagonal() * a - g * b);
        grad_slot(n.in[1]) +=
            2.0 * (g.colwise().sum().transpose().asDiagonal() * b - g.transpose() * a);
        break;
      }
      case Op::Diag: {
        Matrix& ga = grad_slot(n.in[0]);
        ga.diagonal() += g.col(0);
        break;
      }
      case Op::Neg:
        grad_slot(n.in[0]) -= g;
        break;
    }
  }
}

GradCheckResult grad_check(const BuildFn& build, const std::vector<Matrix>& leaves,
                           std::uint64_t seed, int max_coords, double step) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : leaves) vars.push_back(tape.input(m));
  const Var root = build(tape, vars);
  if (tape.value(root).size() != 1) throw ContractError("grad_check: root must be 1x1");
  tape.backward(root);

  auto eval = [&](const std::vector<Matrix>& xs, double& out) {
    Tape t;
    std::vector<Var> vs;
    for (const auto& m : xs) vs.push_back(t.input(m));
    out = t.value(build(t, vs))(0, 0);
    return t.kink_signature();
  };

  GradCheckResult res;
  Rng rng(seed);
  std::vector<Matrix> probe = leaves;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const int numel = static_cast<int>(leaves[l].size());
    Rng leaf_rng = rng.fork(l + 1);
    std::vector<int> coords(static_cast<std::size_t>(numel));
    for (int i = 0; i < numel; ++i) coords[static_cast<std::size_t>(i)] = i;
    if (numel > max_coords)
      coords = leaf_rng.sample_without_replacement(numel, max_coords);
    const Matrix& g = tape.grad(vars[l]);
    for (int flat : coords) {
      const Eigen::Index r = flat % leaves[l].rows();
      const Eigen::Index c = flat / leaves[l].rows();
      const double saved = probe[l](r, c);
      double fp = 0.0, fm = 0.0;
      probe[l](r, c) = saved + step;
      const std::uint64_t sig_p = eval(probe, fp);
      probe[l](r, c) = saved - step;
      const std::uint64_t sig_m = eval(probe, fm);
      probe[l](r, c) = saved;
      if (sig_p != sig_m) {
        ++res.skipped;
        continue;
      }
      const double fd = (fp - fm) / (2.0 * step);
      const double an = g(r, c);
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace graphvec::ad
