#include "graphvec/align.hpp"

#include <Eigen/SVD>

#include <cmath>

#include "graphvec/errors.hpp"

namespace graphvec {

void AlignConfig::validate() const {
  if (!(gamma > 0.0)) throw ParameterError("AlignConfig: gamma must be positive");
  if (eta < 0.0) throw ParameterError("AlignConfig: eta must be nonnegative");
  if (max_sweeps < 1) throw ParameterError("AlignConfig: max_sweeps must be >= 1");
  if (tol < 0.0) throw ParameterError("AlignConfig: tol must be nonnegative");
}

Matrix polar_factor(const Matrix& h) {
  if (h.rows() != h.cols()) throw ShapeError("polar_factor: matrix not square");
  if (!h.allFinite()) throw NumericError("polar_factor: nonfinite input");
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double alignment_density(const std::vector<Eigen::VectorXd>& means,
                         const std::vector<Matrix>& rotations, double gamma) {
  const std::size_t m = means.size();
  if (rotations.size() != m)
    throw ShapeError("alignment_density: rotation count != mean count");
  std::vector<Eigen::VectorXd> v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = rotations[i] * means[i];
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) sum += std::exp(-gamma * (v[i] - v[j]).squaredNorm());
  return sum / static_cast<double>(m);
}

AlignResult align_rotations(const std::vector<Eigen::VectorXd>& means, const AlignConfig& cfg,
                            const std::vector<Matrix>* init,
                            const std::vector<bool>* frozen) {
  cfg.validate();
  const std::size_t m = means.size();
  if (m == 0) throw ParameterError("align_rotations: no means given");
  const Eigen::Index d = means[0].size();
  if (d < 1) throw ParameterError("align_rotations: zero-dimensional means");
  for (const auto& mu : means) {
    if (mu.size() != d) throw ShapeError("align_rotations: mean dimensions differ");
    if (!mu.allFinite()) throw NumericError("align_rotations: nonfinite mean");
  }
  if (init != nullptr && init->size() != m)
    throw ParameterError("align_rotations: init rotation count != mean count");
  if (frozen != nullptr && frozen->size() != m)
    throw ParameterError("align_rotations: frozen flag count != mean count");

  AlignResult res;
  res.rotations.assign(m, Matrix::Identity(d, d));
  if (init != nullptr) {
    for (std::size_t i = 0; i < m; ++i) {
      const Matrix& r = (*init)[i];
      if (r.rows() != d || r.cols() != d)
        throw ShapeError("align_rotations: init rotation has wrong shape");
      if ((r.transpose() * r - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-6)
        throw ParameterError("align_rotations: init rotation is not orthonormal");
      res.rotations[i] = r;
    }
  }

  std::vector<Eigen::VectorXd> v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = res.rotations[i] * means[i];
  res.trace.push_back(alignment_density(means, res.rotations, cfg.gamma));

  std::vector<Matrix> next(m);
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (frozen != nullptr && (*frozen)[i]) {
        next[i] = res.rotations[i];
        continue;
      }
      Eigen::VectorXd pull = Eigen::VectorXd::Zero(d);
      for (std::size_t j = 0; j < m; ++j)
        pull += std::exp(-cfg.gamma * (v[i] - v[j]).squaredNorm()) * v[j];
      const Matrix h = pull * means[i].transpose() + cfg.eta * res.rotations[i];
      next[i] = polar_factor(h);
      delta = std::max(delta, (next[i] - res.rotations[i]).norm());
    }
    res.rotations.swap(next);
    for (std::size_t i = 0; i < m; ++i) v[i] = res.rotations[i] * means[i];
    res.trace.push_back(alignment_density(means, res.rotations, cfg.gamma));
    res.sweeps = sweep + 1;
    if (delta < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace graphvec
