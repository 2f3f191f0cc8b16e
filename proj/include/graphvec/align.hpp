#pragma once

#include <vector>

#include "graphvec/kernels.hpp"

namespace graphvec {

// Rotation alignment of a set of mean vectors: find orthogonal R_i maximising
// the kernel density of the rotated means v_i = R_i μ_i,
//   density = (1/M) Σ_i Σ_j exp(−γ‖v_i − v_j‖²)   (diagonal included).
// Solved by damped simultaneous polar updates: every sweep forms
//   H_i = Σ_j exp(−γ‖v_i − v_j‖²) v_j μ_iᵀ + η R_i
// from a snapshot of the current state and replaces R_i with the orthogonal
// polar factor of H_i.  Frozen entries keep their rotation but still attract
// the others.

struct AlignConfig {
  double gamma = 1.0;   // kernel sharpness, > 0
  double eta = 0.1;     // damping toward the current rotation, >= 0
  int max_sweeps = 200;
  double tol = 1e-6;    // stop when max Frobenius rotation delta drops below

  void validate() const;
};

struct AlignResult {
  std::vector<Matrix> rotations;
  std::vector<double> trace;  // density at initialisation, then after each sweep
  int sweeps = 0;
  bool converged = false;
};

// `init` (optional) supplies starting rotations; each must be orthonormal to
// 1e−6 or ParameterError is thrown.  `frozen` (optional, same length) marks
// rotations that must not move.
AlignResult align_rotations(const std::vector<Eigen::VectorXd>& means, const AlignConfig& cfg,
                            const std::vector<Matrix>* init = nullptr,
                            const std::vector<bool>* frozen = nullptr);

// The objective above for a given state.
double alignment_density(const std::vector<Eigen::VectorXd>& means,
                         const std::vector<Matrix>& rotations, double gamma);

// Orthogonal polar factor U Vᵀ of a square matrix via SVD.
Matrix polar_factor(const Matrix& h);

}  // namespace graphvec
