#include "graphvec/kernels.hpp"

#include <cmath>
#include <vector>

#include "graphvec/errors.hpp"
#include "graphvec/threads.hpp"

namespace graphvec {

namespace {

void check_cols(const Matrix& a, const Matrix& b, const char* op) {
  if (a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": column counts differ (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()) + ")");
}

void check_finite(const Matrix& x, const char* op) {
  if (!x.allFinite()) throw NumericError(std::string(op) + ": nonfinite input entry");
}

inline void sqdist_row(const Matrix& a, const Matrix& b, Eigen::Index i, Matrix& out) {
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    out(i, j) = (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

Matrix pairwise_sqdist_serial(const Matrix& a, const Matrix& b) {
  check_cols(a, b, "pairwise_sqdist");
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) sqdist_row(a, b, i, out);
  return out;
}

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  check_cols(a, b, "pairwise_sqdist");
  Matrix out(a.rows(), b.rows());
  const Eigen::Index n = a.rows();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (Eigen::Index i = 0; i < n; ++i) sqdist_row(a, b, i, out);
  return out;
}

namespace {

// Shared two-phase mean: per-row partial sums over j > i, then a fixed-order
// combine, so the result does not depend on thread count.
double mean_distance_impl(const Matrix& x, bool parallel) {
  if (x.rows() < 2) throw DegenerateInputError("mean_pairwise_distance: need at least two rows");
  check_finite(x, "mean_pairwise_distance");
  const Eigen::Index n = x.rows();
  std::vector<double> row_sums(static_cast<std::size_t>(n), 0.0);
  if (parallel) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) s += (x.row(i) - x.row(j)).norm();
      row_sums[static_cast<std::size_t>(i)] = s;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) s += (x.row(i) - x.row(j)).norm();
      row_sums[static_cast<std::size_t>(i)] = s;
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += row_sums[static_cast<std::size_t>(i)];
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double mu = total / pairs;
  if (mu <= 0.0)
    throw DegenerateInputError("mean_pairwise_distance: all points identical (mu = 0)");
  return mu;
}

// Symmetric Gaussian fill: each unordered pair handled by exactly one row
// iteration, so the parallel loop writes disjoint entries.
void gram_rows(const Matrix& x, double inv_denom, Eigen::Index i, Matrix& k) {
  k(i, i) = 1.0;
  for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
    const double v = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv_denom);
    k(i, j) = v;
    k(j, i) = v;
  }
}

double gram_coefficient(const Matrix& x, double lambda, double mu, const char* op) {
  if (lambda <= 0.0) throw ParameterError(std::string(op) + ": lambda must be positive");
  if (mu <= 0.0) throw ParameterError(std::string(op) + ": mu must be positive");
  check_finite(x, op);
  return 1.0 / (2.0 * lambda * mu * mu);
}

}  // namespace

double mean_pairwise_distance(const Matrix& x) { return mean_distance_impl(x, true); }
double mean_pairwise_distance_serial(const Matrix& x) { return mean_distance_impl(x, false); }

Matrix gaussian_gram(const Matrix& x, double lambda, double mu) {
  const double c = gram_coefficient(x, lambda, mu, "gaussian_gram");
  Matrix k(x.rows(), x.rows());
  const Eigen::Index n = x.rows();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (Eigen::Index i = 0; i < n; ++i) gram_rows(x, c, i, k);
  return k;
}

Matrix gaussian_gram_serial(const Matrix& x, double lambda, double mu) {
  const double c = gram_coefficient(x, lambda, mu, "gaussian_gram");
  Matrix k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) gram_rows(x, c, i, k);
  return k;
}

namespace {

void cross_row(const Matrix& a, const Matrix& b, double inv_denom, Eigen::Index i, Matrix& k) {
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv_denom);
}

}  // namespace

Matrix gaussian_cross(const Matrix& a, const Matrix& b, double lambda, double mu) {
  check_cols(a, b, "gaussian_cross");
  const double c = gram_coefficient(b, lambda, mu, "gaussian_cross");
  check_finite(a, "gaussian_cross");
  Matrix k(a.rows(), b.rows());
  const Eigen::Index n = a.rows();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
  for (Eigen::Index i = 0; i < n; ++i) cross_row(a, b, c, i, k);
  return k;
}

Matrix gaussian_cross_serial(const Matrix& a, const Matrix& b, double lambda, double mu) {
  check_cols(a, b, "gaussian_cross");
  const double c = gram_coefficient(b, lambda, mu, "gaussian_cross");
  check_finite(a, "gaussian_cross");
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) cross_row(a, b, c, i, k);
  return k;
}

}  // namespace graphvec
