#pragma once

#include <Eigen/Dense>

namespace graphvec {

using Matrix = Eigen::MatrixXd;

// Data-parallel numeric kernels.  Each has an OpenMP-parallel entry point and
// a `_serial` reference implementation kept for testing and benchmarking; the
// two are bit-identical for any thread count because every output entry (and
// every reduction) is computed in a fixed order.

// Squared Euclidean distances between rows: out(i,j) = ‖a_i − b_j‖².
// Computed by direct differencing (no ‖a‖²+‖b‖²−2ab expansion) so nearby
// points do not lose precision to cancellation.
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);
Matrix pairwise_sqdist_serial(const Matrix& a, const Matrix& b);

// Mean of the n(n−1)/2 distinct pairwise Euclidean distances between rows.
// Throws DegenerateInputError for fewer than two rows or when all rows
// coincide (a zero mean distance would make the Gaussian kernel ill-defined).
double mean_pairwise_distance(const Matrix& x);
double mean_pairwise_distance_serial(const Matrix& x);

// Gaussian similarity over all rows of x: K(u,v) = exp(−‖x_u−x_v‖²/(2λμ²)),
// unit diagonal exactly.
Matrix gaussian_gram(const Matrix& x, double lambda, double mu);
Matrix gaussian_gram_serial(const Matrix& x, double lambda, double mu);

// Rectangular Gaussian kernel between two point sets using a fixed μ:
// out(u,v) = exp(−‖a_u − b_v‖²/(2λμ²)).
Matrix gaussian_cross(const Matrix& a, const Matrix& b, double lambda, double mu);
Matrix gaussian_cross_serial(const Matrix& a, const Matrix& b, double lambda, double mu);

}  // namespace graphvec
