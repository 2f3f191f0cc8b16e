#pragma once

#include <cstdint>
#include <vector>

#include "graphvec/kernels.hpp"

namespace graphvec {

// Spectral clustering of vector collections plus the standard clustering
// quality metrics (Hungarian-matched accuracy, NMI, ARI).

// Mutual-kNN cosine-similarity graph (k_nn = 10 capped at n−1, negative
// similarities clamped to 0, unit self-loops), symmetric-normalized
// Laplacian, bottom-k eigenvectors row-normalized, then seeded k-means++
// with 10 restarts.  Labels are 0..k−1.
std::vector<int> spectral_cluster(const Matrix& vectors, int k, std::uint64_t seed);

// Seeded k-means++ on rows: `restarts` independent initializations, Lloyd
// iterations to a fixed assignment, lowest within-cluster sum of squares
// wins.  Exposed for direct use on embedded points.
std::vector<int> kmeans_rows(const Matrix& points, int k, std::uint64_t seed,
                             int restarts = 10, int max_iters = 200);

struct ClusterMetrics {
  double acc = 0.0;  // Hungarian-matched accuracy, [0,1]
  double nmi = 0.0;  // arithmetic-mean normalization, [0,1]
  double ari = 0.0;  // [−1,1]
};

// Label values are arbitrary ints; only the induced partitions matter.
ClusterMetrics cluster_metrics(const std::vector<int>& pred, const std::vector<int>& truth);

// Maximum-total-weight assignment of rows to columns of a non-negative
// matrix (rows ≤ cols after internal padding); returns the matched weight.
double hungarian_max_weight(const Matrix& weights);

}  // namespace graphvec
