#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphvec/graph.hpp"
#include "graphvec/kernels.hpp"

namespace graphvec {

// Multi-bandwidth Gaussian-gram node embeddings for one dataset: all node
// attribute rows are stacked, a Gaussian similarity over the stack is built
// per bandwidth, and nodes are embedded by truncated SVD.
struct ScaleConfig {
  std::vector<double> lambdas = {0.25, 0.5, 1.0, 2.0, 5.0, 10.0};
  int embed_dim = 32;         // d̄
  int block_size = 0;         // 0 = exact unblocked; blocked runs use consecutive
                              // graph ranges of this many graphs (128 is the
                              // conventional size for large corpora)
  int nystrom_landmarks = 0;  // 0 = exact gram; otherwise landmark count m
  std::uint64_t seed = 0;     // landmark sampling

  int num_scales() const { return static_cast<int>(lambdas.size()); }
  void validate() const;
};

// Right factors retained for the test-time cross-kernel map
// Z_new = K(X_new, X_train)·V·Σ^{−1/2}.
struct ScaleFactors {
  Matrix v;               // block_rows × d̄
  Eigen::VectorXd sigma;  // d̄, non-negative, descending
};

struct EmbeddingBlock {
  int first_graph = 0, num_graphs = 0;
  int first_row = 0, num_rows = 0;
  double mu = 0.0;                    // mean pairwise distance within the block
  std::vector<ScaleFactors> factors;  // one per scale
};

struct MultiScaleEmbedding {
  ScaleConfig config;
  std::string dataset_name;
  std::vector<int> graph_offsets;  // row offset of each graph in the stack
  std::vector<int> graph_sizes;
  Matrix x;                        // stacked input attributes (raw or synthesized)
  std::vector<Matrix> z;           // per scale: N̄ × d̄
  std::vector<EmbeddingBlock> blocks;

  int total_rows() const { return static_cast<int>(x.rows()); }
  int num_graphs() const { return static_cast<int>(graph_sizes.size()); }
  // The rows of scale q's embedding belonging to one graph.
  Matrix graph_slice(int scale, int graph) const;
};

struct SvdEmbedding {
  Matrix z;               // n × d̄
  Matrix v;               // n × d̄
  Eigen::VectorXd sigma;  // d̄
};

// Z = U_d̄ Σ_d̄^{1/2} of a symmetric PSD matrix, with each singular vector
// flipped so its largest-magnitude entry is positive (ties: lowest index);
// singular values descending.  Eigenvalues below −1e−10·λ_max trip a numeric
// error; small negatives within tolerance clamp to zero.
SvdEmbedding truncated_svd_embed(const Matrix& k, int embed_dim);

// Top-d̄ left singular vectors of A + I (no singular-value scaling); columns
// beyond rank/n are zero-padded so every graph yields the same width.
Matrix synthesize_attributes(const Matrix& adjacency, int embed_dim);

// Nyström low-rank path: seeded uniform landmark sampling without
// replacement; eigenvalues of the landmark gram below 1e−10·λ_max are
// discarded before inversion.  The embedding is returned in its left-singular
// basis so the cross-kernel factor formula applies unchanged; at
// landmarks = N̄ it reproduces the exact path's gram.
SvdEmbedding nystrom_embed(const Matrix& x, double lambda, double mu, int embed_dim,
                           int landmarks, std::uint64_t seed);

MultiScaleEmbedding multi_scale_embed(const GraphDataset& ds, const ScaleConfig& cfg);

// Test-time embedding against training factors (single-block trainings only):
// Z_test = K_test·V·Σ^{−1/2} with K_test the Gaussian cross-kernel under the
// training μ.  Empty input yields a 0×d̄ matrix.
Matrix cross_embed_test(const Matrix& x_test, const MultiScaleEmbedding& train, int scale);

void save_embedding(const std::string& path, const MultiScaleEmbedding& emb);
MultiScaleEmbedding load_embedding(const std::string& path);

}  // namespace graphvec
