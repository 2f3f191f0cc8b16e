#pragma once

#include <cstdint>
#include <vector>

#include "graphvec/graph.hpp"
#include "graphvec/train.hpp"

namespace graphvec {

// Few-shot graph classification on top of a frozen pre-trained model: the
// downstream train split is embedded and aligned against the frozen
// pre-training means/rotations, the test split is embedded through the
// cross-kernel map against the train factors and aligned against the frozen
// train + pre-training state, and a small softmax head is fit on the train
// vectors.

struct FewShotTask {
  GraphDataset downstream;
  int shots = 10;                // k graphs per class for training
  std::uint64_t split_seed = 0;
  int classifier_epochs = 500;
  double classifier_lr = 0.001;

  void validate() const;
};

struct FewShotSplit {
  std::vector<int> train_indices;  // k per class, ascending
  std::vector<int> test_indices;   // remainder, ascending
};

// Seeded uniform k-per-class draw without replacement; the remainder is the
// test split.  Classes are visited in ascending label order.  A class with
// fewer than k graphs is a parameter error; exactly k leaves it absent from
// the test split.
FewShotSplit split_by_class(const GraphDataset& ds, int k, std::uint64_t seed);

struct FewShotEmbedding {
  FewShotSplit split;
  Matrix train_vectors;  // |train| × vector_width
  std::vector<int> train_labels;
  Matrix test_vectors;   // |test| × vector_width (0 rows when the split is empty)
  std::vector<int> test_labels;
  std::vector<Matrix> train_rotation;  // per scale
  std::vector<Matrix> test_rotation;   // per scale
};

// Algorithm: embed the train split exactly (no blocking/landmarks — the
// split is small by construction), optimize its rotation against the frozen
// pre-training means, map the test split through the cross-kernel formula
// against the train factors, optimize the test rotation against the frozen
// train + pre-training state, then encode both splits with the frozen model.
// Pure read of the model.
FewShotEmbedding fewshot_embed(const FewShotTask& task, const PretrainedModel& model);

struct SoftmaxClassifier {
  Matrix w;           // classes × dim
  Eigen::VectorXd b;  // classes

  int num_classes() const { return static_cast<int>(w.rows()); }
  Matrix probabilities(const Matrix& x) const;  // rows sum to 1
  std::vector<int> predict(const Matrix& x) const;
};

// Full-batch gradient descent on mean cross-entropy from zero-initialized
// weights.  Labels must be non-negative; the class count is max(label)+1.
// Zero epochs returns the zero classifier (uniform probabilities).
SoftmaxClassifier fit_softmax_classifier(const Matrix& x, const std::vector<int>& labels,
                                         int epochs, double lr);

// End-to-end task accuracy on the test split.
double fewshot_eval(const FewShotTask& task, const PretrainedModel& model);

// Whole-dataset vectors through a frozen model: exact embedding, one free
// rotation per scale against the frozen pre-training state, then encoding.
// Labels are not required.  `rotation` (optional) receives the solved
// per-scale rotations.
Matrix embed_dataset_vectors(const GraphDataset& ds, const PretrainedModel& model,
                             std::vector<Matrix>* rotation = nullptr);

}  // namespace graphvec
