#include "graphvec/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "graphvec/align.hpp"
#include "graphvec/embed.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

void FewShotTask::validate() const {
  downstream.validate();
  if (!downstream.has_labels())
    throw ContractError("FewShotTask: downstream dataset must be labeled");
  if (shots < 1) throw ParameterError("FewShotTask: shots must be >= 1");
  if (classifier_epochs < 0)
    throw ParameterError("FewShotTask: classifier_epochs must be non-negative");
  if (!(classifier_lr > 0.0))
    throw ParameterError("FewShotTask: classifier_lr must be positive");
}

FewShotSplit split_by_class(const GraphDataset& ds, int k, std::uint64_t seed) {
  if (!ds.has_labels()) throw ContractError("split_by_class: dataset must be labeled");
  if (k < 1) throw ParameterError("split_by_class: k must be >= 1");

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < ds.size(); ++i)
    by_class[ds.graphs[static_cast<std::size_t>(i)].label].push_back(i);

  Rng rng(seed);
  FewShotSplit split;
  for (const auto& [label, members] : by_class) {
    const int size = static_cast<int>(members.size());
    if (size < k)
      throw ParameterError("split_by_class: class " + std::to_string(label) + " has " +
                           std::to_string(size) + " graphs, fewer than k=" +
                           std::to_string(k));
    const std::vector<int> picked = rng.sample_without_replacement(size, k);
    std::vector<char> is_train(static_cast<std::size_t>(size), 0);
    for (int p : picked) is_train[static_cast<std::size_t>(p)] = 1;
    for (int j = 0; j < size; ++j)
      (is_train[static_cast<std::size_t>(j)] ? split.train_indices : split.test_indices)
          .push_back(members[static_cast<std::size_t>(j)]);
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  return split;
}

namespace {

GraphDataset subset_dataset(const GraphDataset& ds, const std::vector<int>& indices,
                            const std::string& suffix) {
  GraphDataset out;
  out.name = ds.name + suffix;
  out.has_attributes = ds.has_attributes;
  out.attribute_dim = ds.attribute_dim;
  for (int i : indices) out.graphs.push_back(ds.graphs[static_cast<std::size_t>(i)]);
  return out;
}

// Test-split attribute rows, stacked in split order with the same raw /
// synthesized convention the training embed used.
Matrix stacked_test_attributes(const GraphDataset& ds, const std::vector<int>& indices,
                               int embed_dim, std::vector<int>& offsets,
                               std::vector<int>& sizes) {
  offsets.clear();
  sizes.clear();
  int total = 0;
  for (int i : indices) {
    offsets.push_back(total);
    sizes.push_back(ds.graphs[static_cast<std::size_t>(i)].n());
    total += sizes.back();
  }
  const int dim = ds.has_attributes ? ds.attribute_dim : embed_dim;
  Matrix x(total, dim);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto& g = ds.graphs[static_cast<std::size_t>(indices[j])];
    x.middleRows(offsets[j], g.n()) =
        ds.has_attributes ? g.attributes : synthesize_attributes(g.adjacency, embed_dim);
  }
  return x;
}

// One free rotation (index 0, identity start) against a tail of frozen
// (mean, rotation) pairs.
Matrix solve_frozen_alignment(const Eigen::VectorXd& free_mean,
                              const std::vector<const Eigen::VectorXd*>& frozen_means,
                              const std::vector<const Matrix*>& frozen_rotations,
                              const AlignConfig& cfg) {
  const int d = static_cast<int>(free_mean.size());
  std::vector<Eigen::VectorXd> means = {free_mean};
  std::vector<Matrix> init = {Matrix::Identity(d, d)};
  std::vector<bool> frozen = {false};
  for (std::size_t i = 0; i < frozen_means.size(); ++i) {
    means.push_back(*frozen_means[i]);
    init.push_back(*frozen_rotations[i]);
    frozen.push_back(true);
  }
  return align_rotations(means, cfg, &init, &frozen).rotations[0];
}

// Encode graphs through the frozen model in bounded-size batches; graphs are
// independent under the encoder/readout, so chunking does not change values.
Matrix encode_chunked(const PretrainedModel& model, const GraphDataset& ds,
                      const std::vector<std::vector<Matrix>>& feats) {
  const int chunk = 64;
  Matrix out;
  for (int start = 0; start < ds.size(); start += chunk) {
    const int len = std::min(chunk, ds.size() - start);
    std::vector<const Graph*> graphs;
    std::vector<std::vector<Matrix>> part;
    for (int i = start; i < start + len; ++i) {
      graphs.push_back(&ds.graphs[static_cast<std::size_t>(i)]);
      part.push_back(feats[static_cast<std::size_t>(i)]);
    }
    const Matrix vecs = encode_graph_vectors(model, graphs, part);
    if (out.size() == 0) {
      out = vecs;
    } else {
      const Eigen::Index rows = out.rows();
      out.conservativeResize(rows + vecs.rows(), Eigen::NoChange);
      out.bottomRows(vecs.rows()) = vecs;
    }
  }
  return out;
}

}  // namespace

FewShotEmbedding fewshot_embed(const FewShotTask& task, const PretrainedModel& model) {
  task.validate();
  model.config.validate();
  if (model.datasets.empty())
    throw ContractError("fewshot_embed: model carries no pre-training alignment state");

  FewShotEmbedding out;
  out.split = split_by_class(task.downstream, task.shots, task.split_seed);
  const GraphDataset train = subset_dataset(task.downstream, out.split.train_indices, "#train");
  for (int i : out.split.train_indices)
    out.train_labels.push_back(task.downstream.graphs[static_cast<std::size_t>(i)].label);
  for (int i : out.split.test_indices)
    out.test_labels.push_back(task.downstream.graphs[static_cast<std::size_t>(i)].label);

  // The split is k-shot-small, so the exact single-block path is always used
  // regardless of any blocking/landmark settings from pre-training; the
  // cross-kernel test map requires single-block factors anyway.
  ScaleConfig scale = model.config.scale;
  scale.block_size = 0;
  scale.nystrom_landmarks = 0;
  const MultiScaleEmbedding emb = multi_scale_embed(train, scale);
  const int Q = scale.num_scales();

  std::vector<const Eigen::VectorXd*> pre_means;
  std::vector<const Matrix*> pre_rotations;
  for (int s = 0; s < Q; ++s) {
    // Train rotation: free against the frozen pre-training state.
    pre_means.clear();
    pre_rotations.clear();
    for (const auto& ds : model.datasets) {
      pre_means.push_back(&ds.means[static_cast<std::size_t>(s)]);
      pre_rotations.push_back(&ds.rotations[static_cast<std::size_t>(s)]);
    }
    const Eigen::VectorXd train_mean =
        emb.z[static_cast<std::size_t>(s)].colwise().mean().transpose();
    out.train_rotation.push_back(
        solve_frozen_alignment(train_mean, pre_means, pre_rotations, model.config.align));
  }

  std::vector<std::vector<Matrix>> train_feats =
      rotated_graph_features(emb, out.train_rotation);
  out.train_vectors = encode_chunked(model, train, train_feats);

  // Test split: cross-kernel node embeddings against the train factors, then
  // a free rotation against the frozen train + pre-training state.
  const GraphDataset test = subset_dataset(task.downstream, out.split.test_indices, "#test");
  std::vector<int> test_offsets, test_sizes;
  const Matrix x_test = stacked_test_attributes(task.downstream, out.split.test_indices,
                                                scale.embed_dim, test_offsets, test_sizes);
  std::vector<Matrix> z_test;  // per scale, stacked rows
  for (int s = 0; s < Q; ++s) z_test.push_back(cross_embed_test(x_test, emb, s));

  if (test.size() == 0) {
    out.test_rotation = out.train_rotation;
    out.test_vectors = Matrix(0, out.train_vectors.cols());
    return out;
  }

  for (int s = 0; s < Q; ++s) {
    pre_means.clear();
    pre_rotations.clear();
    const Eigen::VectorXd train_mean =
        emb.z[static_cast<std::size_t>(s)].colwise().mean().transpose();
    pre_means.push_back(&train_mean);
    pre_rotations.push_back(&out.train_rotation[static_cast<std::size_t>(s)]);
    for (const auto& ds : model.datasets) {
      pre_means.push_back(&ds.means[static_cast<std::size_t>(s)]);
      pre_rotations.push_back(&ds.rotations[static_cast<std::size_t>(s)]);
    }
    const Eigen::VectorXd test_mean =
        z_test[static_cast<std::size_t>(s)].colwise().mean().transpose();
    out.test_rotation.push_back(
        solve_frozen_alignment(test_mean, pre_means, pre_rotations, model.config.align));
  }

  std::vector<std::vector<Matrix>> test_feats;
  for (std::size_t g = 0; g < test_sizes.size(); ++g) {
    std::vector<Matrix> per_scale;
    for (int s = 0; s < Q; ++s)
      per_scale.push_back(
          z_test[static_cast<std::size_t>(s)].middleRows(test_offsets[g], test_sizes[g]) *
          out.test_rotation[static_cast<std::size_t>(s)].transpose());
    test_feats.push_back(std::move(per_scale));
  }
  out.test_vectors = encode_chunked(model, test, test_feats);
  return out;
}

Matrix embed_dataset_vectors(const GraphDataset& ds, const PretrainedModel& model,
                             std::vector<Matrix>* rotation) {
  ds.validate();
  model.config.validate();
  if (ds.size() == 0) throw ContractError("embed_dataset_vectors: empty dataset");
  if (model.datasets.empty())
    throw ContractError("embed_dataset_vectors: model carries no alignment state");

  ScaleConfig scale = model.config.scale;
  scale.block_size = 0;
  scale.nystrom_landmarks = 0;
  const MultiScaleEmbedding emb = multi_scale_embed(ds, scale);

  std::vector<Matrix> rotations;
  std::vector<const Eigen::VectorXd*> pre_means;
  std::vector<const Matrix*> pre_rotations;
  for (int s = 0; s < scale.num_scales(); ++s) {
    pre_means.clear();
    pre_rotations.clear();
    for (const auto& state : model.datasets) {
      pre_means.push_back(&state.means[static_cast<std::size_t>(s)]);
      pre_rotations.push_back(&state.rotations[static_cast<std::size_t>(s)]);
    }
    const Eigen::VectorXd mean =
        emb.z[static_cast<std::size_t>(s)].colwise().mean().transpose();
    rotations.push_back(
        solve_frozen_alignment(mean, pre_means, pre_rotations, model.config.align));
  }

  const std::vector<std::vector<Matrix>> feats = rotated_graph_features(emb, rotations);
  if (rotation) *rotation = std::move(rotations);
  return encode_chunked(model, ds, feats);
}

Matrix SoftmaxClassifier::probabilities(const Matrix& x) const {
  if (x.cols() != w.cols())
    throw ShapeError("SoftmaxClassifier: input width does not match the weights");
  Matrix logits = x * w.transpose();
  logits.rowwise() += b.transpose();
  const Eigen::VectorXd shift = logits.rowwise().maxCoeff();
  logits.colwise() -= shift;
  Matrix p = logits.array().exp();
  const Eigen::VectorXd sums = p.rowwise().sum();
  p.array().colwise() /= sums.array();
  return p;
}

std::vector<int> SoftmaxClassifier::predict(const Matrix& x) const {
  const Matrix p = probabilities(x);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < p.cols(); ++c)
      if (p(i, c) > p(i, best)) best = static_cast<int>(c);
    labels.push_back(best);
  }
  return labels;
}

SoftmaxClassifier fit_softmax_classifier(const Matrix& x, const std::vector<int>& labels,
                                         int epochs, double lr) {
  if (x.rows() == 0) throw ContractError("fit_softmax_classifier: empty training set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw ParameterError("fit_softmax_classifier: one label per row required");
  if (epochs < 0) throw ParameterError("fit_softmax_classifier: epochs must be >= 0");
  if (!(lr > 0.0)) throw ParameterError("fit_softmax_classifier: lr must be positive");
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw ParameterError("fit_softmax_classifier: labels must be non-negative");
    classes = std::max(classes, l + 1);
  }

  const int n = static_cast<int>(x.rows());
  Matrix y = Matrix::Zero(n, classes);
  for (int i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  SoftmaxClassifier clf;
  clf.w = Matrix::Zero(classes, x.cols());
  clf.b = Eigen::VectorXd::Zero(classes);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Matrix g = (clf.probabilities(x) - y) / static_cast<double>(n);
    clf.w.noalias() -= lr * (g.transpose() * x);
    clf.b.noalias() -= lr * g.colwise().sum().transpose();
  }
  return clf;
}

double fewshot_eval(const FewShotTask& task, const PretrainedModel& model) {
  const FewShotEmbedding emb = fewshot_embed(task, model);
  if (emb.test_vectors.rows() == 0)
    throw ContractError("fewshot_eval: the split leaves no test graphs");
  const SoftmaxClassifier clf = fit_softmax_classifier(
      emb.train_vectors, emb.train_labels, task.classifier_epochs, task.classifier_lr);
  const std::vector<int> pred = clf.predict(emb.test_vectors);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == emb.test_labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace graphvec
