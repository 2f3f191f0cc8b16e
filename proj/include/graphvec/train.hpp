#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphvec/align.hpp"
#include "graphvec/embed.hpp"
#include "graphvec/encoder.hpp"
#include "graphvec/graph.hpp"
#include "graphvec/params.hpp"
#include "graphvec/reference.hpp"
#include "graphvec/tape.hpp"

namespace graphvec {

// Contrastive pre-training: in-batch supervised (label positives) or
// unsupervised (augmented-view positives) losses over graph vectors, Adam
// with decoupled weight decay, and checkpoint persistence.

enum class TrainMode { Supervised, Unsupervised };

struct TrainConfig {
  double lr_main = 5e-4;        // shared learning rate
  double lr_gamma = 0.1;        // separate rate for the readout kernel width
  double weight_decay = 1e-5;   // decoupled, applied before each update
  int epochs = 50;
  int batch_size = 64;          // >= 2
  double temperature = 0.5;     // contrastive temperature
  TrainMode mode = TrainMode::Supervised;
  std::uint64_t seed = 0;
  int views = 3;                // augmented views per graph (unsupervised)
  double augment_ratio = 0.1;

  void validate() const;
};

// Everything the pipeline needs to go from raw datasets to graph vectors.
struct PipelineConfig {
  ScaleConfig scale;
  AlignConfig align;
  EncoderConfig encoder;
  ReferenceConfig reference;
  TrainConfig train;

  // Sub-configs plus cross-checks: the encoder consumes one feature block per
  // kernel scale, so its scales/embed_dim must match the scale settings.
  void validate() const;
};

// Supervised contrastive loss over a batch of graph vectors (rows).  For each
// anchor i with in-batch same-class partners C(i), the per-anchor term is
// −(1/|C(i)|)·Σ_{u∈C(i)} log p_iu with p_iu = exp ζ(i,u)/Σ_{v≠i} exp ζ(i,v)
// and ζ = cosine/τ; anchors with empty C(i) are excluded from the anchor
// average.  A batch where no anchor has a positive yields constant 0 and logs
// a warning.  Batches of fewer than 2 rows are a contract error.
ad::Var scl_loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& labels,
                 double tau);

// Unsupervised variant: positives[i] lists the anchor's view rows.  Every
// anchor must have at least one positive (views guarantee this) or a
// contract error is thrown.
ad::Var ucl_loss(ad::Tape& tape, ad::Var vectors,
                 const std::vector<std::vector<int>>& positives, double tau);

struct AdamConfig {
  double lr = 5e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Adam with decoupled weight decay.  Per-parameter learning-rate overrides
// and decay flags from the ParamSet are honoured; decay multiplies the
// parameter by (1 − lr·decay_factor) before the moment update.
class Adam {
 public:
  Adam(const AdamConfig& cfg, const ParamSet& ps);

  void step(ParamSet& ps, const std::vector<Matrix>& grads);

  int steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Matrix>& moment1() const { return m_; }
  const std::vector<Matrix>& moment2() const { return v_; }
  // Reinstate optimizer state from a checkpoint.
  void restore(int t, std::vector<Matrix> m, std::vector<Matrix> v);

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Per-dataset alignment state captured at pre-training time; means are the
// raw (unrotated) column means of the dataset's per-scale node embeddings.
struct PretrainDatasetState {
  std::string name;
  std::vector<Eigen::VectorXd> means;  // one per scale
  std::vector<Matrix> rotations;       // one per scale
};

struct PretrainedModel {
  PipelineConfig config;
  ParamSet params;
  std::vector<PretrainDatasetState> datasets;
  int adam_steps = 0;
  std::vector<Matrix> adam_m, adam_v;

  int dataset_index(const std::string& name) const;  // -1 when absent
};

struct EpochLog {
  int epoch = 0;  // 1-based
  std::string dataset;
  double mean_loss = 0.0;
};

// Unsupervised view expansion: every graph is followed by `views` augmented
// copies (kinds cycle node-drop → edge-perturb → subgraph), deterministically
// seeded.  Runs before embedding so originals and views share one space.
GraphDataset expand_with_views(const GraphDataset& ds, int views, double ratio,
                               std::uint64_t seed);

// Per-graph, per-scale node embeddings rotated into the aligned frame
// (rows transform as z ↦ z·Rᵀ).
std::vector<std::vector<Matrix>> rotated_graph_features(const MultiScaleEmbedding& emb,
                                                        const std::vector<Matrix>& rotations);

// Full pre-training pipeline: embed every dataset, align per-scale means
// across datasets, then optimize encoder + readout parameters with the
// configured contrastive loss.  Epochs iterate datasets round-robin with
// seeded per-dataset batch shuffles; `log` (optional) receives one record per
// (epoch, dataset) with the mean batch loss.
PretrainedModel pretrain(const std::vector<GraphDataset>& datasets,
                         const PipelineConfig& cfg, std::vector<EpochLog>* log = nullptr);

// Deterministic no-training forward pass through a model's encoder + readout.
Matrix encode_graph_vectors(const PretrainedModel& model,
                            const std::vector<const Graph*>& graphs,
                            const std::vector<std::vector<Matrix>>& rotated_z);

// Checkpoint file: JSON manifest (configs, parameter metadata, dataset names)
// plus named little-endian float64 blocks for parameters, optimizer moments,
// and per-dataset alignment state.  save(load(p)) is byte-identical to the
// original file.
void save_checkpoint(const std::string& path, const PretrainedModel& model);
PretrainedModel load_checkpoint(const std::string& path);

void append_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace graphvec
