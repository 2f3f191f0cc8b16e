#include "graphvec/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>

#include "graphvec/blockio.hpp"
#include "graphvec/config_json.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

namespace {

// splitmix64 finalizer; used to derive independent seeds from (seed, index)
// pairs without threading generator state through the call graph.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_main > 0.0)) throw ParameterError("TrainConfig: lr_main must be positive");
  if (!(lr_gamma > 0.0)) throw ParameterError("TrainConfig: lr_gamma must be positive");
  if (weight_decay < 0.0)
    throw ParameterError("TrainConfig: weight_decay must be non-negative");
  if (epochs < 0) throw ParameterError("TrainConfig: epochs must be non-negative");
  if (batch_size < 2) throw ParameterError("TrainConfig: batch_size must be >= 2");
  if (!(temperature > 0.0))
    throw ParameterError("TrainConfig: temperature must be positive");
  if (views < 1) throw ParameterError("TrainConfig: views must be >= 1");
  if (augment_ratio < 0.0 || augment_ratio >= 1.0)
    throw ParameterError("TrainConfig: augment_ratio must be in [0,1)");
}

void PipelineConfig::validate() const {
  scale.validate();
  align.validate();
  encoder.validate();
  reference.validate();
  train.validate();
  if (encoder.scales != scale.num_scales())
    throw ParameterError("PipelineConfig: encoder.scales must match the kernel scale count");
  if (encoder.embed_dim != scale.embed_dim)
    throw ParameterError("PipelineConfig: encoder.embed_dim must match scale.embed_dim");
}

namespace {

// Shared form of both contrastive losses:
//   loss = Σ_i w_i·log(Σ_{v≠i} exp ζ_iv) − Σ_i Σ_{u∈pos_i} ζ_iu/(A·|pos_i|)
// with w_i = 1/A for anchors that have positives, A = #such anchors.
ad::Var contrastive_loss(ad::Tape& tape, ad::Var vectors,
                         const std::vector<std::vector<int>>& positives, double tau) {
  const Matrix& g = tape.value(vectors);
  const int n = static_cast<int>(g.rows());

  int active = 0;
  for (const auto& p : positives)
    if (!p.empty()) ++active;

  Matrix w_pos = Matrix::Zero(n, n);
  Matrix w_valid = Matrix::Zero(n, 1);
  for (int i = 0; i < n; ++i) {
    if (positives[static_cast<std::size_t>(i)].empty()) continue;
    w_valid(i, 0) = 1.0 / active;
    const double w =
        1.0 / (static_cast<double>(active) *
               static_cast<double>(positives[static_cast<std::size_t>(i)].size()));
    for (int u : positives[static_cast<std::size_t>(i)]) w_pos(i, u) = w;
  }

  const ad::Var norms =
      tape.sqrt(tape.clamp_min(tape.row_sum(tape.mul(vectors, vectors)), 1e-24));
  const ad::Var outer = tape.matmul(norms, tape.transpose(norms));
  const ad::Var zeta = tape.scale(
      tape.divide(tape.matmul(vectors, tape.transpose(vectors)), outer), 1.0 / tau);
  const ad::Var e = tape.exp(zeta);
  const ad::Var denom = tape.sub(tape.row_sum(e), tape.diag(e));
  const ad::Var pos_term = tape.sum_all(tape.mul(zeta, tape.input(w_pos)));
  const ad::Var log_term = tape.sum_all(tape.mul(tape.log(denom), tape.input(w_valid)));
  return tape.sub(log_term, pos_term);
}

void check_batch_shape(const ad::Tape& tape, ad::Var vectors, std::size_t listed,
                       const char* who) {
  const Matrix& g = tape.value(vectors);
  if (g.rows() < 2)
    throw ContractError(std::string(who) + ": batch must contain at least 2 vectors");
  if (static_cast<std::size_t>(g.rows()) != listed)
    throw ParameterError(std::string(who) + ": one entry per batch row required");
}

}  // namespace

ad::Var scl_loss(ad::Tape& tape, ad::Var vectors, const std::vector<int>& labels,
                 double tau) {
  if (!(tau > 0.0)) throw ParameterError("scl_loss: tau must be positive");
  check_batch_shape(tape, vectors, labels.size(), "scl_loss");
  const int n = static_cast<int>(labels.size());

  std::vector<std::vector<int>> positives(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < n; ++u)
      if (u != i && labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(i)])
        positives[static_cast<std::size_t>(i)].push_back(u);

  bool any = false;
  for (const auto& p : positives) any = any || !p.empty();
  if (!any) {
    std::fprintf(stderr,
                 "scl_loss: no anchor has an in-batch positive; batch contributes 0\n");
    return tape.input(Matrix::Zero(1, 1));
  }
  return contrastive_loss(tape, vectors, positives, tau);
}

ad::Var ucl_loss(ad::Tape& tape, ad::Var vectors,
                 const std::vector<std::vector<int>>& positives, double tau) {
  if (!(tau > 0.0)) throw ParameterError("ucl_loss: tau must be positive");
  check_batch_shape(tape, vectors, positives.size(), "ucl_loss");
  const int n = static_cast<int>(positives.size());
  for (int i = 0; i < n; ++i) {
    const auto& p = positives[static_cast<std::size_t>(i)];
    if (p.empty())
      throw ContractError("ucl_loss: anchor " + std::to_string(i) + " has no positives");
    for (int u : p)
      if (u < 0 || u >= n || u == i)
        throw ParameterError("ucl_loss: invalid positive index for anchor " +
                             std::to_string(i));
  }
  return contrastive_loss(tape, vectors, positives, tau);
}

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("AdamConfig: lr must be positive");
  if (weight_decay < 0.0) throw ParameterError("AdamConfig: weight_decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ParameterError("AdamConfig: betas must lie in [0,1)");
  if (!(eps > 0.0)) throw ParameterError("AdamConfig: eps must be positive");
}

Adam::Adam(const AdamConfig& cfg, const ParamSet& ps) : cfg_(cfg) {
  cfg_.validate();
  for (int i = 0; i < ps.size(); ++i) {
    const Matrix& v = ps.at(i).value;
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Adam::step(ParamSet& ps, const std::vector<Matrix>& grads) {
  if (static_cast<int>(grads.size()) != ps.size() ||
      ps.size() != static_cast<int>(m_.size()))
    throw ContractError("Adam: gradient list does not match the parameter set");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (int i = 0; i < ps.size(); ++i) {
    Param& p = ps.at(i);
    const Matrix& g = grads[static_cast<std::size_t>(i)];
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols())
      throw ShapeError("Adam: gradient shape mismatch for '" + p.name + "'");
    if (!g.allFinite())
      throw NumericError("Adam: nonfinite gradient for '" + p.name + "'");
    const double lr = p.lr_override >= 0.0 ? p.lr_override : cfg_.lr;
    if (p.decay && cfg_.weight_decay > 0.0) p.value *= 1.0 - lr * cfg_.weight_decay;
    Matrix& m = m_[static_cast<std::size_t>(i)];
    Matrix& v = v_[static_cast<std::size_t>(i)];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    p.value.noalias() -=
        lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
  }
}

void Adam::restore(int t, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (t < 0 || m.size() != m_.size() || v.size() != v_.size())
    throw ContractError("Adam: restored state does not match the parameter set");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

int PretrainedModel::dataset_index(const std::string& name) const {
  for (std::size_t i = 0; i < datasets.size(); ++i)
    if (datasets[i].name == name) return static_cast<int>(i);
  return -1;
}

GraphDataset expand_with_views(const GraphDataset& ds, int views, double ratio,
                               std::uint64_t seed) {
  if (views < 1) throw ParameterError("expand_with_views: views must be >= 1");
  static constexpr AugmentKind kCycle[3] = {AugmentKind::NodeDrop,
                                            AugmentKind::EdgePerturb,
                                            AugmentKind::Subgraph};
  GraphDataset out;
  out.name = ds.name;
  out.has_attributes = ds.has_attributes;
  out.attribute_dim = ds.attribute_dim;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    out.graphs.push_back(ds.graphs[g]);
    for (int v = 0; v < views; ++v) {
      Augmentation a;
      a.kind = kCycle[static_cast<std::size_t>(v % 3)];
      a.ratio = ratio;
      a.seed = mix64(seed ^ mix64(static_cast<std::uint64_t>(g) *
                                      static_cast<std::uint64_t>(views) +
                                  static_cast<std::uint64_t>(v) + 1));
      out.graphs.push_back(augment(ds.graphs[g], a));
    }
  }
  return out;
}

std::vector<std::vector<Matrix>> rotated_graph_features(
    const MultiScaleEmbedding& emb, const std::vector<Matrix>& rotations) {
  if (static_cast<int>(rotations.size()) != emb.config.num_scales())
    throw ParameterError("rotated_graph_features: one rotation per scale required");
  std::vector<std::vector<Matrix>> out;
  for (int g = 0; g < emb.num_graphs(); ++g) {
    std::vector<Matrix> per_scale;
    for (int s = 0; s < emb.config.num_scales(); ++s)
      per_scale.push_back(emb.graph_slice(s, g) *
                          rotations[static_cast<std::size_t>(s)].transpose());
    out.push_back(std::move(per_scale));
  }
  return out;
}

namespace {

// Shuffled batch index lists for one dataset epoch.  Supervised batches chunk
// a graph permutation; a trailing singleton is folded into the previous batch
// (the loss needs >= 2 rows).  Unsupervised batches chunk whole view groups
// so every anchor keeps its positives in-batch.
std::vector<std::vector<int>> make_batches(int count, bool grouped, int group_size,
                                           int batch_size, Rng& rng) {
  std::vector<std::vector<int>> batches;
  if (!grouped) {
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    for (int start = 0; start < count; start += batch_size) {
      const int len = std::min(batch_size, count - start);
      batches.emplace_back(order.begin() + start, order.begin() + start + len);
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
      batches[batches.size() - 2].push_back(batches.back()[0]);
      batches.pop_back();
    }
    return batches;
  }

  const int groups = count / group_size;
  std::vector<int> order(static_cast<std::size_t>(groups));
  for (int i = 0; i < groups; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const int per_batch = std::max(1, batch_size / group_size);
  for (int start = 0; start < groups; start += per_batch) {
    const int len = std::min(per_batch, groups - start);
    std::vector<int> batch;
    for (int k = 0; k < len; ++k)
      for (int j = 0; j < group_size; ++j)
        batch.push_back(order[static_cast<std::size_t>(start + k)] * group_size + j);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace

PretrainedModel pretrain(const std::vector<GraphDataset>& datasets,
                         const PipelineConfig& cfg, std::vector<EpochLog>* log) {
  cfg.validate();
  if (datasets.empty()) throw ParameterError("pretrain: at least one dataset required");
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    if (datasets[i].name.empty())
      throw ParameterError("pretrain: datasets must be named");
    for (std::size_t j = i + 1; j < datasets.size(); ++j)
      if (datasets[i].name == datasets[j].name)
        throw ParameterError("pretrain: duplicate dataset name '" + datasets[i].name + "'");
  }
  const bool supervised = cfg.train.mode == TrainMode::Supervised;
  for (const auto& ds : datasets) {
    ds.validate();
    if (supervised && !ds.has_labels())
      throw ContractError("pretrain: supervised mode requires labels on dataset '" +
                          ds.name + "'");
    if (supervised && ds.size() < 2)
      throw ParameterError("pretrain: dataset '" + ds.name +
                           "' is too small for contrastive batches");
  }

  const int M = static_cast<int>(datasets.size());
  const int Q = cfg.scale.num_scales();
  const int group_size = cfg.train.views + 1;

  std::vector<GraphDataset> work;
  for (int di = 0; di < M; ++di)
    work.push_back(supervised
                       ? datasets[static_cast<std::size_t>(di)]
                       : expand_with_views(
                             datasets[static_cast<std::size_t>(di)], cfg.train.views,
                             cfg.train.augment_ratio,
                             mix64(cfg.train.seed ^
                                   mix64(static_cast<std::uint64_t>(di) + 1))));

  std::vector<MultiScaleEmbedding> embs;
  for (const auto& ds : work) embs.push_back(multi_scale_embed(ds, cfg.scale));

  PretrainedModel model;
  model.config = cfg;
  model.datasets.resize(static_cast<std::size_t>(M));
  for (int di = 0; di < M; ++di) {
    model.datasets[static_cast<std::size_t>(di)].name =
        datasets[static_cast<std::size_t>(di)].name;
    model.datasets[static_cast<std::size_t>(di)].means.resize(static_cast<std::size_t>(Q));
    model.datasets[static_cast<std::size_t>(di)].rotations.resize(
        static_cast<std::size_t>(Q));
  }
  for (int s = 0; s < Q; ++s) {
    std::vector<Eigen::VectorXd> means;
    for (int di = 0; di < M; ++di)
      means.push_back(
          embs[static_cast<std::size_t>(di)].z[static_cast<std::size_t>(s)].colwise().mean().transpose());
    const AlignResult aligned = align_rotations(means, cfg.align);
    for (int di = 0; di < M; ++di) {
      model.datasets[static_cast<std::size_t>(di)].means[static_cast<std::size_t>(s)] =
          means[static_cast<std::size_t>(di)];
      model.datasets[static_cast<std::size_t>(di)].rotations[static_cast<std::size_t>(s)] =
          aligned.rotations[static_cast<std::size_t>(di)];
    }
  }

  std::vector<std::vector<std::vector<Matrix>>> features;
  for (int di = 0; di < M; ++di)
    features.push_back(
        rotated_graph_features(embs[static_cast<std::size_t>(di)],
                               model.datasets[static_cast<std::size_t>(di)].rotations));

  Encoder encoder(cfg.encoder);
  ReferenceLayer reference(cfg.reference, cfg.encoder);
  encoder.init_params(model.params, mix64(cfg.train.seed ^ 0x656e63ULL));
  reference.init_params(model.params, mix64(cfg.train.seed ^ 0x726566ULL));
  model.params.by_name("ref.log_gamma").lr_override = cfg.train.lr_gamma;

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.train.lr_main;
  adam_cfg.weight_decay = cfg.train.weight_decay;
  Adam adam(adam_cfg, model.params);

  std::vector<Rng> shuffles;
  for (int di = 0; di < M; ++di)
    shuffles.emplace_back(
        mix64(cfg.train.seed ^ mix64(0x1000ULL + static_cast<std::uint64_t>(di))));

  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    for (int di = 0; di < M; ++di) {
      const GraphDataset& ds = work[static_cast<std::size_t>(di)];
      const auto batches =
          make_batches(ds.size(), !supervised, group_size, cfg.train.batch_size,
                       shuffles[static_cast<std::size_t>(di)]);
      double loss_sum = 0.0;
      for (const auto& batch : batches) {
        ad::Tape tape;
        const std::vector<ad::Var> pvars = model.params.bind(tape);
        std::vector<const Graph*> graphs;
        std::vector<std::vector<Matrix>> feats;
        for (int idx : batch) {
          graphs.push_back(&ds.graphs[static_cast<std::size_t>(idx)]);
          feats.push_back(features[static_cast<std::size_t>(di)][static_cast<std::size_t>(idx)]);
        }
        const NodeBatch nb = make_node_batch(graphs, feats, cfg.encoder);
        const EncoderTaps taps = encoder.forward(tape, nb, pvars);
        const ad::Var vectors = reference.graph_vectors(tape, taps, nb, pvars);

        ad::Var loss;
        if (supervised) {
          std::vector<int> labels;
          for (int idx : batch) labels.push_back(ds.graphs[static_cast<std::size_t>(idx)].label);
          loss = scl_loss(tape, vectors, labels, cfg.train.temperature);
        } else {
          std::vector<std::vector<int>> positives(batch.size());
          for (std::size_t p = 0; p < batch.size(); ++p) {
            const std::size_t start = (p / static_cast<std::size_t>(group_size)) *
                                      static_cast<std::size_t>(group_size);
            for (std::size_t q = start; q < start + static_cast<std::size_t>(group_size); ++q)
              if (q != p) positives[p].push_back(static_cast<int>(q));
          }
          loss = ucl_loss(tape, vectors, positives, cfg.train.temperature);
        }

        loss_sum += tape.value(loss)(0, 0);
        tape.backward(loss);
        std::vector<Matrix> grads;
        for (const ad::Var& pv : pvars) grads.push_back(tape.grad(pv));
        adam.step(model.params, grads);
      }
      if (log)
        log->push_back(EpochLog{epoch, ds.name,
                                loss_sum / static_cast<double>(batches.size())});
    }
  }

  model.adam_steps = adam.steps();
  model.adam_m = adam.moment1();
  model.adam_v = adam.moment2();
  return model;
}

Matrix encode_graph_vectors(const PretrainedModel& model,
                            const std::vector<const Graph*>& graphs,
                            const std::vector<std::vector<Matrix>>& rotated_z) {
  Encoder encoder(model.config.encoder);
  ReferenceLayer reference(model.config.reference, model.config.encoder);
  encoder.locate_params(model.params);
  reference.locate_params(model.params);
  const NodeBatch nb = make_node_batch(graphs, rotated_z, model.config.encoder);
  ad::Tape tape;
  const std::vector<ad::Var> pvars = model.params.bind(tape);
  const EncoderTaps taps = encoder.forward(tape, nb, pvars);
  return tape.value(reference.graph_vectors(tape, taps, nb, pvars));
}

void save_checkpoint(const std::string& path, const PretrainedModel& model) {
  BlockFile file;
  file.format = "graphvec.checkpoint";
  file.meta["config"] = model.config;
  file.meta["adam_steps"] = model.adam_steps;
  file.meta["has_optimizer"] = !model.adam_m.empty();
  nlohmann::json params = nlohmann::json::array();
  for (int i = 0; i < model.params.size(); ++i) {
    const Param& p = model.params.at(i);
    params.push_back({{"name", p.name},
                      {"lr_override", p.lr_override},
                      {"decay", p.decay}});
  }
  file.meta["params"] = std::move(params);
  nlohmann::json names = nlohmann::json::array();
  for (const auto& ds : model.datasets) names.push_back(ds.name);
  file.meta["datasets"] = std::move(names);

  for (int i = 0; i < model.params.size(); ++i)
    file.add_f64("param." + model.params.at(i).name, model.params.at(i).value);
  if (!model.adam_m.empty()) {
    if (model.adam_m.size() != static_cast<std::size_t>(model.params.size()) ||
        model.adam_v.size() != model.adam_m.size())
      throw ContractError("save_checkpoint: optimizer state does not match parameters");
    for (int i = 0; i < model.params.size(); ++i)
      file.add_f64("adam_m." + model.params.at(i).name,
                   model.adam_m[static_cast<std::size_t>(i)]);
    for (int i = 0; i < model.params.size(); ++i)
      file.add_f64("adam_v." + model.params.at(i).name,
                   model.adam_v[static_cast<std::size_t>(i)]);
  }
  for (std::size_t di = 0; di < model.datasets.size(); ++di) {
    const auto& ds = model.datasets[di];
    for (std::size_t s = 0; s < ds.means.size(); ++s) {
      const std::string base = "ds" + std::to_string(di);
      file.add_f64(base + ".mean_s" + std::to_string(s), ds.means[s].transpose());
      file.add_f64(base + ".rot_s" + std::to_string(s), ds.rotations[s]);
    }
  }
  write_block_file(path, file);
}

PretrainedModel load_checkpoint(const std::string& path) {
  const BlockFile file = read_block_file(path);
  if (file.format != "graphvec.checkpoint")
    throw MalformedInputError("checkpoint: unexpected format '" + file.format + "'");
  PretrainedModel model;
  try {
    model.config = file.meta.at("config").get<PipelineConfig>();
    model.adam_steps = file.meta.at("adam_steps").get<int>();
    const bool has_opt = file.meta.at("has_optimizer").get<bool>();

    for (const auto& p : file.meta.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      model.params.add(name, file.require("param." + name).f64,
                       p.at("lr_override").get<double>(), p.at("decay").get<bool>());
    }
    if (has_opt)
      for (int i = 0; i < model.params.size(); ++i) {
        model.adam_m.push_back(file.require("adam_m." + model.params.at(i).name).f64);
        model.adam_v.push_back(file.require("adam_v." + model.params.at(i).name).f64);
      }

    const int Q = model.config.scale.num_scales();
    std::size_t di = 0;
    for (const auto& name : file.meta.at("datasets")) {
      PretrainDatasetState ds;
      ds.name = name.get<std::string>();
      const std::string base = "ds" + std::to_string(di);
      for (int s = 0; s < Q; ++s) {
        ds.means.push_back(
            file.require(base + ".mean_s" + std::to_string(s)).f64.row(0).transpose());
        ds.rotations.push_back(file.require(base + ".rot_s" + std::to_string(s)).f64);
      }
      model.datasets.push_back(std::move(ds));
      ++di;
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInputError("checkpoint: " + std::string(e.what()));
  }
  model.config.validate();
  return model;
}

void append_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IngestError("train log: cannot open '" + path + "' for writing");
  for (const auto& rec : log) {
    const nlohmann::json line = {
        {"epoch", rec.epoch}, {"dataset", rec.dataset}, {"mean_loss", rec.mean_loss}};
    out << line.dump() << "\n";
  }
  if (!out) throw IngestError("train log: write to '" + path + "' failed");
}

}  // namespace graphvec
