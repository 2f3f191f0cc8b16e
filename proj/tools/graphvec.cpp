// Command-line front end for the graph-vectorization pipeline: pre-training,
// whole-dataset embedding, few-shot evaluation, spectral clustering, and
// alignment diagnostics, all driven by one JSON config.
//
// Exit codes: 0 success, 1 numeric failure during computation, 2 invalid
// config / usage.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphvec/align.hpp"
#include "graphvec/blockio.hpp"
#include "graphvec/cluster.hpp"
#include "graphvec/config_json.hpp"
#include "graphvec/embed.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/fewshot.hpp"
#include "graphvec/graph.hpp"
#include "graphvec/results.hpp"
#include "graphvec/threads.hpp"
#include "graphvec/train.hpp"

namespace fs = std::filesystem;
using graphvec::GraphDataset;
using graphvec::Matrix;
using nlohmann::json;

namespace {

struct TaskConfig {
  int shots = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int classifier_epochs = 500;
  double classifier_lr = 0.001;
  int clusters = 0;  // 0 → use the downstream class count
};

struct RunConfig {
  std::vector<json> dataset_specs;
  std::optional<json> downstream_spec;
  graphvec::PipelineConfig pipeline;
  TaskConfig task;
};

json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw graphvec::IngestError(std::string(what) + ": cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw graphvec::MalformedInputError(std::string(what) + " '" + path +
                                        "': " + e.what());
  }
}

RunConfig parse_run_config(const std::string& path) {
  const json j = read_json_file(path, "config");
  RunConfig cfg;
  try {
    if (j.contains("datasets"))
      for (const auto& spec : j.at("datasets")) cfg.dataset_specs.push_back(spec);
    if (j.contains("downstream")) cfg.downstream_spec = j.at("downstream");
    if (j.contains("pipeline")) cfg.pipeline = j.at("pipeline").get<graphvec::PipelineConfig>();
    if (j.contains("task")) {
      const json& t = j.at("task");
      cfg.task.shots = t.value("shots", cfg.task.shots);
      cfg.task.classifier_epochs = t.value("classifier_epochs", cfg.task.classifier_epochs);
      cfg.task.classifier_lr = t.value("classifier_lr", cfg.task.classifier_lr);
      cfg.task.clusters = t.value("clusters", cfg.task.clusters);
      if (t.contains("seeds"))
        cfg.task.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
    }
  } catch (const json::exception& e) {
    throw graphvec::MalformedInputError("config '" + path + "': " + e.what());
  }
  if (cfg.task.seeds.empty())
    throw graphvec::ParameterError("config: task.seeds must not be empty");
  return cfg;
}

graphvec::SynthKind parse_kind(const std::string& kind) {
  if (kind == "cycle") return graphvec::SynthKind::Cycle;
  if (kind == "star") return graphvec::SynthKind::Star;
  if (kind == "er") return graphvec::SynthKind::Er;
  if (kind == "ba") return graphvec::SynthKind::Ba;
  throw graphvec::ParameterError("dataset: unknown synthetic kind '" + kind + "'");
}

// A dataset spec is an object with a "name" and exactly one source:
//   "path": TUDataset directory (file prefix = name, override with "prefix")
//   "file": binary dataset dump
//   "synthetic": {kind, count, min_nodes, max_nodes, seed, er_p, ba_m, label}
//   "merge": [sub-specs...] with optional "relabel_by_source" (default true)
GraphDataset load_dataset_spec(const json& spec) {
  if (!spec.is_object() || !spec.contains("name"))
    throw graphvec::ParameterError("dataset spec: 'name' is required");
  const std::string name = spec.at("name").get<std::string>();
  const int sources = spec.contains("path") + spec.contains("file") +
                      spec.contains("synthetic") + spec.contains("merge");
  if (sources != 1)
    throw graphvec::ParameterError("dataset '" + name +
                                   "': exactly one of path/file/synthetic/merge required");

  if (spec.contains("path")) {
    const std::string dir = spec.at("path").get<std::string>();
    if (!fs::is_directory(dir))
      throw graphvec::IngestError("dataset '" + name + "': directory '" + dir +
                                  "' does not exist");
    GraphDataset ds = graphvec::parse_tudataset(dir, spec.value("prefix", name));
    ds.name = name;
    return ds;
  }
  if (spec.contains("file")) {
    const std::string file = spec.at("file").get<std::string>();
    if (!fs::is_regular_file(file))
      throw graphvec::IngestError("dataset '" + name + "': file '" + file +
                                  "' does not exist");
    GraphDataset ds = graphvec::load_dataset(file);
    ds.name = name;
    return ds;
  }
  if (spec.contains("merge")) {
    std::vector<GraphDataset> parts;
    for (const auto& sub : spec.at("merge")) parts.push_back(load_dataset_spec(sub));
    return graphvec::merge_datasets(parts, name, spec.value("relabel_by_source", true));
  }

  const json& s = spec.at("synthetic");
  graphvec::SynthParams params;
  params.er_p = s.value("er_p", params.er_p);
  params.ba_m = s.value("ba_m", params.ba_m);
  params.label = s.value("label", params.label);
  GraphDataset ds = graphvec::generate_synthetic(
      parse_kind(s.value("kind", std::string("er"))), s.value("count", 32),
      {s.value("min_nodes", 8), s.value("max_nodes", 16)}, s.value("seed", 0ULL), params);
  ds.name = name;
  return ds;
}

GraphDataset require_downstream(const RunConfig& cfg) {
  if (!cfg.downstream_spec)
    throw graphvec::ParameterError("config: this command needs a 'downstream' dataset");
  return load_dataset_spec(*cfg.downstream_spec);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::create_directories(out);
  return fs::path(out);
}

// Truncating open so reruns with identical config + seed are byte-identical.
void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw graphvec::IngestError("cannot open '" + path.string() + "' for writing");
  out << content;
}

std::vector<std::uint64_t> effective_seeds(const TaskConfig& task,
                                           const std::optional<std::uint64_t>& seed_flag) {
  if (seed_flag) return {*seed_flag};
  return task.seeds;
}

int cmd_pretrain(const std::string& config_path, const std::string& out,
                 const std::optional<std::uint64_t>& seed,
                 const std::optional<std::string>& mode) {
  RunConfig cfg = parse_run_config(config_path);
  if (cfg.dataset_specs.empty())
    throw graphvec::ParameterError("config: pretrain needs a non-empty 'datasets' list");
  std::vector<GraphDataset> datasets;
  for (const auto& spec : cfg.dataset_specs) datasets.push_back(load_dataset_spec(spec));
  if (seed) cfg.pipeline.train.seed = *seed;
  if (mode) {
    if (*mode == "supervised")
      cfg.pipeline.train.mode = graphvec::TrainMode::Supervised;
    else if (*mode == "unsupervised")
      cfg.pipeline.train.mode = graphvec::TrainMode::Unsupervised;
    else
      throw graphvec::ParameterError("--mode must be 'supervised' or 'unsupervised'");
  }
  cfg.pipeline.validate();

  std::vector<graphvec::EpochLog> log;
  const graphvec::PretrainedModel model = graphvec::pretrain(datasets, cfg.pipeline, &log);

  const fs::path dir = prepare_out_dir(out);
  graphvec::save_checkpoint((dir / "checkpoint.bin").string(), model);
  const fs::path log_path = dir / "train_log.jsonl";
  fs::remove(log_path);
  graphvec::append_train_log(log_path.string(), log);
  std::printf("pretrained on %zu dataset(s), %d epoch(s); checkpoint: %s\n",
              datasets.size(), cfg.pipeline.train.epochs,
              (dir / "checkpoint.bin").string().c_str());
  return 0;
}

int cmd_embed(const std::string& config_path, const std::string& checkpoint,
              const std::string& out) {
  const RunConfig cfg = parse_run_config(config_path);
  const GraphDataset ds = require_downstream(cfg);
  const graphvec::PretrainedModel model = graphvec::load_checkpoint(checkpoint);
  const Matrix vectors = graphvec::embed_dataset_vectors(ds, model);

  graphvec::BlockFile file;
  file.format = "graphvec.vectors";
  file.meta["dataset"] = ds.name;
  file.meta["count"] = static_cast<int>(vectors.rows());
  file.meta["width"] = static_cast<int>(vectors.cols());
  file.meta["labeled"] = ds.has_labels();
  file.add_f64("vectors", vectors);
  if (ds.has_labels()) {
    Matrix labels(ds.size(), 1);
    for (int i = 0; i < ds.size(); ++i)
      labels(i, 0) = ds.graphs[static_cast<std::size_t>(i)].label;
    file.add_f64("labels", labels);
  }
  const fs::path dir = prepare_out_dir(out);
  graphvec::write_block_file((dir / "vectors.bin").string(), file);
  std::printf("embedded %d graph(s) at width %d; vectors: %s\n",
              static_cast<int>(vectors.rows()), static_cast<int>(vectors.cols()),
              (dir / "vectors.bin").string().c_str());
  return 0;
}

int cmd_fewshot(const std::string& config_path, const std::string& checkpoint,
                const std::string& out, const std::optional<std::uint64_t>& seed) {
  const RunConfig cfg = parse_run_config(config_path);
  const GraphDataset ds = require_downstream(cfg);
  const graphvec::PretrainedModel model = graphvec::load_checkpoint(checkpoint);

  std::vector<graphvec::ResultRecord> records;
  for (std::uint64_t s : effective_seeds(cfg.task, seed)) {
    graphvec::FewShotTask task;
    task.downstream = ds;
    task.shots = cfg.task.shots;
    task.split_seed = s;
    task.classifier_epochs = cfg.task.classifier_epochs;
    task.classifier_lr = cfg.task.classifier_lr;
    records.push_back({ds.name + "/fewshot", s, "accuracy", fewshot_eval(task, model)});
  }

  const fs::path dir = prepare_out_dir(out);
  const fs::path results = dir / "results.jsonl";
  fs::remove(results);
  graphvec::append_results(results.string(), records);
  std::fputs(graphvec::format_summary_table(records).c_str(), stdout);
  return 0;
}

int cmd_cluster(const std::string& config_path, const std::string& checkpoint,
                const std::string& out, const std::optional<std::uint64_t>& seed) {
  const RunConfig cfg = parse_run_config(config_path);
  const GraphDataset ds = require_downstream(cfg);
  const graphvec::PretrainedModel model = graphvec::load_checkpoint(checkpoint);

  int k = cfg.task.clusters;
  if (k <= 0) {
    if (!ds.has_labels())
      throw graphvec::ParameterError(
          "config: task.clusters must be set for an unlabeled downstream dataset");
    k = ds.num_classes();
  }
  const Matrix vectors = graphvec::embed_dataset_vectors(ds, model);

  std::vector<int> truth;
  if (ds.has_labels())
    for (const auto& g : ds.graphs) truth.push_back(g.label);

  std::vector<graphvec::ResultRecord> records;
  std::string labels_out;
  for (std::uint64_t s : effective_seeds(cfg.task, seed)) {
    const std::vector<int> pred = graphvec::spectral_cluster(vectors, k, s);
    labels_out += json({{"seed", s}, {"labels", pred}}).dump() + "\n";
    if (!truth.empty()) {
      const graphvec::ClusterMetrics m = graphvec::cluster_metrics(pred, truth);
      records.push_back({ds.name + "/cluster", s, "acc", m.acc});
      records.push_back({ds.name + "/cluster", s, "nmi", m.nmi});
      records.push_back({ds.name + "/cluster", s, "ari", m.ari});
    }
  }

  const fs::path dir = prepare_out_dir(out);
  write_text_file(dir / "cluster_labels.jsonl", labels_out);
  if (!records.empty()) {
    const fs::path results = dir / "results.jsonl";
    fs::remove(results);
    graphvec::append_results(results.string(), records);
    std::fputs(graphvec::format_summary_table(records).c_str(), stdout);
  } else {
    std::printf("clustered %d graph(s) into %d cluster(s); labels: %s\n", ds.size(), k,
                (dir / "cluster_labels.jsonl").string().c_str());
  }
  return 0;
}

int cmd_align_diag(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = parse_run_config(config_path);
  if (cfg.dataset_specs.empty())
    throw graphvec::ParameterError("config: align-diag needs a non-empty 'datasets' list");
  std::vector<GraphDataset> datasets;
  for (const auto& spec : cfg.dataset_specs) datasets.push_back(load_dataset_spec(spec));

  std::vector<graphvec::MultiScaleEmbedding> embs;
  for (const auto& ds : datasets) embs.push_back(multi_scale_embed(ds, cfg.pipeline.scale));

  std::string trace_out;
  for (int s = 0; s < cfg.pipeline.scale.num_scales(); ++s) {
    std::vector<Eigen::VectorXd> means;
    for (const auto& emb : embs)
      means.push_back(emb.z[static_cast<std::size_t>(s)].colwise().mean().transpose());
    const graphvec::AlignResult result = align_rotations(means, cfg.pipeline.align);
    for (std::size_t i = 0; i < result.trace.size(); ++i)
      trace_out += json({{"scale", s},
                         {"sweep", static_cast<int>(i)},
                         {"objective", result.trace[i]}})
                       .dump() +
                   "\n";
    std::printf("scale %d: objective %.6f -> %.6f in %d sweep(s)%s\n", s,
                result.trace.front(), result.trace.back(), result.sweeps,
                result.converged ? "" : " (not converged)");
  }
  const fs::path dir = prepare_out_dir(out);
  write_text_file(dir / "align_trace.jsonl", trace_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale graph vectorization pipeline"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;

  auto add_common = [&](CLI::App* cmd, bool needs_checkpoint) {
    cmd->add_option("--config", config_path, "JSON run configuration")
        ->required();
    if (needs_checkpoint)
      cmd->add_option("--checkpoint", checkpoint_path, "pre-trained model file")
          ->required();
    cmd->add_option("--out", out_dir, "output directory (default: current)");
    cmd->add_option("--seed", seed, "override the configured seed(s)");
  };

  CLI::App* pretrain = app.add_subcommand("pretrain", "pre-train on the configured datasets");
  add_common(pretrain, false);
  pretrain->add_option("--mode", mode, "supervised|unsupervised (overrides config)");

  CLI::App* embed = app.add_subcommand("embed", "embed the downstream dataset as vectors");
  add_common(embed, true);

  CLI::App* fewshot = app.add_subcommand("fewshot", "few-shot classification evaluation");
  add_common(fewshot, true);

  CLI::App* cluster = app.add_subcommand("cluster", "spectral clustering evaluation");
  add_common(cluster, true);

  CLI::App* align_diag =
      app.add_subcommand("align-diag", "alignment objective trace per scale");
  add_common(align_diag, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
    return 2;
  }

  (void)graphvec::worker_threads();  // honor GRAPHVEC_THREADS from the start

  try {
    if (pretrain->parsed()) return cmd_pretrain(config_path, out_dir, seed, mode);
    if (embed->parsed()) return cmd_embed(config_path, checkpoint_path, out_dir);
    if (fewshot->parsed()) return cmd_fewshot(config_path, checkpoint_path, out_dir, seed);
    if (cluster->parsed()) return cmd_cluster(config_path, checkpoint_path, out_dir, seed);
    if (align_diag->parsed()) return cmd_align_diag(config_path, out_dir);
  } catch (const graphvec::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 1;
  } catch (const graphvec::IngestError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const graphvec::MalformedInputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const graphvec::ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const graphvec::ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;  // unreachable: require_subcommand guarantees one branch
}
