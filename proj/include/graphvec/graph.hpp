#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graphvec/kernels.hpp"

namespace graphvec {

// One undirected graph: dense 0/1 adjacency with zero diagonal, optional
// node-attribute rows, optional class label (-1 = unlabeled).
struct Graph {
  Matrix adjacency;   // n×n symmetric, zero diagonal
  Matrix attributes;  // n×d, or 0×0 when absent
  int label = -1;

  int n() const { return static_cast<int>(adjacency.rows()); }
  bool has_attributes() const { return attributes.size() > 0; }

  // Unique undirected edges as (u,v) with u < v, row-major order.
  std::vector<std::pair<int, int>> edge_list() const;
  int num_edges() const { return static_cast<int>(edge_list().size()); }

  // Throws if the adjacency is not symmetric 0/1 with zero diagonal or the
  // attribute row count disagrees with n.
  void validate() const;
};

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  bool has_attributes = false;
  int attribute_dim = 0;

  int size() const { return static_cast<int>(graphs.size()); }
  int total_nodes() const;
  bool has_labels() const;
  int num_classes() const;  // max label + 1, or 0 when unlabeled

  // Checks per-graph invariants plus dataset-wide attribute/label consistency.
  void validate() const;
};

enum class AugmentKind { NodeDrop, EdgePerturb, Subgraph };

struct Augmentation {
  AugmentKind kind = AugmentKind::NodeDrop;
  double ratio = 0.1;  // in [0,1)
  std::uint64_t seed = 0;
};

// Pure function of (g, a): node-drop removes ⌊ratio·n⌋ uniform nodes and
// induces the survivor subgraph; edge-perturb removes ⌊ratio·|E|⌋ edges and
// adds the same number of uniformly chosen non-edges of the original graph;
// subgraph induces on a seeded random-walk-visited node set of size
// ⌈(1−ratio)·n⌉.  Attribute rows follow surviving nodes in original order.
Graph augment(const Graph& g, const Augmentation& a);

enum class SynthKind { Cycle, Star, Er, Ba };

struct SynthParams {
  double er_p = 0.3;  // ER edge probability
  int ba_m = 2;       // BA attachment degree
  int label = -1;     // -1 → label graphs by generator kind index
};

// Deterministic synthetic corpus; graphs carry no attributes (the pipeline
// synthesizes spectral features downstream).
GraphDataset generate_synthetic(SynthKind kind, int count, std::pair<int, int> node_range,
                                std::uint64_t seed, const SynthParams& params = {});

// Concatenates datasets; with relabel_by_source, graph labels become the
// source-dataset index (the usual way to mix generator kinds into classes).
GraphDataset merge_datasets(const std::vector<GraphDataset>& parts, const std::string& name,
                            bool relabel_by_source);

// TUDataset plain-text ingestion: <prefix>_A.txt (1-indexed edge list),
// <prefix>_graph_indicator.txt, <prefix>_graph_labels.txt, optional
// <prefix>_node_attributes.txt / <prefix>_node_labels.txt.  Node labels
// become a one-hot block appended after continuous attributes; graph labels
// are remapped to contiguous [0, C) by sorted value.
GraphDataset parse_tudataset(const std::string& directory, const std::string& prefix);

// Binary dataset dump (JSON header + little-endian float64 attribute block +
// int32 edge block).  load(save(ds)) == ds exactly.
void save_dataset(const std::string& path, const GraphDataset& ds);
GraphDataset load_dataset(const std::string& path);

}  // namespace graphvec
