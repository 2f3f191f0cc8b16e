#include "graphvec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

std::vector<std::pair<int, int>> Graph::edge_list() const {
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n(); ++u)
    for (int v = u + 1; v < n(); ++v)
      if (adjacency(u, v) != 0.0) edges.emplace_back(u, v);
  return edges;
}

void Graph::validate() const {
  if (n() < 1) throw ParameterError("Graph: node count must be >= 1");
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("Graph: adjacency not square");
  for (int u = 0; u < n(); ++u) {
    if (adjacency(u, u) != 0.0) throw ParameterError("Graph: nonzero diagonal (self-loop)");
    for (int v = u + 1; v < n(); ++v) {
      const double x = adjacency(u, v);
      if (x != adjacency(v, u)) throw ParameterError("Graph: adjacency not symmetric");
      if (x != 0.0 && x != 1.0) throw ParameterError("Graph: adjacency entries must be 0/1");
    }
  }
  if (has_attributes() && attributes.rows() != n())
    throw ShapeError("Graph: attribute row count != node count");
}

int GraphDataset::total_nodes() const {
  int total = 0;
  for (const auto& g : graphs) total += g.n();
  return total;
}

bool GraphDataset::has_labels() const {
  return !graphs.empty() &&
         std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.label >= 0; });
}

int GraphDataset::num_classes() const {
  int max_label = -1;
  for (const auto& g : graphs) max_label = std::max(max_label, g.label);
  return max_label + 1;
}

void GraphDataset::validate() const {
  for (const auto& g : graphs) {
    g.validate();
    if (g.has_attributes() != has_attributes)
      throw ParameterError("GraphDataset '" + name + "': mixed attribute presence");
    if (has_attributes && g.attributes.cols() != attribute_dim)
      throw ShapeError("GraphDataset '" + name + "': inconsistent attribute dimension");
    if (g.label >= num_classes())
      throw ParameterError("GraphDataset '" + name + "': label out of range");
  }
}

namespace {

Graph induced_subgraph(const Graph& g, const std::vector<int>& keep_sorted) {
  const int m = static_cast<int>(keep_sorted.size());
  Graph out;
  out.adjacency = Matrix::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      const double x = g.adjacency(keep_sorted[a], keep_sorted[b]);
      out.adjacency(a, b) = x;
      out.adjacency(b, a) = x;
    }
  if (g.has_attributes()) {
    out.attributes.resize(m, g.attributes.cols());
    for (int a = 0; a < m; ++a) out.attributes.row(a) = g.attributes.row(keep_sorted[a]);
  }
  out.label = g.label;
  return out;
}

Graph augment_node_drop(const Graph& g, double ratio, Rng& rng) {
  const int n = g.n();
  if (n < 2) throw DegenerateInputError("augment: node-drop needs n >= 2");
  const int drop = static_cast<int>(std::floor(ratio * n));
  if (drop >= n) throw DegenerateInputError("augment: node-drop would leave zero nodes");
  std::vector<int> dropped = rng.sample_without_replacement(n, drop);
  std::vector<char> gone(static_cast<std::size_t>(n), 0);
  for (int d : dropped) gone[static_cast<std::size_t>(d)] = 1;
  std::vector<int> keep;
  for (int u = 0; u < n; ++u)
    if (!gone[static_cast<std::size_t>(u)]) keep.push_back(u);
  return induced_subgraph(g, keep);
}

Graph augment_edge_perturb(const Graph& g, double ratio, Rng& rng) {
  const auto edges = g.edge_list();
  const int remove_count = static_cast<int>(std::floor(ratio * static_cast<double>(edges.size())));
  Graph out = g;
  if (remove_count == 0) return out;

  std::vector<int> removed = rng.sample_without_replacement(static_cast<int>(edges.size()), remove_count);
  for (int idx : removed) {
    const auto [u, v] = edges[static_cast<std::size_t>(idx)];
    out.adjacency(u, v) = 0.0;
    out.adjacency(v, u) = 0.0;
  }

  // Candidate additions are non-edges of the original graph, so a removed
  // edge cannot be re-added and an existing edge cannot be duplicated.
  std::vector<std::pair<int, int>> non_edges;
  for (int u = 0; u < g.n(); ++u)
    for (int v = u + 1; v < g.n(); ++v)
      if (g.adjacency(u, v) == 0.0) non_edges.emplace_back(u, v);
  if (static_cast<int>(non_edges.size()) < remove_count)
    throw DegenerateInputError("augment: not enough non-edges to add");
  std::vector<int> added = rng.sample_without_replacement(static_cast<int>(non_edges.size()), remove_count);
  for (int idx : added) {
    const auto [u, v] = non_edges[static_cast<std::size_t>(idx)];
    out.adjacency(u, v) = 1.0;
    out.adjacency(v, u) = 1.0;
  }
  return out;
}

Graph augment_subgraph(const Graph& g, double ratio, Rng& rng) {
  const int n = g.n();
  if (n < 2) throw DegenerateInputError("augment: subgraph needs n >= 2");
  const int target = static_cast<int>(std::ceil((1.0 - ratio) * n));
  if (target <= 0) throw DegenerateInputError("augment: subgraph would leave zero nodes");

  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  int visited_count = 1;
  int current = static_cast<int>(rng.uniform_int(0, n - 1));
  visited[static_cast<std::size_t>(current)] = 1;

  const int step_cap = 8 * n * (target + 1);
  int steps = 0;
  while (visited_count < target && steps < step_cap) {
    ++steps;
    std::vector<int> nbrs;
    for (int v = 0; v < n; ++v)
      if (g.adjacency(current, v) != 0.0) nbrs.push_back(v);
    if (nbrs.empty()) break;  // isolated start; fall through to boundary fill
    current = nbrs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(nbrs.size()) - 1))];
    if (!visited[static_cast<std::size_t>(current)]) {
      visited[static_cast<std::size_t>(current)] = 1;
      ++visited_count;
    }
  }
  // Fill any shortfall with nodes adjacent to the visited set (keeps the
  // sample connected on connected inputs); only a disconnected input can
  // force a uniform jump.
  while (visited_count < target) {
    std::vector<int> boundary, other;
    for (int v = 0; v < n; ++v) {
      if (visited[static_cast<std::size_t>(v)]) continue;
      bool adj = false;
      for (int u = 0; u < n && !adj; ++u)
        adj = visited[static_cast<std::size_t>(u)] && g.adjacency(u, v) != 0.0;
      (adj ? boundary : other).push_back(v);
    }
    const auto& pool = boundary.empty() ? other : boundary;
    const int pick = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    visited[static_cast<std::size_t>(pick)] = 1;
    ++visited_count;
  }

  std::vector<int> keep;
  for (int v = 0; v < n; ++v)
    if (visited[static_cast<std::size_t>(v)]) keep.push_back(v);
  return induced_subgraph(g, keep);
}

}  // namespace

Graph augment(const Graph& g, const Augmentation& a) {
  if (a.ratio < 0.0 || a.ratio >= 1.0) throw ParameterError("augment: ratio must be in [0,1)");
  Rng rng(a.seed);
  switch (a.kind) {
    case AugmentKind::NodeDrop:
      return augment_node_drop(g, a.ratio, rng);
    case AugmentKind::EdgePerturb:
      return augment_edge_perturb(g, a.ratio, rng);
    case AugmentKind::Subgraph:
      return augment_subgraph(g, a.ratio, rng);
  }
  throw ParameterError("augment: unknown kind");
}

namespace {

Graph make_cycle(int n) {
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
  }
  return g;
}

Graph make_star(int n) {
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    g.adjacency(0, i) = 1.0;
    g.adjacency(i, 0) = 1.0;
  }
  return g;
}

Graph make_er(int n, double p, Rng& rng) {
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform01() < p) {
        g.adjacency(u, v) = 1.0;
        g.adjacency(v, u) = 1.0;
      }
  return g;
}

Graph make_ba(int n, int m, Rng& rng) {
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  const int seed_nodes = std::min(n, m + 1);
  for (int u = 0; u < seed_nodes; ++u)
    for (int v = u + 1; v < seed_nodes; ++v) {
      g.adjacency(u, v) = 1.0;
      g.adjacency(v, u) = 1.0;
    }
  // Endpoint pool holds each node once per incident edge: sampling from it is
  // preferential attachment by degree.
  std::vector<int> pool;
  for (int u = 0; u < seed_nodes; ++u)
    for (int v = u + 1; v < seed_nodes; ++v) {
      pool.push_back(u);
      pool.push_back(v);
    }
  for (int u = seed_nodes; u < n; ++u) {
    std::set<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      const int t = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
      targets.insert(t);
    }
    for (int t : targets) {
      g.adjacency(u, t) = 1.0;
      g.adjacency(t, u) = 1.0;
      pool.push_back(u);
      pool.push_back(t);
    }
  }
  return g;
}

const char* kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::Cycle: return "cycle";
    case SynthKind::Star: return "star";
    case SynthKind::Er: return "er";
    case SynthKind::Ba: return "ba";
  }
  return "unknown";
}

}  // namespace

GraphDataset generate_synthetic(SynthKind kind, int count, std::pair<int, int> node_range,
                                std::uint64_t seed, const SynthParams& params) {
  if (count < 1) throw ParameterError("generate_synthetic: count must be >= 1");
  if (node_range.first > node_range.second)
    throw ParameterError("generate_synthetic: node range min > max");
  if (node_range.first < 3) throw ParameterError("generate_synthetic: node range min must be >= 3");
  if (kind == SynthKind::Ba && params.ba_m < 1)
    throw ParameterError("generate_synthetic: ba_m must be >= 1");

  Rng rng(seed);
  GraphDataset ds;
  ds.name = std::string("synthetic-") + kind_name(kind);
  const int label = params.label >= 0 ? params.label : static_cast<int>(kind);
  for (int i = 0; i < count; ++i) {
    const int n = static_cast<int>(rng.uniform_int(node_range.first, node_range.second));
    Graph g;
    switch (kind) {
      case SynthKind::Cycle: g = make_cycle(n); break;
      case SynthKind::Star: g = make_star(n); break;
      case SynthKind::Er: g = make_er(n, params.er_p, rng); break;
      case SynthKind::Ba: g = make_ba(n, params.ba_m, rng); break;
    }
    g.label = label;
    ds.graphs.push_back(std::move(g));
  }
  ds.validate();
  return ds;
}

GraphDataset merge_datasets(const std::vector<GraphDataset>& parts, const std::string& name,
                            bool relabel_by_source) {
  if (parts.empty()) throw ParameterError("merge_datasets: no parts");
  GraphDataset out;
  out.name = name;
  out.has_attributes = parts.front().has_attributes;
  out.attribute_dim = parts.front().attribute_dim;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    if (parts[s].has_attributes != out.has_attributes ||
        parts[s].attribute_dim != out.attribute_dim)
      throw ParameterError("merge_datasets: attribute shape mismatch across parts");
    for (const auto& g : parts[s].graphs) {
      out.graphs.push_back(g);
      if (relabel_by_source) out.graphs.back().label = static_cast<int>(s);
    }
  }
  out.validate();
  return out;
}

}  // namespace graphvec
