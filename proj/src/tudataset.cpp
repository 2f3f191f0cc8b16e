// TUDataset text ingestion and the binary dataset dump.

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "graphvec/blockio.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/graph.hpp"

namespace graphvec {

namespace {

// Splits a line on commas and whitespace (TUDataset files use both).
std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) throw IngestError("missing required file: " + path);
    return {};
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (!tokens.empty()) rows.push_back(std::move(tokens));
  }
  return rows;
}

long parse_int(const std::string& token, const std::string& path) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw MalformedInputError(path + ": expected integer, got '" + token + "'");
  }
}

double parse_double(const std::string& token, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw MalformedInputError(path + ": expected number, got '" + token + "'");
  }
}

}  // namespace

GraphDataset parse_tudataset(const std::string& directory, const std::string& prefix) {
  const std::string base = directory + "/" + prefix;
  const std::string indicator_path = base + "_graph_indicator.txt";
  const std::string edges_path = base + "_A.txt";
  const std::string labels_path = base + "_graph_labels.txt";

  const auto indicator_rows = read_rows(indicator_path, true);
  const auto edge_rows = read_rows(edges_path, true);
  const auto label_rows = read_rows(labels_path, true);
  const auto attr_rows = read_rows(base + "_node_attributes.txt", false);
  const auto node_label_rows = read_rows(base + "_node_labels.txt", false);

  // Graph membership per node; ids must be exactly 1..G.
  const int total_nodes = static_cast<int>(indicator_rows.size());
  if (total_nodes == 0) throw MalformedInputError(indicator_path + ": empty");
  std::vector<int> graph_of(static_cast<std::size_t>(total_nodes));
  int num_graphs = 0;
  for (int i = 0; i < total_nodes; ++i) {
    const long id = parse_int(indicator_rows[static_cast<std::size_t>(i)][0], indicator_path);
    if (id < 1) throw MalformedInputError(indicator_path + ": indicator ids must start at 1");
    graph_of[static_cast<std::size_t>(i)] = static_cast<int>(id) - 1;
    num_graphs = std::max(num_graphs, static_cast<int>(id));
  }
  std::vector<int> node_count(static_cast<std::size_t>(num_graphs), 0);
  for (int g : graph_of) ++node_count[static_cast<std::size_t>(g)];
  for (int g = 0; g < num_graphs; ++g)
    if (node_count[static_cast<std::size_t>(g)] == 0)
      throw MalformedInputError(indicator_path + ": indicator ids not contiguous (graph " +
                                std::to_string(g + 1) + " has no nodes)");

  // Local node index within its graph, preserving file order.
  std::vector<int> local_index(static_cast<std::size_t>(total_nodes));
  {
    std::vector<int> seen(static_cast<std::size_t>(num_graphs), 0);
    for (int i = 0; i < total_nodes; ++i)
      local_index[static_cast<std::size_t>(i)] = seen[static_cast<std::size_t>(graph_of[static_cast<std::size_t>(i)])]++;
  }

  if (static_cast<int>(label_rows.size()) != num_graphs)
    throw MalformedInputError(labels_path + ": expected " + std::to_string(num_graphs) +
                              " labels, got " + std::to_string(label_rows.size()));
  std::vector<long> raw_labels(static_cast<std::size_t>(num_graphs));
  for (int g = 0; g < num_graphs; ++g)
    raw_labels[static_cast<std::size_t>(g)] = parse_int(label_rows[static_cast<std::size_t>(g)][0], labels_path);
  // Remap arbitrary label values (e.g. {-1, 1}) to contiguous [0, C) by sorted value.
  std::map<long, int> label_map;
  for (long v : raw_labels) label_map.emplace(v, 0);
  {
    int next = 0;
    for (auto& [value, idx] : label_map) idx = next++;
  }

  // Optional continuous attributes: one row per node.
  int attr_dim = 0;
  if (!attr_rows.empty()) {
    if (static_cast<int>(attr_rows.size()) != total_nodes)
      throw MalformedInputError(base + "_node_attributes.txt: expected " +
                                std::to_string(total_nodes) + " rows");
    attr_dim = static_cast<int>(attr_rows[0].size());
    for (const auto& row : attr_rows)
      if (static_cast<int>(row.size()) != attr_dim)
        throw MalformedInputError(base + "_node_attributes.txt: inconsistent column count");
  }

  // Optional node labels become a one-hot block after continuous attributes,
  // columns ordered by sorted label value.
  std::vector<long> raw_node_labels;
  std::map<long, int> node_label_map;
  if (!node_label_rows.empty()) {
    if (static_cast<int>(node_label_rows.size()) != total_nodes)
      throw MalformedInputError(base + "_node_labels.txt: expected " +
                                std::to_string(total_nodes) + " rows");
    raw_node_labels.resize(static_cast<std::size_t>(total_nodes));
    for (int i = 0; i < total_nodes; ++i) {
      raw_node_labels[static_cast<std::size_t>(i)] =
          parse_int(node_label_rows[static_cast<std::size_t>(i)][0], base + "_node_labels.txt");
      node_label_map.emplace(raw_node_labels[static_cast<std::size_t>(i)], 0);
    }
    int next = 0;
    for (auto& [value, idx] : node_label_map) idx = next++;
  }
  const int onehot_dim = static_cast<int>(node_label_map.size());
  const int feature_dim = attr_dim + onehot_dim;

  GraphDataset ds;
  ds.name = prefix;
  ds.has_attributes = feature_dim > 0;
  ds.attribute_dim = feature_dim;
  ds.graphs.resize(static_cast<std::size_t>(num_graphs));
  for (int g = 0; g < num_graphs; ++g) {
    auto& graph = ds.graphs[static_cast<std::size_t>(g)];
    const int n = node_count[static_cast<std::size_t>(g)];
    graph.adjacency = Matrix::Zero(n, n);
    graph.label = label_map.at(raw_labels[static_cast<std::size_t>(g)]);
    if (feature_dim > 0) graph.attributes = Matrix::Zero(n, feature_dim);
  }
  for (int i = 0; i < total_nodes; ++i) {
    const int g = graph_of[static_cast<std::size_t>(i)];
    const int li = local_index[static_cast<std::size_t>(i)];
    auto& graph = ds.graphs[static_cast<std::size_t>(g)];
    if (attr_dim > 0)
      for (int c = 0; c < attr_dim; ++c)
        graph.attributes(li, c) =
            parse_double(attr_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)],
                         base + "_node_attributes.txt");
    if (onehot_dim > 0)
      graph.attributes(li, attr_dim + node_label_map.at(raw_node_labels[static_cast<std::size_t>(i)])) = 1.0;
  }

  // Edges: 1-indexed global node ids; symmetrize, drop duplicates and
  // self-loops ("no self-loops stored").
  for (const auto& row : edge_rows) {
    if (row.size() < 2) throw MalformedInputError(edges_path + ": edge row needs two endpoints");
    const long u = parse_int(row[0], edges_path);
    const long v = parse_int(row[1], edges_path);
    if (u < 1 || u > total_nodes || v < 1 || v > total_nodes)
      throw MalformedInputError(edges_path + ": edge endpoint out of node range: (" +
                                std::to_string(u) + "," + std::to_string(v) + ")");
    if (u == v) continue;
    const int gu = graph_of[static_cast<std::size_t>(u - 1)];
    const int gv = graph_of[static_cast<std::size_t>(v - 1)];
    if (gu != gv)
      throw MalformedInputError(edges_path + ": edge (" + std::to_string(u) + "," +
                                std::to_string(v) + ") crosses graphs");
    auto& graph = ds.graphs[static_cast<std::size_t>(gu)];
    const int lu = local_index[static_cast<std::size_t>(u - 1)];
    const int lv = local_index[static_cast<std::size_t>(v - 1)];
    graph.adjacency(lu, lv) = 1.0;
    graph.adjacency(lv, lu) = 1.0;
  }

  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const GraphDataset& ds) {
  ds.validate();
  BlockFile file;
  file.format = "graphvec.dataset";
  file.meta["name"] = ds.name;
  file.meta["num_graphs"] = ds.size();
  file.meta["has_attributes"] = ds.has_attributes;
  file.meta["attribute_dim"] = ds.attribute_dim;

  std::vector<int> node_counts, edge_counts, labels;
  std::vector<std::int32_t> edges;
  Matrix attributes;
  if (ds.has_attributes) attributes.resize(ds.total_nodes(), ds.attribute_dim);
  int row = 0;
  for (const auto& g : ds.graphs) {
    node_counts.push_back(g.n());
    const auto el = g.edge_list();
    edge_counts.push_back(static_cast<int>(el.size()));
    labels.push_back(g.label);
    for (const auto& [u, v] : el) {
      edges.push_back(u);
      edges.push_back(v);
    }
    if (ds.has_attributes) {
      attributes.middleRows(row, g.n()) = g.attributes;
      row += g.n();
    }
  }
  file.meta["node_counts"] = node_counts;
  file.meta["edge_counts"] = edge_counts;
  file.meta["labels"] = labels;
  std::int64_t total_edges = 0;
  for (int e : edge_counts) total_edges += e;
  file.add_i32("edges", std::move(edges), total_edges, 2);
  if (ds.has_attributes) file.add_f64("attributes", attributes);
  write_block_file(path, file);
}

GraphDataset load_dataset(const std::string& path) {
  const BlockFile file = read_block_file(path);
  if (file.format != "graphvec.dataset")
    throw MalformedInputError(path + ": not a dataset dump (format '" + file.format + "')");
  GraphDataset ds;
  try {
    ds.name = file.meta.at("name").get<std::string>();
    ds.has_attributes = file.meta.at("has_attributes").get<bool>();
    ds.attribute_dim = file.meta.at("attribute_dim").get<int>();
    const auto node_counts = file.meta.at("node_counts").get<std::vector<int>>();
    const auto edge_counts = file.meta.at("edge_counts").get<std::vector<int>>();
    const auto labels = file.meta.at("labels").get<std::vector<int>>();
    if (node_counts.size() != edge_counts.size() || node_counts.size() != labels.size())
      throw MalformedInputError(path + ": inconsistent per-graph metadata lengths");

    const Block& edges = file.require("edges");
    const Matrix* attributes = ds.has_attributes ? &file.require("attributes").f64 : nullptr;

    std::size_t edge_pos = 0;
    int row = 0;
    for (std::size_t g = 0; g < node_counts.size(); ++g) {
      Graph graph;
      const int n = node_counts[g];
      graph.adjacency = Matrix::Zero(n, n);
      for (int e = 0; e < edge_counts[g]; ++e) {
        if (edge_pos + 2 > edges.i32.size())
          throw MalformedInputError(path + ": edge block shorter than edge counts");
        const int u = edges.i32[edge_pos++];
        const int v = edges.i32[edge_pos++];
        if (u < 0 || v < 0 || u >= n || v >= n)
          throw MalformedInputError(path + ": edge endpoint out of range");
        graph.adjacency(u, v) = 1.0;
        graph.adjacency(v, u) = 1.0;
      }
      graph.label = labels[g];
      if (attributes != nullptr) {
        graph.attributes = attributes->middleRows(row, n);
        row += n;
      }
      ds.graphs.push_back(std::move(graph));
    }
    if (edge_pos != edges.i32.size())
      throw MalformedInputError(path + ": edge block longer than edge counts");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInputError(path + ": malformed dataset metadata: " + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace graphvec
