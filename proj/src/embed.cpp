#include "graphvec/embed.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "graphvec/blockio.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"
#include "graphvec/threads.hpp"

namespace graphvec {

void ScaleConfig::validate() const {
  if (lambdas.empty()) throw ParameterError("ScaleConfig: lambdas must be nonempty");
  for (double l : lambdas)
    if (!(l > 0.0)) throw ParameterError("ScaleConfig: lambdas must be strictly positive");
  if (embed_dim < 1) throw ParameterError("ScaleConfig: embed_dim must be >= 1");
  if (block_size < 0) throw ParameterError("ScaleConfig: block_size must be >= 0");
  if (nystrom_landmarks < 0) throw ParameterError("ScaleConfig: nystrom_landmarks must be >= 0");
}

Matrix MultiScaleEmbedding::graph_slice(int scale, int graph) const {
  if (scale < 0 || scale >= static_cast<int>(z.size()))
    throw ParameterError("graph_slice: scale index out of range");
  if (graph < 0 || graph >= num_graphs())
    throw ParameterError("graph_slice: graph index out of range");
  return z[static_cast<std::size_t>(scale)].middleRows(graph_offsets[static_cast<std::size_t>(graph)],
                                                       graph_sizes[static_cast<std::size_t>(graph)]);
}

namespace {

// Flips each column so its largest-magnitude entry is positive; ties broken
// by lowest row index.  `mirror` (same column count) receives the same flips
// so factor pairs stay consistent.
void fix_column_signs(Matrix& m, Matrix* mirror = nullptr) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double a = std::abs(m(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (m(arg, c) < 0.0) {
      m.col(c) = -m.col(c);
      if (mirror != nullptr) mirror->col(c) = -mirror->col(c);
    }
  }
}

void check_square_symmetric(const Matrix& k, const char* op) {
  if (k.rows() != k.cols()) throw ShapeError(std::string(op) + ": matrix not square");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) throw NumericError(std::string(op) + ": matrix not symmetric");
}

}  // namespace

SvdEmbedding truncated_svd_embed(const Matrix& k, int embed_dim) {
  const Eigen::Index n = k.rows();
  if (embed_dim < 1) throw ParameterError("truncated_svd_embed: embed_dim must be >= 1");
  if (embed_dim > n) throw ParameterError("truncated_svd_embed: embed_dim exceeds matrix size");
  check_square_symmetric(k, "truncated_svd_embed");
  if (!k.allFinite()) throw NumericError("truncated_svd_embed: nonfinite input");

  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  if (es.info() != Eigen::Success)
    throw NumericError("truncated_svd_embed: eigendecomposition failed");
  const Eigen::VectorXd& evals = es.eigenvalues();  // ascending
  const double lam_max = std::max(std::abs(evals(0)), std::abs(evals(n - 1)));
  if (lam_max > 0.0 && evals(0) < -1e-10 * lam_max)
    throw NumericError("truncated_svd_embed: input is not PSD (eigenvalue " +
                       std::to_string(evals(0)) + ")");

  SvdEmbedding out;
  out.v.resize(n, embed_dim);
  out.sigma.resize(embed_dim);
  for (int c = 0; c < embed_dim; ++c) {
    const Eigen::Index src = n - 1 - c;  // descending order
    out.v.col(c) = es.eigenvectors().col(src);
    out.sigma(c) = std::max(evals(src), 0.0);
  }
  fix_column_signs(out.v);
  out.z = out.v * out.sigma.cwiseSqrt().asDiagonal();
  return out;
}

Matrix synthesize_attributes(const Matrix& adjacency, int embed_dim) {
  if (adjacency.rows() != adjacency.cols())
    throw ShapeError("synthesize_attributes: adjacency not square");
  if (embed_dim < 1) throw ParameterError("synthesize_attributes: embed_dim must be >= 1");
  const Eigen::Index n = adjacency.rows();
  Matrix b = adjacency;
  b.diagonal().array() += 1.0;

  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success)
    throw NumericError("synthesize_attributes: eigendecomposition failed");
  // Singular values of a symmetric matrix are |eigenvalues|; order by
  // magnitude, ties keeping the solver's (ascending-eigenvalue) order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(c));
  });

  Matrix out = Matrix::Zero(n, embed_dim);
  const int keep = std::min<int>(embed_dim, static_cast<int>(n));
  for (int c = 0; c < keep; ++c) out.col(c) = es.eigenvectors().col(order[static_cast<std::size_t>(c)]);
  Matrix head = out.leftCols(keep);
  fix_column_signs(head);
  out.leftCols(keep) = head;
  return out;
}

SvdEmbedding nystrom_embed(const Matrix& x, double lambda, double mu, int embed_dim,
                           int landmarks, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  if (landmarks > n) throw ParameterError("nystrom_embed: landmarks exceed row count");
  if (embed_dim > landmarks)
    throw ParameterError("nystrom_embed: embed_dim exceeds landmark count");
  if (embed_dim < 1) throw ParameterError("nystrom_embed: embed_dim must be >= 1");

  Rng rng(seed);
  const std::vector<int> idx = rng.sample_without_replacement(n, landmarks);
  Matrix x_m(landmarks, x.cols());
  for (int i = 0; i < landmarks; ++i) x_m.row(i) = x.row(idx[static_cast<std::size_t>(i)]);

  const Matrix k_nm = gaussian_cross(x, x_m, lambda, mu);
  Matrix k_mm(landmarks, landmarks);
  for (int i = 0; i < landmarks; ++i) k_mm.row(i) = k_nm.row(idx[static_cast<std::size_t>(i)]);

  Eigen::SelfAdjointEigenSolver<Matrix> es(k_mm);
  if (es.info() != Eigen::Success) throw NumericError("nystrom_embed: eigendecomposition failed");
  const Eigen::VectorXd& evals = es.eigenvalues();  // ascending
  const double lam_max = std::max(std::abs(evals(0)), std::abs(evals(landmarks - 1)));

  // Keep eigenvalues ≥ 1e−10·λ_max, largest first.
  std::vector<int> kept;
  for (int i = landmarks - 1; i >= 0; --i)
    if (evals(i) >= 1e-10 * lam_max) kept.push_back(i);
  Matrix w(landmarks, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c)
    w.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(kept[c]) / std::sqrt(evals(kept[c]));

  const Matrix z_raw = k_nm * w;  // n × kept; Z·Zᵀ ≈ K

  // Rotate into the left-singular basis so V/Σ factors describe Z the same
  // way the exact path's do (Z·Zᵀ is unchanged by the right-rotation).
  Eigen::BDCSVD<Matrix> svd(z_raw, Eigen::ComputeThinU);
  SvdEmbedding out;
  out.v = Matrix::Zero(n, embed_dim);
  out.z = Matrix::Zero(n, embed_dim);
  out.sigma = Eigen::VectorXd::Zero(embed_dim);
  const int have = std::min<int>(embed_dim, static_cast<int>(svd.singularValues().size()));
  Matrix u = svd.matrixU().leftCols(have);
  fix_column_signs(u);
  for (int c = 0; c < have; ++c) {
    const double s = svd.singularValues()(c);
    out.v.col(c) = u.col(c);
    out.sigma(c) = s * s;
    out.z.col(c) = u.col(c) * s;
  }
  return out;
}

namespace {

Matrix stacked_attributes(const GraphDataset& ds, int embed_dim, std::vector<int>& offsets,
                          std::vector<int>& sizes) {
  offsets.clear();
  sizes.clear();
  int total = 0;
  for (const auto& g : ds.graphs) {
    offsets.push_back(total);
    sizes.push_back(g.n());
    total += g.n();
  }
  const int dim = ds.has_attributes ? ds.attribute_dim : embed_dim;
  Matrix x(total, dim);
  for (int i = 0; i < ds.size(); ++i) {
    const auto& g = ds.graphs[static_cast<std::size_t>(i)];
    x.middleRows(offsets[static_cast<std::size_t>(i)], g.n()) =
        ds.has_attributes ? g.attributes : synthesize_attributes(g.adjacency, embed_dim);
  }
  return x;
}

}  // namespace

MultiScaleEmbedding multi_scale_embed(const GraphDataset& ds, const ScaleConfig& cfg) {
  cfg.validate();
  if (ds.graphs.empty()) throw ParameterError("multi_scale_embed: dataset is empty");

  MultiScaleEmbedding emb;
  emb.config = cfg;
  emb.dataset_name = ds.name;
  emb.x = stacked_attributes(ds, cfg.embed_dim, emb.graph_offsets, emb.graph_sizes);

  const int q = cfg.num_scales();
  emb.z.assign(static_cast<std::size_t>(q), Matrix());
  for (auto& zq : emb.z) zq = Matrix::Zero(emb.total_rows(), cfg.embed_dim);

  const int graphs_per_block = cfg.block_size > 0 ? cfg.block_size : ds.size();
  int first_graph = 0;
  while (first_graph < ds.size()) {
    const int count = std::min(graphs_per_block, ds.size() - first_graph);
    EmbeddingBlock block;
    block.first_graph = first_graph;
    block.num_graphs = count;
    block.first_row = emb.graph_offsets[static_cast<std::size_t>(first_graph)];
    int rows = 0;
    for (int g = first_graph; g < first_graph + count; ++g)
      rows += emb.graph_sizes[static_cast<std::size_t>(g)];
    block.num_rows = rows;
    block.factors.resize(static_cast<std::size_t>(q));
    emb.blocks.push_back(std::move(block));
    first_graph += count;
  }

  for (std::size_t b = 0; b < emb.blocks.size(); ++b) {
    EmbeddingBlock& block = emb.blocks[b];
    const Matrix xb = emb.x.middleRows(block.first_row, block.num_rows);
    block.mu = mean_pairwise_distance(xb);

    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int s = 0; s < q; ++s) {
      try {
        const double lambda = cfg.lambdas[static_cast<std::size_t>(s)];
        SvdEmbedding se;
        if (cfg.nystrom_landmarks > 0) {
          const int m = std::min(cfg.nystrom_landmarks, block.num_rows);
          const std::uint64_t salt =
              cfg.seed + 0x9e3779b97f4a7c15ULL * (b * static_cast<std::size_t>(q) +
                                                  static_cast<std::size_t>(s) + 1);
          se = nystrom_embed(xb, lambda, block.mu, cfg.embed_dim, m, salt);
        } else {
          se = truncated_svd_embed(gaussian_gram(xb, lambda, block.mu), cfg.embed_dim);
        }
        emb.z[static_cast<std::size_t>(s)].middleRows(block.first_row, block.num_rows) = se.z;
        block.factors[static_cast<std::size_t>(s)] = {se.v, se.sigma};
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  }
  return emb;
}

Matrix cross_embed_test(const Matrix& x_test, const MultiScaleEmbedding& train, int scale) {
  if (scale < 0 || scale >= static_cast<int>(train.z.size()))
    throw ParameterError("cross_embed_test: scale index out of range");
  if (train.blocks.size() != 1)
    throw ParameterError(
        "cross_embed_test: training embedding must be single-block (blocked embeddings have no "
        "global factor matrix)");
  const int d = train.config.embed_dim;
  if (x_test.rows() == 0) return Matrix(0, d);
  if (x_test.cols() != train.x.cols())
    throw ShapeError("cross_embed_test: attribute dimension mismatch");

  const EmbeddingBlock& block = train.blocks.front();
  const ScaleFactors& f = block.factors[static_cast<std::size_t>(scale)];
  const double lambda = train.config.lambdas[static_cast<std::size_t>(scale)];
  const Matrix k_test = gaussian_cross(x_test, train.x, lambda, block.mu);

  // Σ^{−1/2} with machine-level pseudo-inverse floor: exactly-zero (clamped)
  // singular values map to zero columns, matching the training embedding.
  Eigen::VectorXd inv_sqrt(d);
  const double floor = 1e-14 * (f.sigma.size() > 0 ? f.sigma(0) : 0.0);
  for (int c = 0; c < d; ++c)
    inv_sqrt(c) = f.sigma(c) > floor ? 1.0 / std::sqrt(f.sigma(c)) : 0.0;
  return k_test * f.v * inv_sqrt.asDiagonal();
}

void save_embedding(const std::string& path, const MultiScaleEmbedding& emb) {
  BlockFile file;
  file.format = "graphvec.embedding";
  file.meta["dataset"] = emb.dataset_name;
  file.meta["total_rows"] = emb.total_rows();
  file.meta["num_scales"] = emb.config.num_scales();
  file.meta["embed_dim"] = emb.config.embed_dim;
  file.meta["lambdas"] = emb.config.lambdas;
  file.meta["block_size"] = emb.config.block_size;
  file.meta["nystrom_landmarks"] = emb.config.nystrom_landmarks;
  file.meta["seed"] = emb.config.seed;
  file.meta["graph_offsets"] = emb.graph_offsets;
  file.meta["graph_sizes"] = emb.graph_sizes;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : emb.blocks)
    blocks.push_back({{"first_graph", b.first_graph},
                      {"num_graphs", b.num_graphs},
                      {"first_row", b.first_row},
                      {"num_rows", b.num_rows},
                      {"mu", b.mu}});
  file.meta["gram_blocks"] = blocks;

  for (int s = 0; s < emb.config.num_scales(); ++s)
    file.add_f64("z_" + std::to_string(s), emb.z[static_cast<std::size_t>(s)]);
  for (std::size_t b = 0; b < emb.blocks.size(); ++b)
    for (int s = 0; s < emb.config.num_scales(); ++s) {
      const auto& f = emb.blocks[b].factors[static_cast<std::size_t>(s)];
      const std::string suffix = "_b" + std::to_string(b) + "_s" + std::to_string(s);
      file.add_f64("v" + suffix, f.v);
      file.add_f64("sigma" + suffix, f.sigma.transpose());
    }
  file.add_f64("x", emb.x);
  write_block_file(path, file);
}

MultiScaleEmbedding load_embedding(const std::string& path) {
  const BlockFile file = read_block_file(path);
  if (file.format != "graphvec.embedding")
    throw MalformedInputError(path + ": not an embedding dump (format '" + file.format + "')");
  MultiScaleEmbedding emb;
  try {
    emb.dataset_name = file.meta.at("dataset").get<std::string>();
    emb.config.embed_dim = file.meta.at("embed_dim").get<int>();
    emb.config.lambdas = file.meta.at("lambdas").get<std::vector<double>>();
    emb.config.block_size = file.meta.at("block_size").get<int>();
    emb.config.nystrom_landmarks = file.meta.at("nystrom_landmarks").get<int>();
    emb.config.seed = file.meta.at("seed").get<std::uint64_t>();
    emb.graph_offsets = file.meta.at("graph_offsets").get<std::vector<int>>();
    emb.graph_sizes = file.meta.at("graph_sizes").get<std::vector<int>>();
    emb.x = file.require("x").f64;
    const int q = emb.config.num_scales();
    for (int s = 0; s < q; ++s) emb.z.push_back(file.require("z_" + std::to_string(s)).f64);
    std::size_t b = 0;
    for (const auto& jb : file.meta.at("gram_blocks")) {
      EmbeddingBlock block;
      block.first_graph = jb.at("first_graph").get<int>();
      block.num_graphs = jb.at("num_graphs").get<int>();
      block.first_row = jb.at("first_row").get<int>();
      block.num_rows = jb.at("num_rows").get<int>();
      block.mu = jb.at("mu").get<double>();
      for (int s = 0; s < q; ++s) {
        const std::string suffix = "_b" + std::to_string(b) + "_s" + std::to_string(s);
        ScaleFactors f;
        f.v = file.require("v" + suffix).f64;
        f.sigma = file.require("sigma" + suffix).f64.transpose();
        block.factors.push_back(std::move(f));
      }
      emb.blocks.push_back(std::move(block));
      ++b;
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInputError(path + ": malformed embedding metadata: " + e.what());
  }
  return emb;
}

}  // namespace graphvec
