// Acceptance suite: one pass/fail line per shipped guarantee, with the
// tolerance pinned next to each check.  Exit code is the number of failures.
// Optional argv: criterion numbers to run (default all), e.g. `acceptance 3 7`.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphvec/align.hpp"
#include "graphvec/cluster.hpp"
#include "graphvec/embed.hpp"
#include "graphvec/encoder.hpp"
#include "graphvec/fewshot.hpp"
#include "graphvec/graph.hpp"
#include "graphvec/kernels.hpp"
#include "graphvec/reference.hpp"
#include "graphvec/rng.hpp"
#include "graphvec/tape.hpp"
#include "graphvec/train.hpp"

namespace fs = std::filesystem;
using graphvec::Matrix;
using graphvec::ad::Tape;
using graphvec::ad::Var;
using h_clock = std::chrono::steady_clock;

namespace {

double seconds_since(h_clock::time_point t0) {
  return std::chrono::duration<double>(h_clock::now() - t0).count();
}

Matrix randn(int rows, int cols, std::uint64_t seed) {
  graphvec::Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_adjacency(int n, double p, graphvec::Rng& rng) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < p) a(i, j) = a(j, i) = 1.0;
  return a;
}

graphvec::GraphDataset random_attributed_dataset(const std::string& name, int count,
                                                 int n_lo, int n_hi, int attr_dim,
                                                 std::uint64_t seed) {
  graphvec::Rng rng(seed);
  graphvec::GraphDataset ds;
  ds.name = name;
  ds.has_attributes = true;
  ds.attribute_dim = attr_dim;
  for (int g = 0; g < count; ++g) {
    graphvec::Graph gr;
    const int n = static_cast<int>(rng.uniform_int(n_lo, n_hi));
    gr.adjacency = random_adjacency(n, 0.45, rng);
    gr.attributes.resize(n, attr_dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < attr_dim; ++j) gr.attributes(i, j) = rng.normal();
    gr.label = g % 2;
    ds.graphs.push_back(std::move(gr));
  }
  ds.validate();
  return ds;
}

std::vector<const graphvec::Graph*> graph_ptrs(const graphvec::GraphDataset& ds) {
  std::vector<const graphvec::Graph*> out;
  for (const auto& g : ds.graphs) out.push_back(&g);
  return out;
}

// --- criterion 1: alignment objective is monotone and the iteration stops ---

bool crit_monotone(std::string& detail) {
  const auto t0 = h_clock::now();
  const double slack = 1e-10;
  const double gammas[] = {0.1, 1.0, 10.0};
  const double etas[] = {0.01, 0.1, 1.0};
  graphvec::Rng rng(101);
  double worst_dip = 0.0;
  int not_converged = 0;
  int stalls_by_gamma[3] = {0, 0, 0};
  for (int inst = 0; inst < 100; ++inst) {
    const int m = static_cast<int>(rng.uniform_int(2, 10));
    const int d = static_cast<int>(rng.uniform_int(2, 16));
    std::vector<Eigen::VectorXd> means;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd v(d);
      for (int j = 0; j < d; ++j) v(j) = rng.normal();
      v *= (0.75 + 0.5 * rng.uniform01()) / v.norm();
      means.push_back(v);
    }
    graphvec::AlignConfig cfg;
    cfg.gamma = gammas[inst % 3];
    cfg.eta = etas[(inst / 3) % 3];
    cfg.max_sweeps = 500;
    cfg.tol = 1e-6;
    const auto res = graphvec::align_rotations(means, cfg);
    if (!res.converged) {
      ++not_converged;
      ++stalls_by_gamma[inst % 3];
    }
    for (std::size_t t = 1; t < res.trace.size(); ++t)
      worst_dip = std::max(worst_dip, res.trace[t - 1] - res.trace[t]);
  }
  const double el = seconds_since(t0);
  std::ostringstream os;
  os << "100 instances: worst objective dip " << worst_dip << " (allowed 1e-10); "
     << (100 - not_converged) << "/100 reached delta < 1e-6 within 500 sweeps";
  if (not_converged > 0)
    os << " (stalls by kernel sharpness 0.1/1/10: " << stalls_by_gamma[0] << "/"
       << stalls_by_gamma[1] << "/" << stalls_by_gamma[2]
       << " — sharp-kernel instances keep a mean pair in the slow-attraction band "
          "where per-sweep rotation steps hover just above the tolerance)";
  os << "; " << el << "s < 30s";
  detail = os.str();
  return worst_dip <= slack && not_converged == 0 && el < 30.0;
}

// --- criterion 2: two-set planar alignment vs exhaustive rotation grid ---

bool crit_planar_grid(std::string& detail) {
  graphvec::Rng rng(202);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<Eigen::VectorXd> means;
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd v(2);
      v << rng.normal(), rng.normal();
      v *= (0.75 + 0.5 * rng.uniform01()) / v.norm();
      means.push_back(v);
    }
    graphvec::AlignConfig cfg;
    cfg.gamma = 1.0;
    cfg.eta = 0.1;
    cfg.max_sweeps = 2000;
    cfg.tol = 1e-10;
    const auto res = graphvec::align_rotations(means, cfg);
    const double got = res.trace.back();

    // The objective only depends on the relative O(2) element, so a grid over
    // angle x {rotation, reflection} covers the whole orbit.
    double best = -1.0;
    std::vector<Matrix> rots(2, Matrix::Identity(2, 2));
    for (int branch = 0; branch < 2; ++branch) {
      for (int k = 0; k < 6284; ++k) {
        const double th = 1e-3 * k;
        const double c = std::cos(th), s = std::sin(th);
        Matrix r(2, 2);
        if (branch == 0)
          r << c, -s, s, c;
        else
          r << c, s, s, -c;
        rots[1] = r;
        best = std::max(best, graphvec::alignment_density(means, rots, cfg.gamma));
      }
    }
    worst = std::max(worst, std::abs(got - best));
  }
  std::ostringstream os;
  os << "20 planar instances, max |solver - grid| " << worst << " (allowed 1e-3)";
  detail = os.str();
  return worst <= 1e-3;
}

// --- criterion 3: svd embedding vs best low-rank gram + kernel invariance ---

bool crit_embed_fidelity(std::string& detail) {
  graphvec::Rng rng(303);
  const double lambdas[] = {0.5, 1.0, 2.0};
  double worst_rel = 0.0, worst_inv = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = static_cast<int>(rng.uniform_int(8, 200));
    const int d = static_cast<int>(rng.uniform_int(2, 8));
    const int dbar = std::min<int>(static_cast<int>(rng.uniform_int(2, 16)), n - 2);
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    const double lambda = lambdas[inst % 3];
    const double mu = graphvec::mean_pairwise_distance(x);
    const Matrix k = graphvec::gaussian_gram(x, lambda, mu);

    const auto emb = graphvec::truncated_svd_embed(k, dbar);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    const Matrix v = es.eigenvectors().rightCols(dbar);
    const Eigen::VectorXd lam = es.eigenvalues().tail(dbar);
    const Matrix k_d = v * lam.asDiagonal() * v.transpose();
    worst_rel = std::max(
        worst_rel, (emb.z * emb.z.transpose() - k_d).norm() / k_d.norm());

    // Similarity transform of the inputs: rotate, scale, translate.
    Matrix q = Eigen::HouseholderQR<Matrix>(randn(d, d, 9000 + inst))
                   .householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    const double c = 0.3 + 2.0 * rng.uniform01();
    const Eigen::RowVectorXd t = randn(1, d, 9500 + inst);
    Matrix x2 = (x * q) * c;
    x2.rowwise() += t;
    const double mu2 = graphvec::mean_pairwise_distance(x2);
    const Matrix k2 = graphvec::gaussian_gram(x2, lambda, mu2);
    worst_inv = std::max(worst_inv, (k2 - k).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "50 datasets, max rank-d gram error " << worst_rel
     << " (allowed 1e-6), max kernel drift under similarity " << worst_inv
     << " (allowed 1e-10)";
  detail = os.str();
  return worst_rel <= 1e-6 && worst_inv <= 1e-10;
}

// --- criterion 4: landmark path exact at full size, better with more ---

bool crit_nystrom(std::string& detail) {
  double worst_full = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const Matrix x = randn(60, 5, 404 + inst);
    const double mu = graphvec::mean_pairwise_distance(x);
    const auto exact = graphvec::truncated_svd_embed(
        graphvec::gaussian_gram(x, 1.0, mu), 8);
    const auto ny = graphvec::nystrom_embed(x, 1.0, mu, 8, 60, 404 + inst);
    worst_full = std::max(
        worst_full, (ny.z * ny.z.transpose() - exact.z * exact.z.transpose())
                        .cwiseAbs()
                        .maxCoeff());
  }

  double err8 = 0.0, err64 = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const Matrix x = randn(128, 6, 440 + seed);
    const double mu = graphvec::mean_pairwise_distance(x);
    const Matrix k = graphvec::gaussian_gram(x, 1.0, mu);
    const auto n8 = graphvec::nystrom_embed(x, 1.0, mu, 8, 8, seed);
    const auto n64 = graphvec::nystrom_embed(x, 1.0, mu, 8, 64, seed);
    err8 += (n8.z * n8.z.transpose() - k).norm() / k.norm() / 20.0;
    err64 += (n64.z * n64.z.transpose() - k).norm() / k.norm() / 20.0;
  }
  std::ostringstream os;
  os << "full-landmark gram error " << worst_full
     << " (allowed 1e-6); mean error 8 landmarks " << err8 << " vs 64 landmarks "
     << err64 << " (must strictly improve, 20 seeds)";
  detail = os.str();
  return worst_full <= 1e-6 && err64 < err8;
}

// --- criterion 5: test-time cross-kernel map on the training rows ---

bool crit_cross_kernel(std::string& detail) {
  const auto ds = random_attributed_dataset("cross_id", 10, 5, 12, 4, 505);
  graphvec::ScaleConfig sc;
  sc.lambdas = {0.5, 1.0, 2.0};
  sc.embed_dim = 8;
  const auto emb = graphvec::multi_scale_embed(ds, sc);
  double worst = 0.0;
  for (int q = 0; q < sc.num_scales(); ++q) {
    const Matrix again = graphvec::cross_embed_test(emb.x, emb, q);
    worst = std::max(worst, (again - emb.z[q]).cwiseAbs().maxCoeff());
  }
  std::ostringstream os;
  os << "3 scales, max row deviation " << worst << " (allowed 1e-8)";
  detail = os.str();
  return worst <= 1e-8;
}

// --- criterion 6: autodiff vs central differences on 3-graph fixtures ---

graphvec::EncoderConfig small_encoder() {
  graphvec::EncoderConfig cfg;
  cfg.scales = 2;
  cfg.embed_dim = 6;
  cfg.gin_layers = 2;
  cfg.gin_hidden = 8;
  cfg.gt_blocks = 1;
  cfg.heads = 2;
  cfg.head_dim = 4;
  cfg.ffn_hidden = 8;
  return cfg;
}

bool crit_gradients(std::string& detail) {
  const auto t0 = h_clock::now();
  const auto cfg = small_encoder();
  graphvec::ReferenceConfig rc;
  rc.num_refs = 3;
  rc.ref_rows = 4;

  graphvec::Encoder enc(cfg);
  graphvec::ReferenceLayer layer(rc, cfg);
  graphvec::ParamSet ps;
  enc.init_params(ps, 601);
  layer.init_params(ps, 607);

  graphvec::Rng grng(611);
  std::vector<graphvec::Graph> gs(3);
  std::vector<const graphvec::Graph*> gptr;
  std::vector<std::vector<Matrix>> zs;
  for (int gi = 0; gi < 3; ++gi) {
    const int n = 3 + gi % 2;
    gs[gi].adjacency = random_adjacency(n, 0.6, grng);
    gptr.push_back(&gs[gi]);
    std::vector<Matrix> per_scale;
    for (int q = 0; q < cfg.scales; ++q)
      per_scale.push_back(randn(n, cfg.embed_dim, 620 + 7 * gi + q));
    zs.push_back(per_scale);
  }
  const auto batch = graphvec::make_node_batch(gptr, zs, cfg);

  std::vector<Matrix> leaves;
  for (int i = 0; i < ps.size(); ++i) leaves.push_back(ps.at(i).value);

  // Generic linear functionals of every tapped state; row-symmetric roots are
  // nearly constant in layer-normed outputs and would check nothing.
  std::vector<Matrix> probes;
  for (int l = 0; l < cfg.tap_count(); ++l)
    probes.push_back(randn(batch.total_rows(), cfg.tap_width(l), 700 + l));
  probes.push_back(randn(batch.total_rows(), cfg.final_width(), 790));
  const auto enc_build = [&](Tape& t, const std::vector<Var>& vars) {
    const auto taps = enc.forward(t, batch, vars);
    Var root = t.mean_all(t.mul(taps.final_h, t.input(probes.back())));
    for (std::size_t l = 0; l < taps.layers.size(); ++l)
      root = t.add(root, t.mean_all(t.mul(taps.layers[l], t.input(probes[l]))));
    return root;
  };
  const auto r_enc = graphvec::ad::grad_check(enc_build, leaves, 641, 16);

  const auto ref_build = [&](Tape& t, const std::vector<Var>& vars) {
    const auto taps = enc.forward(t, batch, vars);
    return t.mean_all(layer.graph_vectors(t, taps, batch, vars));
  };
  const auto r_ref = graphvec::ad::grad_check(ref_build, leaves, 643, 16);

  const std::vector<int> labels = {0, 1, 0};
  const auto scl_build = [&](Tape& t, const std::vector<Var>& vars) {
    const auto taps = enc.forward(t, batch, vars);
    return graphvec::scl_loss(t, layer.graph_vectors(t, taps, batch, vars), labels,
                              0.5);
  };
  const auto r_scl = graphvec::ad::grad_check(scl_build, leaves, 647, 16);

  const std::vector<std::vector<int>> positives = {{1, 2}, {0}, {0}};
  const auto ucl_build = [&](Tape& t, const std::vector<Var>& vars) {
    const auto taps = enc.forward(t, batch, vars);
    return graphvec::ucl_loss(t, layer.graph_vectors(t, taps, batch, vars),
                              positives, 0.7);
  };
  const auto r_ucl = graphvec::ad::grad_check(ucl_build, leaves, 653, 16);

  const double el = seconds_since(t0);
  const double worst = std::max({r_enc.max_rel_err, r_ref.max_rel_err,
                                 r_scl.max_rel_err, r_ucl.max_rel_err});
  const bool gamma_present = r_ref.checked > 0;  // 1x1 kernel-width leaf always probed
  std::ostringstream os;
  os << "max rel err: encoder " << r_enc.max_rel_err << ", readout " << r_ref.max_rel_err
     << ", scl " << r_scl.max_rel_err << ", ucl " << r_ucl.max_rel_err
     << " (allowed 1e-4); " << el << "s < 60s";
  detail = os.str();
  return worst < 1e-4 && gamma_present && el < 60.0;
}

// --- criterion 7: mmd axioms + singleton closed form ---

bool crit_mmd(std::string& detail) {
  graphvec::Rng rng(707);
  double worst_sym = 0.0, worst_self = 0.0, worst_closed = 0.0;
  bool nonneg = true;
  for (int inst = 0; inst < 1000; ++inst) {
    const int d = static_cast<int>(rng.uniform_int(1, 5));
    const int nh = static_cast<int>(rng.uniform_int(1, 6));
    const int nv = static_cast<int>(rng.uniform_int(1, 6));
    const double gamma = std::exp(rng.uniform(-1.5, 1.5));
    Matrix h(nh, d), v(nv, d);
    for (int i = 0; i < nh; ++i)
      for (int j = 0; j < d; ++j) h(i, j) = rng.normal();
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < d; ++j) v(i, j) = rng.normal();
    const double m1 = graphvec::mmd_distance(h, v, gamma);
    const double m2 = graphvec::mmd_distance(v, h, gamma);
    if (m1 < 0.0) nonneg = false;
    worst_sym = std::max(worst_sym, std::abs(m1 - m2));
    worst_self = std::max(worst_self, graphvec::mmd_distance(h, h, gamma));
    if (nh == 1 && nv == 1) {
      const double d2 = (h.row(0) - v.row(0)).squaredNorm();
      const double closed = std::sqrt(2.0 - 2.0 * std::exp(-gamma * d2));
      worst_closed = std::max(worst_closed, std::abs(m1 - closed));
    }
  }
  std::ostringstream os;
  os << "1000 pairs: nonneg " << (nonneg ? "ok" : "VIOLATED") << ", symmetry gap "
     << worst_sym << ", self-distance " << worst_self << ", singleton closed-form gap "
     << worst_closed << " (all allowed 1e-12)";
  detail = os.str();
  return nonneg && worst_sym <= 1e-12 && worst_self <= 1e-12 && worst_closed <= 1e-12;
}

// --- criterion 8: graph vectors under node relabeling ---

bool crit_permutation(std::string& detail) {
  const auto cfg = small_encoder();
  graphvec::ReferenceConfig rc;
  rc.num_refs = 3;
  rc.ref_rows = 4;
  graphvec::Encoder enc(cfg);
  graphvec::ReferenceLayer layer(rc, cfg);
  graphvec::ParamSet ps;
  enc.init_params(ps, 801);
  layer.init_params(ps, 807);

  graphvec::Rng rng(811);
  std::vector<graphvec::Graph> base(50), perm(50);
  std::vector<std::vector<Matrix>> z_base(50), z_perm(50);
  std::vector<const graphvec::Graph*> p_base, p_perm;
  for (int g = 0; g < 50; ++g) {
    const int n = static_cast<int>(rng.uniform_int(3, 10));
    base[g].adjacency = random_adjacency(n, 0.5, rng);
    for (int q = 0; q < cfg.scales; ++q)
      z_base[g].push_back(randn(n, cfg.embed_dim, 820 + 13 * g + q));

    std::vector<int> to(n);
    for (int i = 0; i < n; ++i) to[i] = i;
    rng.shuffle(to);  // node i moves to position to[i]
    perm[g].adjacency = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        perm[g].adjacency(to[i], to[j]) = base[g].adjacency(i, j);
    for (int q = 0; q < cfg.scales; ++q) {
      Matrix zp(n, cfg.embed_dim);
      for (int i = 0; i < n; ++i) zp.row(to[i]) = z_base[g][q].row(i);
      z_perm[g].push_back(zp);
    }
    p_base.push_back(&base[g]);
    p_perm.push_back(&perm[g]);
  }
  const auto b1 = graphvec::make_node_batch(p_base, z_base, cfg);
  const auto b2 = graphvec::make_node_batch(p_perm, z_perm, cfg);

  Tape t1, t2;
  const Matrix v1 =
      t1.value(layer.graph_vectors(t1, enc.forward(t1, b1, ps.bind(t1)), b1, ps.bind(t1)));
  const Matrix v2 =
      t2.value(layer.graph_vectors(t2, enc.forward(t2, b2, ps.bind(t2)), b2, ps.bind(t2)));
  const double worst = (v1 - v2).cwiseAbs().maxCoeff();
  std::ostringstream os;
  os << "50 graphs, max vector drift under relabeling " << worst << " (allowed 1e-10)";
  detail = os.str();
  return worst <= 1e-10;
}

// --- criteria 9 and 11: desk-scale transfer (shared fixtures) ---

graphvec::GraphDataset er_density_domain() {
  graphvec::SynthParams sparse, dense;
  sparse.er_p = 0.15;
  dense.er_p = 0.5;
  return graphvec::merge_datasets(
      {graphvec::generate_synthetic(graphvec::SynthKind::Er, 16, {8, 16}, 901, sparse),
       graphvec::generate_synthetic(graphvec::SynthKind::Er, 16, {8, 16}, 902, dense)},
      "er_density", true);
}

graphvec::GraphDataset ba_vs_er_domain() {
  graphvec::SynthParams ba, er;
  ba.ba_m = 2;
  er.er_p = 0.3;
  return graphvec::merge_datasets(
      {graphvec::generate_synthetic(graphvec::SynthKind::Ba, 16, {8, 16}, 903, ba),
       graphvec::generate_synthetic(graphvec::SynthKind::Er, 16, {8, 16}, 904, er)},
      "ba_vs_er", true);
}

graphvec::GraphDataset cycles_vs_stars() {
  return graphvec::merge_datasets(
      {graphvec::generate_synthetic(graphvec::SynthKind::Cycle, 50, {8, 16}, 905),
       graphvec::generate_synthetic(graphvec::SynthKind::Star, 50, {8, 16}, 906)},
      "cycles_vs_stars", true);
}

double mean_fewshot_accuracy(const graphvec::PretrainedModel& model,
                             const graphvec::GraphDataset& downstream) {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    graphvec::FewShotTask task;
    task.downstream = downstream;
    task.shots = 10;
    task.split_seed = seed;
    sum += graphvec::fewshot_eval(task, model);
  }
  return sum / 5.0;
}

struct TransferResults {
  double two_domain = 0.0;  // mean 10-shot accuracy, 5 split seeds
  double one_domain = 0.0;
  double elapsed = 0.0;
};

const TransferResults& supervised_transfer() {
  static std::optional<TransferResults> cache;
  if (!cache) {
    const auto t0 = h_clock::now();
    graphvec::PipelineConfig cfg;  // stock settings
    cfg.train.mode = graphvec::TrainMode::Supervised;
    const auto down = cycles_vs_stars();
    const auto model2 = graphvec::pretrain({er_density_domain(), ba_vs_er_domain()}, cfg);
    const auto model1 = graphvec::pretrain({er_density_domain()}, cfg);
    TransferResults r;
    r.two_domain = mean_fewshot_accuracy(model2, down);
    r.one_domain = mean_fewshot_accuracy(model1, down);
    r.elapsed = seconds_since(t0);
    cache = r;
  }
  return *cache;
}

bool crit_transfer(std::string& detail) {
  const auto& r = supervised_transfer();
  std::ostringstream os;
  os << "10-shot mean over 5 seeds: two domains " << r.two_domain
     << " (must exceed 0.80), one domain " << r.one_domain
     << " (two must be >= one); " << r.elapsed << "s < 600s";
  detail = os.str();
  return r.two_domain > 0.80 && r.two_domain >= r.one_domain && r.elapsed < 600.0;
}

// --- criterion 10: clustering harness on known ground truth ---

bool crit_clustering(std::string& detail) {
  // Two well-separated blobs: exact recovery expected.
  graphvec::Rng rng(1001);
  Matrix pts(40, 6);
  std::vector<int> truth(40);
  for (int i = 0; i < 40; ++i) {
    const int blob = i < 20 ? 0 : 1;
    truth[i] = blob;
    for (int j = 0; j < 6; ++j)
      pts(i, j) = (j == blob ? 10.0 : 0.0) + 0.3 * rng.normal();
  }
  const auto labels = graphvec::spectral_cluster(pts, 2, 7);
  const double blob_ari = graphvec::cluster_metrics(labels, truth).ari;

  // Permuted-perfect labels: accuracy must ignore cluster naming.
  std::vector<int> pred(40);
  for (int i = 0; i < 40; ++i) pred[i] = 1 - truth[i];
  const double perm_acc = graphvec::cluster_metrics(pred, truth).acc;

  // Independent random labelings: adjusted index near zero on average.
  double mean_ari = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    graphvec::Rng r2(2000 + seed);
    std::vector<int> a(200), b(200);
    for (int i = 0; i < 200; ++i) {
      a[i] = static_cast<int>(r2.uniform_int(0, 3));
      b[i] = static_cast<int>(r2.uniform_int(0, 3));
    }
    mean_ari += graphvec::cluster_metrics(a, b).ari / 20.0;
  }
  std::ostringstream os;
  os << "blob ari " << blob_ari << " (need 1.0), permuted-label acc " << perm_acc
     << " (need 1.0), random-label mean ari " << mean_ari << " (|.| < 0.05, 20 seeds)";
  detail = os.str();
  return blob_ari == 1.0 && perm_acc == 1.0 && std::abs(mean_ari) < 0.05;
}

// --- criterion 11: view-based pre-training vs supervised ---

bool crit_unsupervised(std::string& detail) {
  const auto& sup = supervised_transfer();
  graphvec::PipelineConfig cfg;
  cfg.train.mode = graphvec::TrainMode::Unsupervised;
  const auto model = graphvec::pretrain({er_density_domain(), ba_vs_er_domain()}, cfg);
  const double ucl = mean_fewshot_accuracy(model, cycles_vs_stars());
  std::ostringstream os;
  os << "view-based 10-shot mean " << ucl << " vs supervised " << sup.two_domain
     << " (gap must be <= 0.10)";
  detail = os.str();
  return sup.two_domain - ucl <= 0.10;
}

// --- criterion 12: determinism of checkpoints and vectors ---

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool crit_determinism(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "graphvec_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  graphvec::PipelineConfig cfg;
  cfg.scale.lambdas = {0.5, 2.0};
  cfg.scale.embed_dim = 6;
  cfg.encoder = small_encoder();
  cfg.reference.num_refs = 3;
  cfg.reference.ref_rows = 4;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.seed = 5;

  const auto corpus = graphvec::merge_datasets(
      {graphvec::generate_synthetic(graphvec::SynthKind::Cycle, 6, {5, 9}, 1201),
       graphvec::generate_synthetic(graphvec::SynthKind::Star, 6, {5, 9}, 1202)},
      "tiny_mix", true);

  const auto m1 = graphvec::pretrain({corpus}, cfg);
  const auto m2 = graphvec::pretrain({corpus}, cfg);
  graphvec::save_checkpoint((dir / "a.bin").string(), m1);
  graphvec::save_checkpoint((dir / "b.bin").string(), m2);
  const bool files_equal = file_bytes(dir / "a.bin") == file_bytes(dir / "b.bin");

  const auto emb = graphvec::multi_scale_embed(corpus, cfg.scale);
  const auto feats =
      graphvec::rotated_graph_features(emb, m1.datasets[0].rotations);
  const Matrix v0 = graphvec::encode_graph_vectors(m1, graph_ptrs(corpus), feats);

  const auto loaded = graphvec::load_checkpoint((dir / "a.bin").string());
  const auto emb2 = graphvec::multi_scale_embed(corpus, loaded.config.scale);
  const auto feats2 =
      graphvec::rotated_graph_features(emb2, loaded.datasets[0].rotations);
  const Matrix v1 = graphvec::encode_graph_vectors(loaded, graph_ptrs(corpus), feats2);
  const bool vectors_equal =
      v0.rows() == v1.rows() && v0.cols() == v1.cols() && (v0.array() == v1.array()).all();

  fs::remove_all(dir);
  std::ostringstream os;
  os << "same-seed checkpoints " << (files_equal ? "byte-identical" : "DIFFER")
     << ", round-trip vectors " << (vectors_equal ? "bit-identical" : "DIFFER");
  detail = os.str();
  return files_equal && vectors_equal;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Crit {
    int id;
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Crit> crits = {
      {1, "alignment objective monotone, converges within 500 sweeps", crit_monotone},
      {2, "planar two-set alignment matches fine-grid search", crit_planar_grid},
      {3, "svd embedding equals best low-rank gram; kernel similarity-invariant",
       crit_embed_fidelity},
      {4, "landmark path exact at full size, error shrinks with more landmarks",
       crit_nystrom},
      {5, "cross-kernel map reproduces training embedding rows", crit_cross_kernel},
      {6, "autodiff matches finite differences (encoder, readout, losses)",
       crit_gradients},
      {7, "mmd non-negative, symmetric, zero on equal sets; singleton closed form",
       crit_mmd},
      {8, "graph vectors invariant to node relabeling", crit_permutation},
      {9, "synthetic transfer: 10-shot accuracy above 0.80, two domains >= one",
       crit_transfer},
      {10, "clustering harness: blobs exact, permuted labels exact, random near zero",
       crit_clustering},
      {11, "view-based pre-training within 10 points of supervised", crit_unsupervised},
      {12, "same-seed checkpoints byte-identical, vectors bit-stable on round trip",
       crit_determinism},
  };

  int failures = 0, ran = 0;
  for (const auto& c : crits) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    std::string detail;
    bool ok = false;
    const auto t0 = h_clock::now();
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double el = seconds_since(t0);
    std::printf("[%s] %02d %s — %s [%.1fs]\n", ok ? "PASS" : "FAIL", c.id, c.name,
                detail.c_str(), el);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures;
}
