#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "graphvec/encoder.hpp"
#include "graphvec/errors.hpp"
#include "graphvec/params.hpp"
#include "graphvec/rng.hpp"
#include "graphvec/tape.hpp"

using graphvec::Encoder;
using graphvec::EncoderConfig;
using graphvec::EncoderTaps;
using graphvec::Graph;
using graphvec::Matrix;
using graphvec::NodeBatch;
using graphvec::ParamSet;
using graphvec::ad::Tape;
using graphvec::ad::Var;

namespace {

Matrix randn(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  graphvec::Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

Graph random_graph(int n, std::uint64_t seed, double p = 0.4) {
  graphvec::Rng rng(seed);
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < p) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
  return g;
}

// A small configuration every structural test shares; widths are deliberately
// unequal so shape mix-ups cannot cancel out.
EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.scales = 2;
  cfg.embed_dim = 3;
  cfg.gin_layers = 2;
  cfg.gin_hidden = 4;
  cfg.gt_blocks = 1;
  cfg.heads = 2;
  cfg.head_dim = 3;
  cfg.ffn_hidden = 5;
  return cfg;
}

std::vector<std::vector<Matrix>> random_features(const std::vector<const Graph*>& graphs,
                                                 const EncoderConfig& cfg,
                                                 std::uint64_t seed) {
  std::vector<std::vector<Matrix>> z;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    std::vector<Matrix> per_scale;
    for (int q = 0; q < cfg.scales; ++q)
      per_scale.push_back(randn(graphs[g]->n(), cfg.embed_dim, seed + 97 * g + 13 * q));
    z.push_back(per_scale);
  }
  return z;
}

Matrix row_layer_norm(const Matrix& x, double eps) {
  Matrix out = x;
  for (int i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    out.row(i) = (x.row(i).array() - mean) / std::sqrt(var + eps);
  }
  return out;
}

}  // namespace

TEST_CASE("parameter registry basics") {
  ParamSet ps;
  const int a = ps.add("a", Matrix::Ones(2, 2));
  const int b = ps.add("b", Matrix::Zero(1, 3), 0.1, false);
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(ps.index_of("a") == 0);
  CHECK(ps.index_of("missing") == -1);
  CHECK(ps.by_name("b").lr_override == doctest::Approx(0.1));
  CHECK_FALSE(ps.by_name("b").decay);
  CHECK_THROWS_AS(ps.add("a", Matrix::Zero(1, 1)), graphvec::ContractError);
  Matrix bad = Matrix::Ones(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(ps.add("c", bad), graphvec::NumericError);
  CHECK_THROWS_AS(ps.by_name("missing"), graphvec::ContractError);
  CHECK_THROWS_AS(ps.at(5), graphvec::ContractError);

  Tape t;
  const std::vector<Var> vars = ps.bind(t);
  REQUIRE(vars.size() == 2);
  CHECK(t.value(vars[0]) == ps.at(0).value);
  CHECK(t.value(vars[1]) == ps.at(1).value);
}

TEST_CASE("default widths match the documented architecture") {
  EncoderConfig cfg;
  CHECK(cfg.scales == 6);
  CHECK(cfg.gin_hidden == 128);
  CHECK(cfg.gt_blocks == 3);
  CHECK(cfg.d_model() == 192);
  CHECK(cfg.ffn_width() == 192);
  CHECK(cfg.tap_count() == 6);
  for (int l = 0; l < 3; ++l) CHECK(cfg.tap_width(l) == 6 * 128);
  for (int l = 3; l < 6; ++l) CHECK(cfg.tap_width(l) == 192);
  CHECK(cfg.final_width() == 960);
}

TEST_CASE("identity MLP turns the first GIN layer into (A+I)Z") {
  EncoderConfig cfg;
  cfg.scales = 1;
  cfg.embed_dim = 4;
  cfg.gin_layers = 1;
  cfg.gin_hidden = 4;
  cfg.gt_blocks = 0;
  cfg.heads = 1;
  cfg.head_dim = 3;

  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 7);
  ps.by_name("enc.gin.s0.d0.w1").value = Matrix::Identity(4, 4);
  ps.by_name("enc.gin.s0.d0.w2").value = Matrix::Identity(4, 4);
  ps.by_name("enc.gin.s0.d0.b1").value.setZero();
  ps.by_name("enc.gin.s0.d0.b2").value.setZero();

  const Graph g = random_graph(5, 11);
  // Positive features keep the relu inactive so the MLP is exactly identity.
  Matrix z = randn(5, 4, 3).array().abs() + 0.1;
  NodeBatch batch = graphvec::make_node_batch({&g}, {{z}}, cfg);

  Tape t;
  const EncoderTaps taps = enc.forward(t, batch, ps.bind(t));
  const Matrix expect = (g.adjacency + Matrix::Identity(5, 5)) * z;
  CHECK((t.value(taps.layers[0]) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("edgeless graph reduces the first layer to a plain MLP of Z") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 21);

  Graph g;
  g.adjacency = Matrix::Zero(4, 4);
  const auto z = random_features({&g}, cfg, 5);
  NodeBatch batch = graphvec::make_node_batch({&g}, z, cfg);

  Tape t;
  const EncoderTaps taps = enc.forward(t, batch, ps.bind(t));
  Matrix expect(4, cfg.scales * cfg.gin_hidden);
  for (int q = 0; q < cfg.scales; ++q) {
    const Matrix hid =
        ((z[0][q] * ps.by_name("enc.gin.s" + std::to_string(q) + ".d0.w1").value).rowwise() +
         ps.by_name("enc.gin.s" + std::to_string(q) + ".d0.b1").value.row(0))
            .cwiseMax(0.0);
    expect.middleCols(q * cfg.gin_hidden, cfg.gin_hidden) =
        (hid * ps.by_name("enc.gin.s" + std::to_string(q) + ".d0.w2").value).rowwise() +
        ps.by_name("enc.gin.s" + std::to_string(q) + ".d0.b2").value.row(0);
  }
  CHECK((t.value(taps.layers[0]) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero value weights make attention contribute nothing") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 33);
  for (int h = 0; h < cfg.heads; ++h)
    ps.by_name("enc.gt0.h" + std::to_string(h) + ".wv").value.setZero();
  ps.by_name("enc.gt0.attn.w").value = Matrix::Identity(cfg.d_model(), cfg.d_model());
  ps.by_name("enc.gt0.attn.b").value.setZero();
  ps.by_name("enc.gt0.ffn.w1").value.setZero();
  ps.by_name("enc.gt0.ffn.b1").value.setZero();
  ps.by_name("enc.gt0.ffn.w2").value.setZero();
  ps.by_name("enc.gt0.ffn.b2").value.setZero();

  const Graph g = random_graph(5, 17);
  const auto z = random_features({&g}, cfg, 29);
  NodeBatch batch = graphvec::make_node_batch({&g}, z, cfg);

  Tape t;
  const EncoderTaps taps = enc.forward(t, batch, ps.bind(t));
  // Zero values -> attention output 0; zero FFN -> block output LN(LN(state)).
  const Matrix state = t.value(taps.layers[cfg.gin_layers - 1]) *
                           ps.by_name("enc.proj.w").value +
                       Matrix::Ones(5, 1) * ps.by_name("enc.proj.b").value;
  const Matrix expect =
      row_layer_norm(row_layer_norm(state, cfg.ln_eps), cfg.ln_eps);
  CHECK((t.value(taps.layers[cfg.gin_layers]) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hand-composed pipeline reproduces the encoder on a 3-node fixture") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 41);

  const Graph g = random_graph(3, 43, 0.7);
  const auto zs = random_features({&g}, cfg, 47);
  NodeBatch batch = graphvec::make_node_batch({&g}, zs, cfg);

  Tape t;
  const EncoderTaps taps = enc.forward(t, batch, ps.bind(t));

  auto W = [&](const std::string& name) -> const Matrix& { return ps.by_name(name).value; };
  const Matrix a_hat = g.adjacency + Matrix::Identity(3, 3);
  std::vector<Matrix> cur = {zs[0][0], zs[0][1]};
  std::vector<Matrix> gin_concats;
  for (int d = 0; d < cfg.gin_layers; ++d) {
    Matrix cat(3, cfg.scales * cfg.gin_hidden);
    for (int q = 0; q < cfg.scales; ++q) {
      const std::string base = "enc.gin.s" + std::to_string(q) + ".d" + std::to_string(d) + ".";
      const Matrix agg = a_hat * cur[q];
      const Matrix hid =
          ((agg * W(base + "w1")).rowwise() + W(base + "b1").row(0)).cwiseMax(0.0);
      cur[q] = (hid * W(base + "w2")).rowwise() + W(base + "b2").row(0);
      cat.middleCols(q * cfg.gin_hidden, cfg.gin_hidden) = cur[q];
    }
    gin_concats.push_back(cat);
  }
  Matrix state =
      (gin_concats.back() * W("enc.proj.w")).rowwise() + W("enc.proj.b").row(0);
  Matrix attn(3, cfg.d_model());
  for (int h = 0; h < cfg.heads; ++h) {
    const std::string hb = "enc.gt0.h" + std::to_string(h) + ".";
    const Matrix q = state * W(hb + "wq");
    const Matrix k = state * W(hb + "wk");
    const Matrix v = state * W(hb + "wv");
    Matrix scores = q * k.transpose() / std::sqrt(static_cast<double>(cfg.head_dim));
    for (int i = 0; i < 3; ++i) {
      const Eigen::ArrayXd e = (scores.row(i).array() - scores.row(i).maxCoeff()).exp();
      scores.row(i) = (e / e.sum()).matrix();
    }
    attn.middleCols(h * cfg.head_dim, cfg.head_dim) = scores * v;
  }
  const Matrix attn_out = (attn * W("enc.gt0.attn.w")).rowwise() + W("enc.gt0.attn.b").row(0);
  const Matrix normed = row_layer_norm(state + attn_out, cfg.ln_eps);
  const Matrix ffn_hid =
      ((normed * W("enc.gt0.ffn.w1")).rowwise() + W("enc.gt0.ffn.b1").row(0)).cwiseMax(0.0);
  const Matrix ffn = (ffn_hid * W("enc.gt0.ffn.w2")).rowwise() + W("enc.gt0.ffn.b2").row(0);
  const Matrix block_out = row_layer_norm(normed + ffn, cfg.ln_eps);

  CHECK((t.value(taps.layers[0]) - gin_concats[0]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.value(taps.layers[1]) - gin_concats[1]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.value(taps.layers[2]) - block_out).cwiseAbs().maxCoeff() < 1e-12);
  Matrix final_expect(3, cfg.final_width());
  final_expect << block_out, gin_concats.back();
  CHECK((t.value(taps.final_h) - final_expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("node permutation permutes every tapped state identically") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 51);

  const int n = 6;
  const Graph g = random_graph(n, 53);
  const auto zs = random_features({&g}, cfg, 59);

  graphvec::Rng rng(61);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) p(i, perm[i]) = 1.0;

  Graph gp;
  gp.adjacency = p * g.adjacency * p.transpose();
  std::vector<std::vector<Matrix>> zp = {{p * zs[0][0], p * zs[0][1]}};

  Tape t1, t2;
  const EncoderTaps a = enc.forward(t1, graphvec::make_node_batch({&g}, zs, cfg), ps.bind(t1));
  const EncoderTaps b = enc.forward(t2, graphvec::make_node_batch({&gp}, zp, cfg), ps.bind(t2));
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    CHECK((p * t1.value(a.layers[l]) - t2.value(b.layers[l])).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p * t1.value(a.final_h) - t2.value(b.final_h)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("graphs in a batch never see each other") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 71);

  const Graph g0 = random_graph(4, 73);
  const Graph g1 = random_graph(5, 79);
  const auto z_pair = random_features({&g0, &g1}, cfg, 83);

  // Zeroing the second graph's features must leave the first graph's rows
  // bit-identical: the adjacency is block-diagonal and attention is per-graph.
  auto z_zeroed = z_pair;
  for (auto& m : z_zeroed[1]) m.setZero();
  Tape t1, t2;
  const EncoderTaps a =
      enc.forward(t1, graphvec::make_node_batch({&g0, &g1}, z_pair, cfg), ps.bind(t1));
  const EncoderTaps b =
      enc.forward(t2, graphvec::make_node_batch({&g0, &g1}, z_zeroed, cfg), ps.bind(t2));
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    CHECK(t1.value(a.layers[l]).topRows(4) == t2.value(b.layers[l]).topRows(4));
  CHECK(t1.value(a.final_h).topRows(4) == t2.value(b.final_h).topRows(4));

  // And the first graph alone reproduces its in-batch rows.
  Tape t3;
  const EncoderTaps solo =
      enc.forward(t3, graphvec::make_node_batch({&g0}, {z_pair[0]}, cfg), ps.bind(t3));
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    CHECK((t1.value(a.layers[l]).topRows(4) - t3.value(solo.layers[l])).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("same seed, same parameters, same outputs") {
  EncoderConfig cfg = tiny_config();
  Encoder e1(cfg), e2(cfg);
  ParamSet p1, p2;
  e1.init_params(p1, 99);
  e2.init_params(p2, 99);
  REQUIRE(p1.size() == p2.size());
  for (int i = 0; i < p1.size(); ++i) {
    CHECK(p1.at(i).name == p2.at(i).name);
    CHECK(p1.at(i).value == p2.at(i).value);
  }

  const Graph g = random_graph(5, 101);
  const auto zs = random_features({&g}, cfg, 103);
  Tape t1, t2;
  const EncoderTaps a = e1.forward(t1, graphvec::make_node_batch({&g}, zs, cfg), p1.bind(t1));
  const EncoderTaps b = e2.forward(t2, graphvec::make_node_batch({&g}, zs, cfg), p2.bind(t2));
  CHECK(t1.value(a.final_h) == t2.value(b.final_h));
}

TEST_CASE("restored parameter sets relocate by name and reject bad shapes") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 111);

  Encoder fresh(cfg);
  fresh.locate_params(ps);
  const Graph g = random_graph(4, 113);
  const auto zs = random_features({&g}, cfg, 127);
  Tape t1, t2;
  const EncoderTaps a = enc.forward(t1, graphvec::make_node_batch({&g}, zs, cfg), ps.bind(t1));
  const EncoderTaps b =
      fresh.forward(t2, graphvec::make_node_batch({&g}, zs, cfg), ps.bind(t2));
  CHECK(t1.value(a.final_h) == t2.value(b.final_h));

  ParamSet incomplete;
  incomplete.add("enc.proj.w", Matrix::Zero(2, 2));
  Encoder enc2(cfg);
  CHECK_THROWS_AS(enc2.locate_params(incomplete), graphvec::ContractError);

  ParamSet badshape = ps;
  badshape.by_name("enc.proj.w").value = Matrix::Zero(2, 2);
  Encoder enc3(cfg);
  CHECK_THROWS_AS(enc3.locate_params(badshape), graphvec::ShapeError);
}

TEST_CASE("input validation") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 131);
  CHECK_THROWS_AS(enc.init_params(ps, 131), graphvec::ContractError);

  const Graph g = random_graph(4, 137);
  const auto good = random_features({&g}, cfg, 139);

  CHECK_THROWS_AS(graphvec::make_node_batch({}, {}, cfg), graphvec::ParameterError);
  CHECK_THROWS_AS(graphvec::make_node_batch({&g}, {{good[0][0]}}, cfg),
                  graphvec::ParameterError);  // scale count mismatch
  CHECK_THROWS_AS(
      graphvec::make_node_batch({&g}, {{good[0][0], randn(3, cfg.embed_dim, 1)}}, cfg),
      graphvec::ShapeError);

  Encoder unbound(cfg);
  Tape t;
  NodeBatch batch = graphvec::make_node_batch({&g}, good, cfg);
  CHECK_THROWS_AS(unbound.forward(t, batch, {}), graphvec::ContractError);

  EncoderConfig bad = cfg;
  bad.heads = 0;
  CHECK_THROWS_AS(Encoder{bad}, graphvec::ParameterError);
}

TEST_CASE("encoder gradients agree with finite differences") {
  EncoderConfig cfg = tiny_config();
  Encoder enc(cfg);
  ParamSet ps;
  enc.init_params(ps, 151);

  const Graph g0 = random_graph(3, 157, 0.6);
  const Graph g1 = random_graph(4, 163, 0.5);
  const Graph g2 = random_graph(3, 167, 0.7);
  const std::vector<const Graph*> graphs = {&g0, &g1, &g2};
  const auto zs = random_features(graphs, cfg, 173);
  const NodeBatch batch = graphvec::make_node_batch(graphs, zs, cfg);

  std::vector<Matrix> leaves;
  for (int i = 0; i < ps.size(); ++i) leaves.push_back(ps.at(i).value);

  // Pair each tapped state with a fixed random probe so the scalar root is a
  // generic linear functional.  Row-symmetric roots (means, mean squares) are
  // nearly constant in most parameters — layer-normed rows have exact zero
  // mean and unit variance — which would leave nothing but FD noise to check.
  std::vector<Matrix> probes;
  for (int l = 0; l < cfg.tap_count(); ++l)
    probes.push_back(randn(batch.total_rows(), cfg.tap_width(l), 900 + l));
  probes.push_back(randn(batch.total_rows(), cfg.final_width(), 990));

  const auto build = [&](Tape& t, const std::vector<Var>& vars) {
    const EncoderTaps taps = enc.forward(t, batch, vars);
    Var root = t.mean_all(t.mul(taps.final_h, t.input(probes.back())));
    for (std::size_t l = 0; l < taps.layers.size(); ++l)
      root = t.add(root, t.mean_all(t.mul(taps.layers[l], t.input(probes[l]))));
    return root;
  };
  const auto result = graphvec::ad::grad_check(build, leaves, 179, 24);
  CHECK(result.checked > 300);
  CHECK(result.max_rel_err < 1e-4);
}
