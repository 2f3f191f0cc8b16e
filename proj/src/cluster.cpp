#include "graphvec/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "graphvec/errors.hpp"
#include "graphvec/rng.hpp"

namespace graphvec {

namespace {

double sq_dist(const Matrix& points, int i, const Matrix& centers, int c) {
  return (points.row(i) - centers.row(c)).squaredNorm();
}

Matrix kmeans_pp_init(const Matrix& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Matrix centers(k, points.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  int first = static_cast<int>(rng.uniform_int(0, n - 1));
  centers.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, sq_dist(points, i, centers, j));
      d2[static_cast<std::size_t>(i)] = chosen[static_cast<std::size_t>(i)] ? 0.0 : best;
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick = -1;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double acc = 0.0;
      for (int i = 0; i < n && pick < 0; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= r && d2[static_cast<std::size_t>(i)] > 0.0) pick = i;
      }
    }
    if (pick < 0)  // all remaining points coincide with a center
      for (int i = 0; i < n && pick < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
    if (pick < 0) pick = first;  // k > #distinct points; duplicates unavoidable
    centers.row(c) = points.row(pick);
    if (pick >= 0) chosen[static_cast<std::size_t>(pick)] = 1;
  }
  return centers;
}

}  // namespace

std::vector<int> kmeans_rows(const Matrix& points, int k, std::uint64_t seed,
                             int restarts, int max_iters) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw ParameterError("kmeans_rows: no points");
  if (k < 1 || k > n) throw ParameterError("kmeans_rows: k must lie in [1, n]");
  if (restarts < 1 || max_iters < 1)
    throw ParameterError("kmeans_rows: restarts and max_iters must be >= 1");
  if (!points.allFinite()) throw NumericError("kmeans_rows: nonfinite input");

  Rng base(seed);
  std::vector<int> best_assign;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng = base.fork(static_cast<std::uint64_t>(restart));
    Matrix centers = kmeans_pp_init(points, k, rng);
    std::vector<int> assign(static_cast<std::size_t>(n), -1);

    for (int iter = 0; iter < max_iters; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double best = sq_dist(points, i, centers, 0);
        for (int c = 1; c < k; ++c) {
          const double d = sq_dist(points, i, centers, c);
          if (d < best) {
            best = d;
            arg = c;
          }
        }
        if (assign[static_cast<std::size_t>(i)] != arg) changed = true;
        assign[static_cast<std::size_t>(i)] = arg;
      }
      if (!changed && iter > 0) break;

      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      Matrix sums = Matrix::Zero(k, points.cols());
      for (int i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
          continue;
        }
        // Empty cluster: seize the point currently farthest from its center.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = sq_dist(points, i, centers, assign[static_cast<std::size_t>(i)]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
        assign[static_cast<std::size_t>(far)] = c;
      }
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i)
      inertia += sq_dist(points, i, centers, assign[static_cast<std::size_t>(i)]);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }
  return best_assign;
}

std::vector<int> spectral_cluster(const Matrix& vectors, int k, std::uint64_t seed) {
  const int n = static_cast<int>(vectors.rows());
  if (n == 0) throw ParameterError("spectral_cluster: no vectors");
  if (k < 1 || k > n)
    throw ParameterError("spectral_cluster: k must lie in [1, n]");
  if (!vectors.allFinite()) throw NumericError("spectral_cluster: nonfinite input");
  if (k == 1) return std::vector<int>(static_cast<std::size_t>(n), 0);

  Eigen::VectorXd norms = vectors.rowwise().norm().cwiseMax(1e-12);
  Matrix sim = vectors * vectors.transpose();
  sim.array().colwise() /= norms.array();
  sim.array().rowwise() /= norms.transpose().array();

  const int k_nn = std::min(10, n - 1);
  std::vector<std::vector<char>> near(static_cast<std::size_t>(n),
                                      std::vector<char>(static_cast<std::size_t>(n), 0));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sim(i, a) > sim(i, b);  // stable: ties keep ascending index
    });
    int taken = 0;
    for (int j : order) {
      if (j == i) continue;
      near[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
      if (++taken == k_nn) break;
    }
  }

  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j)
      if (near[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
          near[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
        w(i, j) = w(j, i) = std::max(sim(i, j), 0.0);
  }

  const Eigen::VectorXd d_inv_sqrt = w.rowwise().sum().array().sqrt().inverse();
  Matrix lap = -w;
  lap.array().colwise() *= d_inv_sqrt.array();
  lap.array().rowwise() *= d_inv_sqrt.transpose().array();
  lap += Matrix::Identity(n, n);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(lap);
  if (solver.info() != Eigen::Success)
    throw NumericError("spectral_cluster: eigendecomposition failed");
  Matrix u = solver.eigenvectors().leftCols(k);
  const Eigen::VectorXd row_norms = u.rowwise().norm().cwiseMax(1e-12);
  u.array().colwise() /= row_norms.array();

  return kmeans_rows(u, k, seed);
}

double hungarian_max_weight(const Matrix& weights) {
  if (weights.size() == 0) throw ParameterError("hungarian_max_weight: empty matrix");
  if (weights.minCoeff() < 0.0)
    throw ParameterError("hungarian_max_weight: weights must be non-negative");
  if (weights.rows() > weights.cols()) return hungarian_max_weight(weights.transpose());

  const int n = static_cast<int>(weights.rows());
  const int m = static_cast<int>(weights.cols());
  const double top = weights.maxCoeff();
  // Minimum-cost formulation with cost = top − weight; a square pad is
  // implicit because unmatched columns simply keep p[j] = 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = (top - weights(i0 - 1, j - 1)) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  double total = 0.0;
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      total += weights(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

namespace {

std::vector<int> compact_labels(const std::vector<int>& labels, int& count) {
  std::map<int, int> remap;
  std::vector<int> out;
  for (int l : labels) {
    const auto [it, fresh] = remap.emplace(l, static_cast<int>(remap.size()));
    (void)fresh;
    out.push_back(it->second);
  }
  count = static_cast<int>(remap.size());
  return out;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

ClusterMetrics cluster_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw ContractError("cluster_metrics: label lists differ in length");
  if (pred.empty()) throw ContractError("cluster_metrics: empty label lists");
  const double n = static_cast<double>(pred.size());

  int cp = 0, ct = 0;
  const std::vector<int> a = compact_labels(pred, cp);
  const std::vector<int> b = compact_labels(truth, ct);
  Matrix contingency = Matrix::Zero(cp, ct);
  for (std::size_t i = 0; i < a.size(); ++i) contingency(a[i], b[i]) += 1.0;
  const Eigen::VectorXd row_sums = contingency.rowwise().sum();
  const Eigen::VectorXd col_sums = contingency.colwise().sum().transpose();

  ClusterMetrics metrics;
  metrics.acc = hungarian_max_weight(contingency) / n;

  double h_pred = 0.0, h_truth = 0.0, mutual = 0.0;
  for (int i = 0; i < cp; ++i) h_pred -= row_sums(i) / n * std::log(row_sums(i) / n);
  for (int j = 0; j < ct; ++j) h_truth -= col_sums(j) / n * std::log(col_sums(j) / n);
  for (int i = 0; i < cp; ++i)
    for (int j = 0; j < ct; ++j)
      if (contingency(i, j) > 0.0)
        mutual += contingency(i, j) / n *
                  std::log(n * contingency(i, j) / (row_sums(i) * col_sums(j)));
  metrics.nmi = (h_pred == 0.0 && h_truth == 0.0)
                    ? 1.0
                    : std::clamp(mutual / ((h_pred + h_truth) / 2.0), 0.0, 1.0);

  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < cp; ++i)
    for (int j = 0; j < ct; ++j) index += comb2(contingency(i, j));
  for (int i = 0; i < cp; ++i) sum_a += comb2(row_sums(i));
  for (int j = 0; j < ct; ++j) sum_b += comb2(col_sums(j));
  const double pairs = comb2(n);
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double max_index = (sum_a + sum_b) / 2.0;
  metrics.ari = std::abs(max_index - expected) < 1e-12
                    ? 1.0  // both partitions degenerate the same way
                    : std::clamp((index - expected) / (max_index - expected), -1.0, 1.0);
  return metrics;
}

}  // namespace graphvec
