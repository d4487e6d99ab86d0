#include "causalattr/detect.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "causalattr/errors.hpp"
#include "causalattr/parallel.hpp"
#include "causalattr/rng.hpp"

namespace causalattr {

namespace {

// Gaussian-kernel feature view of one pooled variable block: standardized
// continuous columns share one bandwidth, categorical columns match by code.
struct KernelBlock {
  Eigen::MatrixXd continuous;  // m x c, standardized
  std::vector<const std::vector<double>*> categorical;
  double gamma = 0.0;  // 1 / (2 h^2)

  std::size_t rows() const {
    return continuous.rows() > 0 ? static_cast<std::size_t>(continuous.rows())
                                 : (categorical.empty() ? 0 : categorical[0]->size());
  }

  double k(std::size_t i, std::size_t j) const {
    for (const auto* col : categorical)
      if ((*col)[i] != (*col)[j]) return 0.0;
    if (continuous.cols() == 0) return 1.0;
    const double d = (continuous.row(static_cast<Eigen::Index>(i)) -
                      continuous.row(static_cast<Eigen::Index>(j)))
                         .squaredNorm();
    return std::exp(-gamma * d);
  }
};

// Median pairwise squared distance over (a subsample of) the block's
// continuous part. Throws when every distance is zero.
double median_bandwidth_gamma(const Eigen::MatrixXd& standardized) {
  const auto m = static_cast<std::size_t>(standardized.rows());
  const std::size_t cap = 500;
  const std::size_t stride = m > cap ? (m + cap - 1) / cap : 1;
  std::vector<std::size_t> pick;
  for (std::size_t i = 0; i < m; i += stride) pick.push_back(i);
  std::vector<double> dists;
  dists.reserve(pick.size() * (pick.size() - 1) / 2);
  for (std::size_t i = 0; i < pick.size(); ++i)
    for (std::size_t j = i + 1; j < pick.size(); ++j) {
      const double d = (standardized.row(static_cast<Eigen::Index>(pick[i])) -
                        standardized.row(static_cast<Eigen::Index>(pick[j])))
                           .squaredNorm();
      if (d > 0.0) dists.push_back(d);
    }
  if (dists.empty()) throw BandwidthDegenerate("all pairwise distances are zero");
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  // h^2 = median squared distance; gamma = 1 / (2 h^2).
  return 1.0 / (2.0 * *mid);
}

KernelBlock build_block(const Table& pooled, const std::vector<std::size_t>& cols,
                        const Dag& dag) {
  KernelBlock block;
  const auto m = static_cast<Eigen::Index>(pooled.rows());
  std::vector<std::size_t> cont;
  for (std::size_t c : cols) {
    if (dag.node(c).kind == NodeKind::Continuous)
      cont.push_back(c);
    else
      block.categorical.push_back(&pooled.column(c));
  }
  if (!cont.empty()) {
    block.continuous.resize(m, static_cast<Eigen::Index>(cont.size()));
    for (std::size_t q = 0; q < cont.size(); ++q) {
      const auto& col = pooled.column(cont[q]);
      double mu = 0.0;
      for (double x : col) mu += x;
      mu /= static_cast<double>(col.size());
      double var = 0.0;
      for (double x : col) var += (x - mu) * (x - mu);
      var /= static_cast<double>(col.size());
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      for (Eigen::Index i = 0; i < m; ++i)
        block.continuous(i, static_cast<Eigen::Index>(q)) =
            (col[static_cast<std::size_t>(i)] - mu) / sd;
    }
    block.gamma = median_bandwidth_gamma(block.continuous);
  }
  return block;
}

// Pivoted incomplete Cholesky of the block's Gram matrix: K ~ L L^T with
// greedy residual-diagonal pivoting. Stops at max_rank or once the residual
// trace falls below tolerance * m.
Eigen::MatrixXd icd_factor(const KernelBlock& block, std::size_t max_rank, double tolerance) {
  const auto m = static_cast<Eigen::Index>(block.rows());
  const auto rmax = static_cast<Eigen::Index>(std::min<std::size_t>(max_rank,
                                                                    block.rows()));
  Eigen::MatrixXd L(m, rmax);
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(m);  // k(i,i) = 1 for both kernels
  const double stop = tolerance * static_cast<double>(m);
  Eigen::Index rank = 0;
  for (; rank < rmax; ++rank) {
    Eigen::Index pivot = 0;
    double best = diag(0);
    for (Eigen::Index i = 1; i < m; ++i)
      if (diag(i) > best) {
        best = diag(i);
        pivot = i;
      }
    if (best < stop || best <= 0.0) break;
    const double root = std::sqrt(best);
    for (Eigen::Index i = 0; i < m; ++i)
      L(i, rank) = block.k(static_cast<std::size_t>(i), static_cast<std::size_t>(pivot));
    if (rank > 0)
      L.col(rank).noalias() -=
          L.leftCols(rank) * L.row(pivot).head(rank).transpose();
    L.col(rank) /= root;
    diag.array() -= L.col(rank).array().square();
    diag = diag.cwiseMax(0.0);
  }
  return L.leftCols(rank);
}

// v -> v - K (K + lambda I)^-1 v via the low-rank factor, i.e. ridge
// residuals of v regressed on the kernel features.
struct RidgeResidual {
  Eigen::MatrixXd L;
  Eigen::LLT<Eigen::MatrixXd> solver;  // of lambda I + L^T L

  RidgeResidual(Eigen::MatrixXd factor, double lambda) : L(std::move(factor)) {
    Eigen::MatrixXd inner = L.transpose() * L;
    inner.diagonal().array() += lambda;
    solver.compute(inner);
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (L.cols() == 0) return v;
    return v - L * solver.solve(L.transpose() * v);
  }
};

// Exact ridge residual for an all-categorical conditioning set: the Gram
// matrix is block-constant over parent configurations, so the fit is the
// shrunken per-configuration mean.
std::vector<std::size_t> config_ids(const Table& pooled, const std::vector<std::size_t>& cols,
                                    const Dag& dag) {
  std::vector<std::size_t> ids(pooled.rows(), 0);
  for (std::size_t c : cols) {
    const auto card = dag.node(c).categories.size();
    for (std::size_t i = 0; i < pooled.rows(); ++i)
      ids[i] = ids[i] * card + static_cast<std::size_t>(pooled.code(c, i));
  }
  return ids;
}

Eigen::VectorXd group_residual(const Eigen::VectorXd& v, const std::vector<std::size_t>& ids,
                               std::size_t n_groups, double lambda) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_groups));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_groups));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto g = static_cast<Eigen::Index>(ids[static_cast<std::size_t>(i)]);
    sums(g) += v(i);
    counts(g) += 1.0;
  }
  // Ridge fit on group indicators shrinks the group mean by n_g/(n_g+lambda).
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto g = static_cast<Eigen::Index>(ids[static_cast<std::size_t>(i)]);
    out(i) = v(i) - sums(g) / (counts(g) + lambda);
  }
  return out;
}

double perm_p_value(double observed, const std::vector<double>& permuted) {
  std::size_t ge = 0;
  for (double s : permuted)
    if (s >= observed) ++ge;
  return static_cast<double>(1 + ge) / static_cast<double>(permuted.size() + 1);
}

// Cross-covariance statistic between residualized child features G and a
// residualized marker vector: sum over feature columns of the squared mean
// product. The permuted copies reshuffle the marker residuals.
double cross_cov_stat(const Eigen::MatrixXd& g, const Eigen::VectorXd& a) {
  const double m = static_cast<double>(a.size());
  return (g.transpose() * a).squaredNorm() / (m * m);
}

struct NodeTask {
  const Table& pooled;
  const std::vector<int8_t>& index;
  const Dag& dag;
  const DetectOptions& options;
};

NodeDetection test_root(const NodeTask& task, std::size_t node) {
  const Table& pooled = task.pooled;
  const std::size_t m = pooled.rows();
  double m1 = 0.0;
  for (int8_t s : task.index)
    if (s > 0) m1 += 1.0;
  const double m2 = static_cast<double>(m) - m1;

  Rng rng = Rng::stream(task.options.seed, static_cast<uint64_t>(node), 0x726f6f74ULL);
  NodeDetection out;
  out.test = "kernel_two_sample";

  if (task.dag.node(node).kind == NodeKind::Categorical) {
    // Indicator-kernel MMD^2 reduces to per-category frequency contrasts.
    const auto card = task.dag.node(node).categories.size();
    const auto& col = pooled.column(node);
    std::vector<int8_t> labels(task.index.begin(), task.index.end());
    auto stat = [&](const std::vector<int8_t>& lab) {
      std::vector<double> c1(card, 0.0), c2(card, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const auto c = static_cast<std::size_t>(col[i]);
        if (lab[i] > 0)
          c1[c] += 1.0;
        else
          c2[c] += 1.0;
      }
      double s = 0.0;
      for (std::size_t c = 0; c < card; ++c) {
        const double d = c1[c] / m1 - c2[c] / m2;
        s += d * d;
      }
      return s;
    };
    const double observed = stat(labels);
    std::vector<double> permuted(task.options.n_permutations);
    for (std::size_t p = 0; p < permuted.size(); ++p) {
      rng.shuffle(labels);
      permuted[p] = stat(labels);
    }
    out.p_value = perm_p_value(observed, permuted);
  } else {
    KernelBlock block = build_block(pooled, {node}, task.dag);
    const Eigen::MatrixXd L =
        icd_factor(block, task.options.max_rank, task.options.rank_tolerance);
    Eigen::VectorXd b(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i)
      b(static_cast<Eigen::Index>(i)) = task.index[i] > 0 ? 1.0 / m1 : -1.0 / m2;
    const double observed = (L.transpose() * b).squaredNorm();
    std::vector<double> permuted(task.options.n_permutations);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Eigen::VectorXd bp(b.size());
    for (std::size_t p = 0; p < permuted.size(); ++p) {
      rng.shuffle(order);
      for (std::size_t i = 0; i < m; ++i) bp(static_cast<Eigen::Index>(i)) = b(static_cast<Eigen::Index>(order[i]));
      permuted[p] = (L.transpose() * bp).squaredNorm();
    }
    out.p_value = perm_p_value(observed, permuted);
  }
  out.changed = out.p_value < task.options.alpha;
  return out;
}

NodeDetection test_conditional(const NodeTask& task, std::size_t node) {
  const Table& pooled = task.pooled;
  const std::size_t m = pooled.rows();
  const auto mi = static_cast<Eigen::Index>(m);
  const auto& parents = task.dag.parents(node);
  const double lambda = task.options.ridge_scale * static_cast<double>(m);

  // Marker vector, centered.
  Eigen::VectorXd a(mi);
  for (std::size_t i = 0; i < m; ++i) a(static_cast<Eigen::Index>(i)) = task.index[i];
  a.array() -= a.mean();

  // Child features: indicator columns for a categorical child, low-rank
  // Gaussian features otherwise. Columns centered before residualizing.
  Eigen::MatrixXd features;
  if (task.dag.node(node).kind == NodeKind::Categorical) {
    const auto card = static_cast<Eigen::Index>(task.dag.node(node).categories.size());
    features = Eigen::MatrixXd::Zero(mi, card);
    for (std::size_t i = 0; i < m; ++i)
      features(static_cast<Eigen::Index>(i),
               static_cast<Eigen::Index>(pooled.code(node, i))) = 1.0;
  } else {
    KernelBlock child = build_block(pooled, {node}, task.dag);
    features = icd_factor(child, task.options.max_rank, task.options.rank_tolerance);
  }
  features.rowwise() -= features.colwise().mean();

  bool all_categorical = true;
  for (std::size_t p : parents)
    if (task.dag.node(p).kind == NodeKind::Continuous) all_categorical = false;

  Eigen::MatrixXd g(features.rows(), features.cols());
  Eigen::VectorXd ra;
  if (all_categorical) {
    std::size_t n_groups = 1;
    for (std::size_t p : parents) n_groups *= task.dag.node(p).categories.size();
    const auto ids = config_ids(pooled, parents, task.dag);
    for (Eigen::Index c = 0; c < features.cols(); ++c)
      g.col(c) = group_residual(features.col(c), ids, n_groups, lambda);
    ra = group_residual(a, ids, n_groups, lambda);
  } else {
    KernelBlock zblock = build_block(pooled, parents, task.dag);
    RidgeResidual ridge(
        icd_factor(zblock, task.options.max_rank, task.options.rank_tolerance), lambda);
    for (Eigen::Index c = 0; c < features.cols(); ++c)
      g.col(c) = ridge.apply(features.col(c));
    ra = ridge.apply(a);
  }

  const double observed = cross_cov_stat(g, ra);
  Rng rng = Rng::stream(task.options.seed, static_cast<uint64_t>(node), 0x6369ULL);
  std::vector<double> permuted(task.options.n_permutations);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::VectorXd ap(ra.size());
  for (std::size_t p = 0; p < permuted.size(); ++p) {
    rng.shuffle(order);
    for (std::size_t i = 0; i < m; ++i)
      ap(static_cast<Eigen::Index>(i)) = ra(static_cast<Eigen::Index>(order[i]));
    permuted[p] = cross_cov_stat(g, ap);
  }
  NodeDetection out;
  out.test = "kernel_ci";
  out.p_value = perm_p_value(observed, permuted);
  out.changed = out.p_value < task.options.alpha;
  return out;
}

// Lexicographic row order over all columns. The permutation null pairs
// residuals by row position, so without a canonical order the p-values
// would depend on how the caller happened to sort the input.
Table canonicalize(const Table& table) {
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const double a = table.real(c, x);
      const double b = table.real(c, y);
      if (a < b) return true;
      if (a > b) return false;
    }
    return false;
  });
  return table.select_rows(order);
}

// Proportional per-source subsample keeping row order, so oversized pooled
// tables stay within the test budget.
void subsample(const Table& table, std::size_t keep, uint64_t seed, uint64_t salt,
               Table& out) {
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, 0x737562ULL, salt);
  rng.shuffle(order);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  out = table.select_rows(order);
}

}  // namespace

DetectionResult detect_changes(const Table& old_table, const Table& new_table,
                               const Dag& dag, const DetectOptions& options) {
  if (!old_table.schema_matches(dag.nodes()) || !new_table.schema_matches(dag.nodes()))
    throw SchemaMismatch("tables do not match the graph");
  if (old_table.rows() == 0 || new_table.rows() == 0)
    throw EmptyTable("both samples must be nonempty");
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw InvalidArgument("alpha must lie in (0,1)");
  if (options.n_permutations < 1) throw InvalidArgument("need at least one permutation");

  Table old_sorted = canonicalize(old_table);
  Table new_sorted = canonicalize(new_table);
  const Table* old_ptr = &old_sorted;
  const Table* new_ptr = &new_sorted;
  Table old_small, new_small;
  const std::size_t total = old_sorted.rows() + new_sorted.rows();
  if (total > options.max_rows) {
    const auto keep_old = static_cast<std::size_t>(
        std::llround(static_cast<double>(options.max_rows) *
                     static_cast<double>(old_sorted.rows()) / static_cast<double>(total)));
    const std::size_t keep_new = options.max_rows - keep_old;
    subsample(old_sorted, std::max<std::size_t>(keep_old, 2), options.seed, 1, old_small);
    subsample(new_sorted, std::max<std::size_t>(keep_new, 2), options.seed, 2, new_small);
    old_ptr = &old_small;
    new_ptr = &new_small;
  }
  const IndexedTable indexed = concat_with_index(*old_ptr, *new_ptr);

  DetectionResult result;
  result.alpha = options.alpha;
  result.nodes.resize(dag.size());
  NodeTask task{indexed.table, indexed.index, dag, options};
  parallel_for_indexed(dag.size(), options.workers, [&](std::size_t j) {
    result.nodes[j] = dag.is_root(j) ? test_root(task, j) : test_conditional(task, j);
  });
  return result;
}

}  // namespace causalattr
