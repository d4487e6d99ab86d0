#include "causalattr/mechanisms.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "causalattr/errors.hpp"
#include "causalattr/stats.hpp"
#include "causalattr/warnings.hpp"

namespace causalattr {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double gaussian_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance)) - d * d / (2.0 * variance);
}

int32_t draw_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u <= acc) return static_cast<int32_t>(c);
  }
  return static_cast<int32_t>(probs.size() - 1);
}

void check_probs(std::span<const double> probs, const char* what) {
  if (probs.empty()) throw InvalidArgument(std::string(what) + ": empty probability vector");
  KahanSum s;
  for (double p : probs) {
    if (p < 0.0) throw InvalidArgument(std::string(what) + ": negative probability");
    s.add(p);
  }
  if (std::abs(s.value() - 1.0) > 1e-9)
    throw InvalidArgument(std::string(what) + ": probabilities do not sum to 1");
}

// Dummy-coded design width (reference level dropped per categorical parent).
std::size_t dummy_width(const ParentLayout& layout) {
  std::size_t w = 0;
  for (int32_t card : layout) w += card == 0 ? 1 : static_cast<std::size_t>(card - 1);
  return w;
}

// Full one-hot width (every category keeps a column).
std::size_t onehot_width(const ParentLayout& layout) {
  std::size_t w = 0;
  for (int32_t card : layout) w += card == 0 ? 1 : static_cast<std::size_t>(card);
  return w;
}

void check_parent_values(const ParentLayout& layout, std::span<const double> values) {
  if (values.size() != layout.size())
    throw InvalidArgument("parent value count does not match mechanism layout");
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::GaussianMarginal: return "gaussian_marginal";
    case Family::EmpiricalCategoricalMarginal: return "empirical_categorical";
    case Family::LinearGaussianConditional: return "linear_gaussian";
    case Family::DiscreteCpt: return "discrete_cpt";
    case Family::NearestNeighborConditional: return "nearest_neighbor";
  }
  return "unknown";
}

GaussianMarginal::GaussianMarginal(double mean, double variance)
    : mean_(mean), variance_(variance) {
  if (!(variance > 0.0)) throw NonPositiveVariance("gaussian marginal variance must be > 0");
}

double GaussianMarginal::sample_one(std::span<const double> parent_values, Rng& rng) const {
  check_parent_values(layout_, parent_values);
  return mean_ + std::sqrt(variance_) * rng.normal();
}

double GaussianMarginal::log_density(double value, std::span<const double> parent_values) const {
  check_parent_values(layout_, parent_values);
  return gaussian_log_density(value, mean_, variance_);
}

EmpiricalCategoricalMarginal::EmpiricalCategoricalMarginal(std::vector<double> probs)
    : probs_(std::move(probs)) {
  check_probs(probs_, "empirical marginal");
}

double EmpiricalCategoricalMarginal::sample_one(std::span<const double> parent_values,
                                                Rng& rng) const {
  check_parent_values(layout_, parent_values);
  return static_cast<double>(draw_categorical(probs_, rng));
}

double EmpiricalCategoricalMarginal::log_density(double value,
                                                 std::span<const double> parent_values) const {
  check_parent_values(layout_, parent_values);
  const auto c = static_cast<std::size_t>(value);
  if (c >= probs_.size()) throw InvalidArgument("category code out of range");
  return std::log(probs_[c]);
}

LinearGaussianConditional::LinearGaussianConditional(ParentLayout layout,
                                                     std::vector<double> weights,
                                                     double intercept, double noise_variance)
    : layout_(std::move(layout)),
      weights_(std::move(weights)),
      intercept_(intercept),
      noise_variance_(noise_variance) {
  if (layout_.empty()) throw IncompatibleFamily("linear mechanism needs at least one parent");
  if (weights_.size() != dummy_width(layout_))
    throw InvalidArgument("weight count does not match encoded parent width");
  if (!(noise_variance > 0.0))
    throw NonPositiveVariance("linear mechanism noise variance must be > 0");
}

double LinearGaussianConditional::conditional_mean(std::span<const double> parent_values) const {
  check_parent_values(layout_, parent_values);
  double m = intercept_;
  std::size_t w = 0;
  for (std::size_t p = 0; p < layout_.size(); ++p) {
    if (layout_[p] == 0) {
      m += weights_[w++] * parent_values[p];
    } else {
      const auto code = static_cast<int32_t>(parent_values[p]);
      if (code > 0) m += weights_[w + static_cast<std::size_t>(code - 1)];
      w += static_cast<std::size_t>(layout_[p] - 1);
    }
  }
  return m;
}

double LinearGaussianConditional::sample_one(std::span<const double> parent_values,
                                             Rng& rng) const {
  return conditional_mean(parent_values) + std::sqrt(noise_variance_) * rng.normal();
}

double LinearGaussianConditional::log_density(double value,
                                              std::span<const double> parent_values) const {
  return gaussian_log_density(value, conditional_mean(parent_values), noise_variance_);
}

DiscreteCpt::DiscreteCpt(ParentLayout layout, int32_t n_categories, std::vector<double> probs,
                         std::vector<uint8_t> config_seen, std::vector<double> fallback,
                         double alpha)
    : layout_(std::move(layout)),
      n_categories_(n_categories),
      probs_(std::move(probs)),
      config_seen_(std::move(config_seen)),
      fallback_(std::move(fallback)),
      alpha_(alpha) {
  if (n_categories_ < 2) throw InvalidArgument("cpt needs at least two categories");
  for (int32_t card : layout_)
    if (card < 2) throw IncompatibleFamily("cpt parents must be categorical");
  std::size_t n_configs = 1;
  for (int32_t card : layout_) n_configs *= static_cast<std::size_t>(card);
  if (config_seen_.size() != n_configs) throw InvalidArgument("cpt seen-flag count mismatch");
  if (probs_.size() != n_configs * static_cast<std::size_t>(n_categories_))
    throw InvalidArgument("cpt cell count mismatch");
  if (fallback_.size() != static_cast<std::size_t>(n_categories_))
    throw InvalidArgument("cpt fallback length mismatch");
  if (alpha_ < 0.0) throw InvalidArgument("cpt pseudo-count must be >= 0");
  for (std::size_t g = 0; g < n_configs; ++g)
    check_probs(row(g), "cpt row");
  check_probs(fallback_, "cpt fallback");
}

std::size_t DiscreteCpt::config_index(std::span<const double> parent_values) const {
  check_parent_values(layout_, parent_values);
  std::size_t idx = 0;
  for (std::size_t p = 0; p < layout_.size(); ++p) {
    const auto code = static_cast<int32_t>(parent_values[p]);
    if (code < 0 || code >= layout_[p])
      throw InvalidArgument("parent category code out of range");
    idx = idx * static_cast<std::size_t>(layout_[p]) + static_cast<std::size_t>(code);
  }
  return idx;
}

std::span<const double> DiscreteCpt::row(std::size_t config) const {
  return {probs_.data() + config * static_cast<std::size_t>(n_categories_),
          static_cast<std::size_t>(n_categories_)};
}

double DiscreteCpt::sample_one(std::span<const double> parent_values, Rng& rng) const {
  const std::size_t g = config_index(parent_values);
  if (!config_seen_[g]) {
    if (!warned_.exchange(true))
      warn("sampling a parent configuration unseen at fit time; using child marginal");
    return static_cast<double>(draw_categorical(fallback_, rng));
  }
  return static_cast<double>(draw_categorical(row(g), rng));
}

double DiscreteCpt::log_density(double value, std::span<const double> parent_values) const {
  const std::size_t g = config_index(parent_values);
  const auto c = static_cast<std::size_t>(value);
  if (c >= static_cast<std::size_t>(n_categories_))
    throw InvalidArgument("category code out of range");
  return std::log(row(g)[c]);
}

NearestNeighborConditional::NearestNeighborConditional(
    ParentLayout layout, std::vector<double> design, std::size_t n_rows,
    std::size_t n_features, std::vector<double> child, int k, bool categorical_child,
    int32_t n_categories, std::vector<double> residual_pool)
    : layout_(std::move(layout)),
      design_(std::move(design)),
      n_rows_(n_rows),
      n_features_(n_features),
      child_(std::move(child)),
      k_(k),
      categorical_child_(categorical_child),
      n_categories_(n_categories),
      residual_pool_(std::move(residual_pool)) {
  if (layout_.empty()) throw IncompatibleFamily("nearest-neighbor mechanism needs parents");
  if (n_features_ != onehot_width(layout_))
    throw InvalidArgument("design width does not match encoded parent width");
  if (design_.size() != n_rows_ * n_features_) throw InvalidArgument("design size mismatch");
  if (child_.size() != n_rows_) throw InvalidArgument("child length mismatch");
  if (k_ < 1) throw InvalidArgument("neighbor count must be >= 1");
  if (n_rows_ < static_cast<std::size_t>(k_)) throw InsufficientData("fewer rows than neighbors");
  if (!categorical_child_ && residual_pool_.empty())
    throw InvalidArgument("continuous child needs a residual pool");
  if (categorical_child_ && n_categories_ < 2)
    throw InvalidArgument("categorical child needs a category count");
}

void NearestNeighborConditional::encode(std::span<const double> parent_values,
                                        std::vector<double>& out) const {
  check_parent_values(layout_, parent_values);
  out.assign(n_features_, 0.0);
  std::size_t w = 0;
  for (std::size_t p = 0; p < layout_.size(); ++p) {
    if (layout_[p] == 0) {
      out[w++] = parent_values[p];
    } else {
      const auto code = static_cast<int32_t>(parent_values[p]);
      if (code < 0 || code >= layout_[p])
        throw InvalidArgument("parent category code out of range");
      out[w + static_cast<std::size_t>(code)] = 1.0;
      w += static_cast<std::size_t>(layout_[p]);
    }
  }
}

// Indices of the k nearest training rows by squared Euclidean distance,
// ties broken toward the lower row index so results never depend on
// evaluation order.
void NearestNeighborConditional::nearest(std::span<const double> query,
                                         std::vector<std::size_t>& out) const {
  const std::size_t k = static_cast<std::size_t>(k_);
  out.clear();
  std::vector<double> dist(k, 0.0);
  std::size_t filled = 0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < n_rows_; ++i) {
    const double* row = design_.data() + i * n_features_;
    double d = 0.0;
    for (std::size_t f = 0; f < n_features_; ++f) {
      const double diff = row[f] - query[f];
      d += diff * diff;
    }
    if (filled < k) {
      dist[filled] = d;
      out.push_back(i);
      ++filled;
      if (filled == k) {
        worst = 0;
        for (std::size_t j = 1; j < k; ++j)
          if (dist[j] > dist[worst] || (dist[j] == dist[worst] && out[j] > out[worst]))
            worst = j;
      }
      continue;
    }
    if (d < dist[worst]) {
      dist[worst] = d;
      out[worst] = i;
      worst = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (dist[j] > dist[worst] || (dist[j] == dist[worst] && out[j] > out[worst]))
          worst = j;
    }
  }
}

double NearestNeighborConditional::predict(std::span<const double> parent_values) const {
  std::vector<double> query;
  encode(parent_values, query);
  std::vector<std::size_t> idx;
  nearest(query, idx);
  KahanSum s;
  for (std::size_t i : idx) s.add(child_[i]);
  return s.value() / static_cast<double>(idx.size());
}

double NearestNeighborConditional::sample_one(std::span<const double> parent_values,
                                              Rng& rng) const {
  std::vector<double> query;
  encode(parent_values, query);
  std::vector<std::size_t> idx;
  nearest(query, idx);
  if (categorical_child_) {
    std::vector<double> freq(static_cast<std::size_t>(n_categories_), 0.0);
    for (std::size_t i : idx) freq[static_cast<std::size_t>(child_[i])] += 1.0;
    for (double& f : freq) f /= static_cast<double>(idx.size());
    return static_cast<double>(draw_categorical(freq, rng));
  }
  KahanSum s;
  for (std::size_t i : idx) s.add(child_[i]);
  const double pred = s.value() / static_cast<double>(idx.size());
  const std::size_t r = rng.uniform_int(residual_pool_.size());
  return pred + residual_pool_[r];
}

double NearestNeighborConditional::log_density(double, std::span<const double>) const {
  throw UnsupportedFamily("nearest-neighbor mechanism has no closed-form density");
}

namespace {

MechanismPtr fit_gaussian_marginal(const Table& table, std::size_t node,
                                   const FitOptions& options) {
  const auto& col = table.column(node);
  const double mu = mean(col);
  const double var = std::max(sample_variance(col), options.variance_floor);
  return std::make_shared<GaussianMarginal>(mu, var);
}

MechanismPtr fit_empirical_marginal(const Table& table, const Dag& dag, std::size_t node) {
  const std::size_t n_cat = dag.node(node).categories.size();
  std::vector<double> counts(n_cat, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r)
    counts[static_cast<std::size_t>(table.code(node, r))] += 1.0;
  KahanSum total;
  for (double c : counts) total.add(c);
  for (double& c : counts) c /= total.value();
  return std::make_shared<EmpiricalCategoricalMarginal>(std::move(counts));
}

ParentLayout layout_for(const Dag& dag, std::size_t node) {
  ParentLayout layout;
  for (std::size_t p : dag.parents(node)) {
    const auto& decl = dag.node(p);
    layout.push_back(decl.kind == NodeKind::Categorical
                         ? static_cast<int32_t>(decl.categories.size())
                         : 0);
  }
  return layout;
}

MechanismPtr fit_linear_gaussian(const Table& table, const Dag& dag, std::size_t node,
                                 const FitOptions& options) {
  const auto& parents = dag.parents(node);
  ParentLayout layout = layout_for(dag, node);
  const std::size_t m = table.rows();
  const std::size_t width = dummy_width(layout);
  if (m < width + 2) throw InsufficientData("too few rows for linear fit");

  Eigen::MatrixXd design(m, width + 1);
  for (std::size_t r = 0; r < m; ++r) {
    design(r, 0) = 1.0;
    std::size_t w = 1;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      const double v = table.real(parents[p], r);
      if (layout[p] == 0) {
        design(r, w++) = v;
      } else {
        for (int32_t c = 1; c < layout[p]; ++c)
          design(r, w + static_cast<std::size_t>(c - 1)) =
              static_cast<int32_t>(v) == c ? 1.0 : 0.0;
        w += static_cast<std::size_t>(layout[p] - 1);
      }
    }
  }
  Eigen::VectorXd y(m);
  for (std::size_t r = 0; r < m; ++r) y(r) = table.real(node, r);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::VectorXd beta;
  if (qr.rank() < design.cols()) {
    warn("collinear parents for node '" + dag.node(node).name +
         "'; solving with a small ridge penalty");
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += options.ridge;
    beta = gram.ldlt().solve(design.transpose() * y);
  } else {
    beta = qr.solve(y);
  }
  const double rss = (y - design * beta).squaredNorm();
  const double denom = static_cast<double>(m) - static_cast<double>(width) - 1.0;
  if (denom < 1.0) throw InsufficientData("no residual degrees of freedom");
  const double noise = std::max(rss / denom, options.variance_floor);

  std::vector<double> weights(width);
  for (std::size_t w = 0; w < width; ++w) weights[w] = beta(static_cast<Eigen::Index>(w + 1));
  return std::make_shared<LinearGaussianConditional>(std::move(layout), std::move(weights),
                                                     beta(0), noise);
}

MechanismPtr fit_discrete_cpt(const Table& table, const Dag& dag, std::size_t node,
                              const FitOptions& options) {
  const auto& parents = dag.parents(node);
  ParentLayout layout = layout_for(dag, node);
  for (int32_t card : layout)
    if (card == 0)
      throw IncompatibleFamily("cpt for '" + dag.node(node).name +
                               "' needs categorical parents only");
  const auto n_cat = static_cast<std::size_t>(dag.node(node).categories.size());
  std::size_t n_configs = 1;
  for (int32_t card : layout) {
    n_configs *= static_cast<std::size_t>(card);
    if (n_configs > 1u << 20)
      throw InvalidArgument("parent configuration grid too large for a cpt");
  }

  std::vector<double> counts(n_configs * n_cat, 0.0);
  std::vector<double> marginal(n_cat, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::size_t idx = 0;
    for (std::size_t p = 0; p < parents.size(); ++p)
      idx = idx * static_cast<std::size_t>(layout[p]) +
            static_cast<std::size_t>(table.code(parents[p], r));
    const auto c = static_cast<std::size_t>(table.code(node, r));
    counts[idx * n_cat + c] += 1.0;
    marginal[c] += 1.0;
  }

  const double alpha = options.cpt_alpha;
  std::vector<double> probs(n_configs * n_cat, 0.0);
  std::vector<uint8_t> seen(n_configs, 0);
  std::vector<double> fallback(n_cat);
  {
    KahanSum total;
    for (double c : marginal) total.add(c + alpha);
    for (std::size_t c = 0; c < n_cat; ++c) fallback[c] = (marginal[c] + alpha) / total.value();
  }
  for (std::size_t g = 0; g < n_configs; ++g) {
    KahanSum total;
    for (std::size_t c = 0; c < n_cat; ++c) total.add(counts[g * n_cat + c]);
    const double tot = total.value();
    seen[g] = tot > 0.0 ? 1 : 0;
    if (tot == 0.0 && alpha == 0.0) {
      for (std::size_t c = 0; c < n_cat; ++c) probs[g * n_cat + c] = fallback[c];
      continue;
    }
    const double denom = tot + alpha * static_cast<double>(n_cat);
    KahanSum norm;
    for (std::size_t c = 0; c < n_cat; ++c) norm.add((counts[g * n_cat + c] + alpha) / denom);
    for (std::size_t c = 0; c < n_cat; ++c)
      probs[g * n_cat + c] = (counts[g * n_cat + c] + alpha) / denom / norm.value();
  }
  return std::make_shared<DiscreteCpt>(std::move(layout), static_cast<int32_t>(n_cat),
                                       std::move(probs), std::move(seen), std::move(fallback),
                                       alpha);
}

MechanismPtr fit_nearest_neighbor(const Table& table, const Dag& dag, std::size_t node,
                                  const FitOptions& options) {
  const auto& parents = dag.parents(node);
  ParentLayout layout = layout_for(dag, node);
  const std::size_t m = table.rows();
  const auto k = static_cast<std::size_t>(options.knn_k);
  if (m < k + 1) throw InsufficientData("too few rows for the neighbor count");
  const std::size_t width = onehot_width(layout);

  std::vector<double> design(m * width, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t w = 0;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      const double v = table.real(parents[p], r);
      if (layout[p] == 0) {
        design[r * width + w++] = v;
      } else {
        design[r * width + w + static_cast<std::size_t>(table.code(parents[p], r))] = 1.0;
        w += static_cast<std::size_t>(layout[p]);
      }
    }
  }
  std::vector<double> child(m);
  for (std::size_t r = 0; r < m; ++r) child[r] = table.real(node, r);

  const bool categorical = dag.node(node).kind == NodeKind::Categorical;
  std::vector<double> residuals;
  if (!categorical) {
    // Leave-one-out residuals; the pool is what sampling draws noise from.
    residuals.resize(m);
    std::vector<double> dist(k);
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t filled = 0, worst = 0;
      const double* q = design.data() + i * width;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) continue;
        const double* row = design.data() + j * width;
        double d = 0.0;
        for (std::size_t f = 0; f < width; ++f) {
          const double diff = row[f] - q[f];
          d += diff * diff;
        }
        if (filled < k) {
          dist[filled] = d;
          idx[filled] = j;
          ++filled;
          if (filled == k) {
            worst = 0;
            for (std::size_t u = 1; u < k; ++u)
              if (dist[u] > dist[worst] || (dist[u] == dist[worst] && idx[u] > idx[worst]))
                worst = u;
          }
          continue;
        }
        if (d < dist[worst]) {
          dist[worst] = d;
          idx[worst] = j;
          worst = 0;
          for (std::size_t u = 1; u < k; ++u)
            if (dist[u] > dist[worst] || (dist[u] == dist[worst] && idx[u] > idx[worst]))
              worst = u;
        }
      }
      KahanSum s;
      for (std::size_t u = 0; u < filled; ++u) s.add(child[idx[u]]);
      residuals[i] = child[i] - s.value() / static_cast<double>(filled);
    }
  }
  const auto n_cat = categorical ? static_cast<int32_t>(dag.node(node).categories.size()) : 0;
  return std::make_shared<NearestNeighborConditional>(
      std::move(layout), std::move(design), m, width, std::move(child),
      static_cast<int>(k), categorical, n_cat, std::move(residuals));
}

}  // namespace

MechanismPtr fit_mechanism(const Table& table, const Dag& dag, std::size_t node,
                           Family family, const FitOptions& options) {
  if (!table.schema_matches(dag.nodes()))
    throw SchemaMismatch("table schema does not match the graph");
  if (node >= dag.size()) throw UnknownNode("node index out of range");
  if (table.rows() < 2) throw InsufficientData("need at least two rows");

  const bool categorical = dag.node(node).kind == NodeKind::Categorical;
  const bool root = dag.is_root(node);
  switch (family) {
    case Family::GaussianMarginal:
      if (categorical) throw IncompatibleFamily("gaussian marginal needs a continuous node");
      if (!root) throw IncompatibleFamily("gaussian marginal fits root nodes only");
      return fit_gaussian_marginal(table, node, options);
    case Family::EmpiricalCategoricalMarginal:
      if (!categorical)
        throw IncompatibleFamily("empirical marginal needs a categorical node");
      if (!root) throw IncompatibleFamily("empirical marginal fits root nodes only");
      return fit_empirical_marginal(table, dag, node);
    case Family::LinearGaussianConditional:
      if (categorical) throw IncompatibleFamily("linear mechanism needs a continuous node");
      if (root) throw IncompatibleFamily("linear mechanism needs parents");
      return fit_linear_gaussian(table, dag, node, options);
    case Family::DiscreteCpt:
      if (!categorical) throw IncompatibleFamily("cpt needs a categorical node");
      return fit_discrete_cpt(table, dag, node, options);
    case Family::NearestNeighborConditional:
      if (root) throw IncompatibleFamily("nearest-neighbor mechanism needs parents");
      if (categorical)
        for (std::size_t p : dag.parents(node))
          if (dag.node(p).kind == NodeKind::Continuous)
            throw IncompatibleFamily(
                "continuous parents of categorical children are not supported");
      return fit_nearest_neighbor(table, dag, node, options);
  }
  throw IncompatibleFamily("unknown mechanism family");
}

}  // namespace causalattr
