#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "causalattr/rng.hpp"
#include "causalattr/tabular.hpp"

namespace causalattr {

enum class Family {
  GaussianMarginal,
  EmpiricalCategoricalMarginal,
  LinearGaussianConditional,
  DiscreteCpt,
  NearestNeighborConditional,
};

std::string family_name(Family f);

// Parent layout a conditional mechanism is bound to: one entry per parent,
// in parent declaration order; 0 for a continuous parent, category count
// for a categorical one.
using ParentLayout = std::vector<int32_t>;

// A fitted causal mechanism: sampler plus (where the family admits one)
// conditional density for a single node given its parents. Immutable after
// construction; sampling takes a caller-owned rng so concurrent use with
// independent streams is safe.
class Mechanism {
 public:
  virtual ~Mechanism() = default;
  virtual Family family() const = 0;
  virtual const ParentLayout& parent_layout() const = 0;
  std::size_t parent_count() const { return parent_layout().size(); }
  virtual bool categorical_child() const = 0;

  // Parent values use the table encoding: raw reals for continuous parents,
  // category codes cast to double for categorical ones.
  virtual double sample_one(std::span<const double> parent_values, Rng& rng) const = 0;

  // log density (continuous child) or log pmf (categorical child).
  // Families without a closed form throw UnsupportedFamily.
  virtual double log_density(double value, std::span<const double> parent_values) const = 0;
  virtual bool has_log_density() const { return true; }
};

using MechanismPtr = std::shared_ptr<const Mechanism>;

class GaussianMarginal final : public Mechanism {
 public:
  GaussianMarginal(double mean, double variance);

  double mean() const { return mean_; }
  double variance() const { return variance_; }

  Family family() const override { return Family::GaussianMarginal; }
  const ParentLayout& parent_layout() const override { return layout_; }
  bool categorical_child() const override { return false; }
  double sample_one(std::span<const double> parent_values, Rng& rng) const override;
  double log_density(double value, std::span<const double> parent_values) const override;

 private:
  double mean_;
  double variance_;
  ParentLayout layout_;
};

class EmpiricalCategoricalMarginal final : public Mechanism {
 public:
  explicit EmpiricalCategoricalMarginal(std::vector<double> probs);

  const std::vector<double>& probs() const { return probs_; }

  Family family() const override { return Family::EmpiricalCategoricalMarginal; }
  const ParentLayout& parent_layout() const override { return layout_; }
  bool categorical_child() const override { return true; }
  double sample_one(std::span<const double> parent_values, Rng& rng) const override;
  double log_density(double value, std::span<const double> parent_values) const override;

 private:
  std::vector<double> probs_;
  ParentLayout layout_;
};

// Child = intercept + weights . encode(parents) + N(0, noise_variance).
// Continuous parents contribute one design column each; a categorical parent
// with c categories contributes c-1 dummy columns (first category is the
// reference level), laid out parent by parent.
class LinearGaussianConditional final : public Mechanism {
 public:
  LinearGaussianConditional(ParentLayout layout, std::vector<double> weights,
                            double intercept, double noise_variance);

  const std::vector<double>& weights() const { return weights_; }
  double intercept() const { return intercept_; }
  double noise_variance() const { return noise_variance_; }
  double conditional_mean(std::span<const double> parent_values) const;

  Family family() const override { return Family::LinearGaussianConditional; }
  const ParentLayout& parent_layout() const override { return layout_; }
  bool categorical_child() const override { return false; }
  double sample_one(std::span<const double> parent_values, Rng& rng) const override;
  double log_density(double value, std::span<const double> parent_values) const override;

 private:
  ParentLayout layout_;
  std::vector<double> weights_;
  double intercept_;
  double noise_variance_;
};

// Conditional pmf table over the full parent-configuration grid, addressed
// by mixed-radix index (first parent varies slowest). Rows are smoothed
// with pseudo-count alpha at fit time. Sampling a configuration that had no
// training rows falls back to the child's marginal, with a warning.
class DiscreteCpt final : public Mechanism {
 public:
  DiscreteCpt(ParentLayout layout, int32_t n_categories, std::vector<double> probs,
              std::vector<uint8_t> config_seen, std::vector<double> fallback,
              double alpha);

  int32_t n_categories() const { return n_categories_; }
  std::size_t n_configs() const { return config_seen_.size(); }
  double alpha() const { return alpha_; }
  std::size_t config_index(std::span<const double> parent_values) const;
  std::span<const double> row(std::size_t config) const;
  bool config_was_seen(std::size_t config) const { return config_seen_[config] != 0; }
  const std::vector<double>& fallback() const { return fallback_; }

  Family family() const override { return Family::DiscreteCpt; }
  const ParentLayout& parent_layout() const override { return layout_; }
  bool categorical_child() const override { return true; }
  double sample_one(std::span<const double> parent_values, Rng& rng) const override;
  double log_density(double value, std::span<const double> parent_values) const override;

 private:
  ParentLayout layout_;
  int32_t n_categories_;
  std::vector<double> probs_;  // n_configs x n_categories, row-major
  std::vector<uint8_t> config_seen_;
  std::vector<double> fallback_;
  double alpha_;
  mutable std::atomic<bool> warned_{false};
};

// k-nearest-neighbor conditional. Parents are encoded with full one-hot
// columns for categorical parents so Euclidean distance treats categories
// symmetrically. Continuous child: prediction is the mean child value of
// the k nearest training rows and a draw adds a leave-one-out residual
// resampled from the training fit. Categorical child: a draw follows the
// class frequencies among the k nearest rows. No closed-form density.
class NearestNeighborConditional final : public Mechanism {
 public:
  NearestNeighborConditional(ParentLayout layout, std::vector<double> design,
                             std::size_t n_rows, std::size_t n_features,
                             std::vector<double> child, int k,
                             bool categorical_child, int32_t n_categories,
                             std::vector<double> residual_pool);

  int k() const { return k_; }
  std::size_t rows() const { return n_rows_; }
  double predict(std::span<const double> parent_values) const;
  const std::vector<double>& residual_pool() const { return residual_pool_; }

  Family family() const override { return Family::NearestNeighborConditional; }
  const ParentLayout& parent_layout() const override { return layout_; }
  bool categorical_child() const override { return categorical_child_; }
  double sample_one(std::span<const double> parent_values, Rng& rng) const override;
  double log_density(double value, std::span<const double> parent_values) const override;
  bool has_log_density() const override { return false; }

 private:
  void encode(std::span<const double> parent_values, std::vector<double>& out) const;
  void nearest(std::span<const double> query, std::vector<std::size_t>& out) const;

  ParentLayout layout_;
  std::vector<double> design_;  // n_rows x n_features, row-major
  std::size_t n_rows_;
  std::size_t n_features_;
  std::vector<double> child_;
  int k_;
  bool categorical_child_;
  int32_t n_categories_;
  std::vector<double> residual_pool_;
};

struct FitOptions {
  double cpt_alpha = 1.0;
  int knn_k = 10;
  double variance_floor = 1e-9;
  double ridge = 1e-8;
};

// Least-squares / maximum-likelihood fit of the requested family for one
// node, using the table columns named by the dag. Throws IncompatibleFamily
// when the family cannot model the node's kind or parent kinds, and
// InsufficientData when the table is too small for the family.
MechanismPtr fit_mechanism(const Table& table, const Dag& dag, std::size_t node,
                           Family family, const FitOptions& options = {});

}  // namespace causalattr
