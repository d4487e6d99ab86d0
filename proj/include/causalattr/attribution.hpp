#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "causalattr/detect.hpp"
#include "causalattr/divergence.hpp"
#include "causalattr/engine.hpp"
#include "causalattr/graph.hpp"
#include "causalattr/mechanisms.hpp"
#include "causalattr/tabular.hpp"

namespace causalattr {

// Summary statistic of a single marginal whose change gets attributed.
struct Functional {
  enum class Kind { Mean, Variance, Median, Quantile, KlToOld };

  Kind kind = Kind::Mean;
  double level = 0.5;  // quantile level, used only for Kind::Quantile

  static Functional mean() { return {Kind::Mean, 0.5}; }
  static Functional variance() { return {Kind::Variance, 0.5}; }
  static Functional median() { return {Kind::Median, 0.5}; }
  static Functional quantile(double level);
  static Functional kl_to_old() { return {Kind::KlToOld, 0.5}; }

  // Canonical spelling, e.g. "mean", "quantile:0.9", "kl". Round-trips
  // through parse_functional.
  std::string name() const;
};

Functional parse_functional(const std::string& text);

// Plug-in estimate of a functional on a sample column. Kind::KlToOld is a
// two-sample quantity and is rejected here; it is only available through the
// attribution entry points.
double estimate_functional(std::span<const double> column, const Functional& f);

enum class ShapleyMode { Exact, Sampled };

struct AttributionConfig {
  // Which nodes participate. With gating on, a change detection pass picks
  // the players; unflagged nodes get pooled-fit mechanisms in every
  // coalition and a contribution pinned at zero.
  bool gating = true;
  DetectOptions detect;

  // Mechanism families per node kind. Roots always get the matching
  // marginal family.
  Family continuous_family = Family::LinearGaussianConditional;
  Family categorical_family = Family::DiscreteCpt;
  FitOptions fit;

  ShapleyMode shapley = ShapleyMode::Exact;
  std::size_t shapley_permutations = 2000;
  std::size_t exact_cap = 12;  // Exact above this falls back to Sampled

  // Monte Carlo settings for marginal functionals with no closed path.
  std::size_t n_draws = 100000;
  int kl_knn_k = 5;
  bool force_sampling = false;  // bypass analytic routes, for testing

  // Joint-mode divergence direction and estimation knobs.
  bool reverse_kl = false;
  int divergence_knn_k = 5;
  std::size_t divergence_max_rows = 200;
  std::size_t divergence_draws_per_row = 400;

  // Bootstrap CIs over rows of both tables; 0 disables, otherwise >= 50.
  std::size_t bootstrap_resamples = 0;
  double bootstrap_level = 0.95;

  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct NodeAttribution {
  std::string name;
  double phi = 0.0;
  bool gated = false;
  std::string mechanism_family;

  double p_value = 0.0;
  bool has_p_value = false;

  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool has_ci = false;

  // Sampled Shapley only: raw (pre-normalization) value and its SE.
  double raw_phi = 0.0;
  double std_error = 0.0;
  bool has_std_error = false;
};

// Free-form run description embedded in serialized reports. Deliberately
// excludes worker counts and timestamps so identical inputs give identical
// bytes.
struct Provenance {
  std::uint64_t seed = 0;
  bool gating = true;
  double alpha = 0.05;
  std::size_t detect_permutations = 0;
  std::string shapley_method;  // "exact" | "sampled" | "" when unused
  std::size_t shapley_permutations = 0;
  std::size_t n_draws = 0;
  std::string evaluation_path;  // "closed_form" | "enumeration" | "monte_carlo"
  std::string divergence_direction;  // joint mode: "new_vs_old" | "old_vs_new"
  std::size_t bootstrap_resamples = 0;
  double bootstrap_level = 0.95;
  std::size_t rows_old = 0;
  std::size_t rows_new = 0;
};

struct AttributionReport {
  std::string mode;        // "joint" | "marginal"
  std::string target;      // node name, empty in joint mode
  std::string functional;  // Functional::name(), empty in joint mode
  double total = 0.0;      // joint: sum of contributions; marginal: delta psi
  double raw_data_total = 0.0;  // marginal: plug-in delta psi on raw columns
  bool has_raw_data_total = false;
  double efficiency_residual = 0.0;  // sampled Shapley, before normalization
  std::vector<NodeAttribution> nodes;
  Provenance provenance;
};

// Per-node additive contributions to the divergence between the two joint
// distributions, fitted from data. Contributions of flagged nodes sum to the
// divergence between the fitted alternative and baseline joints.
AttributionReport attribute_joint(const Table& old_table, const Table& new_table,
                                  const Dag& dag, const AttributionConfig& config = {});

// Shapley attribution of the change in functional(target marginal) to
// per-node mechanism switches, fitted from data.
AttributionReport attribute_marginal(const Table& old_table, const Table& new_table,
                                     const Dag& dag, std::size_t target,
                                     const Functional& f,
                                     const AttributionConfig& config = {});

// Same game played on externally supplied mechanisms: no fitting, no
// detection, every node a player. Bootstrap settings are ignored (there is
// nothing to resample).
AttributionReport attribute_marginal_models(const Scm& old_scm, const Scm& new_scm,
                                            std::size_t target, const Functional& f,
                                            const AttributionConfig& config = {});

// Exact per-node conditional divergences for fully categorical, enumerable
// SCM pairs over the same DAG, weighted by the new model's parent marginals.
// Sums to the divergence between the enumerated joints.
std::vector<double> exact_conditional_kl_contributions(const Scm& old_scm,
                                                       const Scm& new_scm);

// Bias-corrected accelerated interval from bootstrap resamples of a scalar
// statistic. Falls back to the percentile interval when every resample lands
// on one side of the point estimate, and collapses to [point, point] when the
// resamples are all identical.
struct BcaInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool percentile_fallback = false;
};

BcaInterval bca_interval(std::span<const double> resamples, double point_estimate,
                         double level, std::span<const double> jackknife_values);

}  // namespace causalattr
