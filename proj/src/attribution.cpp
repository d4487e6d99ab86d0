#include "causalattr/attribution.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <utility>

#include "causalattr/errors.hpp"
#include "causalattr/parallel.hpp"
#include "causalattr/rng.hpp"
#include "causalattr/shapley.hpp"
#include "causalattr/stats.hpp"
#include "causalattr/warnings.hpp"

namespace causalattr {

Functional Functional::quantile(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidArgument("quantile level must lie in (0, 1)");
  return {Kind::Quantile, level};
}

std::string Functional::name() const {
  switch (kind) {
    case Kind::Mean:
      return "mean";
    case Kind::Variance:
      return "variance";
    case Kind::Median:
      return "median";
    case Kind::KlToOld:
      return "kl";
    case Kind::Quantile:
      break;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, level);
  return "quantile:" + std::string(buf, res.ptr);
}

Functional parse_functional(const std::string& text) {
  if (text == "mean") return Functional::mean();
  if (text == "variance") return Functional::variance();
  if (text == "median") return Functional::median();
  if (text == "kl") return Functional::kl_to_old();
  const std::string prefix = "quantile:";
  if (text.compare(0, prefix.size(), prefix) == 0) {
    double level = 0.0;
    const char* first = text.c_str() + prefix.size();
    const char* last = text.c_str() + text.size();
    const auto res = std::from_chars(first, last, level);
    if (res.ec != std::errc() || res.ptr != last)
      throw InvalidArgument("bad quantile level in '" + text + "'");
    return Functional::quantile(level);
  }
  throw InvalidArgument("unknown functional '" + text + "'");
}

double estimate_functional(std::span<const double> column, const Functional& f) {
  if (column.empty()) throw EmptySample("functional of an empty column");
  switch (f.kind) {
    case Functional::Kind::Mean:
      return mean(column);
    case Functional::Kind::Variance:
      return sample_variance(column);
    case Functional::Kind::Median:
      return quantile(column, 0.5);
    case Functional::Kind::Quantile:
      return quantile(column, f.level);
    case Functional::Kind::KlToOld:
      break;
  }
  throw InvalidArgument("kl compares two marginals; it has no single-column estimate");
}

namespace {

constexpr std::uint64_t kDetectSalt = 0x11;
constexpr std::uint64_t kShapleySalt = 0x22;
constexpr std::uint64_t kDrawSalt = 0x33;
constexpr std::uint64_t kBaselineSalt = 0x44;
constexpr std::uint64_t kDivergenceSalt = 0x55;
constexpr std::uint64_t kResampleSalt = 0x66;

// Brute-force k-NN KL is quadratic in the sample size; columns are thinned
// to this many points before estimation.
constexpr std::size_t kKlSampleCap = 5000;

void validate_config(const AttributionConfig& cfg) {
  if (cfg.bootstrap_resamples != 0 && cfg.bootstrap_resamples < 50)
    throw InvalidArgument("bootstrap needs at least 50 resamples");
  if (!(cfg.bootstrap_level > 0.0 && cfg.bootstrap_level < 1.0))
    throw InvalidArgument("bootstrap level must lie in (0, 1)");
  if (cfg.n_draws < 2) throw InvalidArgument("need at least two draws per coalition");
  if (cfg.exact_cap < 1 || cfg.exact_cap > 62)
    throw InvalidArgument("exact coalition cap must lie in [1, 62]");
  if (cfg.shapley == ShapleyMode::Sampled && cfg.shapley_permutations < 2)
    throw InvalidArgument("sampled shapley needs at least two permutations");
  if (cfg.kl_knn_k < 1 || cfg.divergence_knn_k < 1)
    throw InvalidArgument("neighbor count must be >= 1");
}

void validate_tables(const Table& old_table, const Table& new_table, const Dag& dag) {
  if (!old_table.schema_matches(dag.nodes()) || !new_table.schema_matches(dag.nodes()))
    throw SchemaMismatch("table schema does not match the graph");
  if (old_table.rows() == 0 || new_table.rows() == 0) throw EmptyTable("empty sample");
}

Family family_for(const Dag& dag, std::size_t j, const AttributionConfig& cfg) {
  const bool categorical = dag.node(j).kind == NodeKind::Categorical;
  if (dag.is_root(j))
    return categorical ? Family::EmpiricalCategoricalMarginal : Family::GaussianMarginal;
  return categorical ? cfg.categorical_family : cfg.continuous_family;
}

struct FittedModels {
  Scm base;
  Scm alt;
  std::vector<std::uint8_t> player;
  std::vector<double> p_value;
  bool detection_ran = false;
};

// Fits the per-coalition models: players get separate old/new fits, gated
// nodes one pooled fit shared by both sides (so their swap is a no-op).
FittedModels fit_models(const Table& old_table, const Table& new_table, const Dag& dag,
                        const AttributionConfig& cfg,
                        const std::vector<std::uint8_t>* fixed_players) {
  const std::size_t n = dag.size();
  FittedModels out;
  out.player.assign(n, 1);
  out.p_value.assign(n, 1.0);
  if (fixed_players != nullptr) {
    out.player = *fixed_players;
  } else if (cfg.gating) {
    DetectOptions d = cfg.detect;
    d.seed = mix_key(cfg.seed, kDetectSalt);
    d.workers = cfg.workers;
    const DetectionResult det = detect_changes(old_table, new_table, dag, d);
    for (std::size_t j = 0; j < n; ++j) {
      out.player[j] = det.nodes[j].changed ? 1 : 0;
      out.p_value[j] = det.nodes[j].p_value;
    }
    out.detection_ran = true;
  }

  std::vector<MechanismPtr> base(n);
  std::vector<MechanismPtr> alt(n);
  std::optional<Table> pooled;
  for (std::size_t j = 0; j < n; ++j) {
    const Family fam = family_for(dag, j, cfg);
    if (out.player[j] != 0) {
      base[j] = fit_mechanism(old_table, dag, j, fam, cfg.fit);
      alt[j] = fit_mechanism(new_table, dag, j, fam, cfg.fit);
    } else {
      if (!pooled) pooled.emplace(pool(old_table, new_table));
      base[j] = fit_mechanism(*pooled, dag, j, fam, cfg.fit);
      alt[j] = base[j];
    }
  }
  out.base = make_scm(dag, std::move(base));
  out.alt = make_scm(dag, std::move(alt));
  return out;
}

bool enumerable_whole_joint(const Scm& scm, std::size_t max_cells) {
  std::size_t cells = 1;
  for (std::size_t j = 0; j < scm.dag.size(); ++j) {
    if (scm.dag.node(j).kind != NodeKind::Categorical) return false;
    const Family fam = scm.mechanisms[j]->family();
    if (fam != Family::EmpiricalCategoricalMarginal && fam != Family::DiscreteCpt)
      return false;
    cells *= scm.dag.node(j).categories.size();
    if (cells > max_cells) return false;
  }
  return true;
}

std::span<const double> pmf_row(const Mechanism& mech, std::size_t config) {
  if (mech.family() == Family::EmpiricalCategoricalMarginal)
    return static_cast<const EmpiricalCategoricalMarginal&>(mech).probs();
  return static_cast<const DiscreteCpt&>(mech).row(config);
}

// Per-node share of D(p_model || q_model) over the enumerated joint: the
// node's conditional divergence at each parent configuration, weighted by
// the configuration's probability under p_model. Zero-probability
// configurations are skipped (they contribute nothing, and q_model may be
// undefined there).
std::vector<double> enumerated_contributions(const Scm& p_model, const Scm& q_model,
                                             const std::vector<std::uint8_t>* player) {
  const Dag& dag = p_model.dag;
  const DiscreteJoint joint = enumerate_discrete_joint(p_model);
  std::vector<double> out(dag.size(), 0.0);
  for (std::size_t j = 0; j < dag.size(); ++j) {
    if (player != nullptr && (*player)[j] == 0) continue;
    const std::vector<double> weights = marginalize(joint, dag.parents(j));
    KahanSum acc;
    for (std::size_t g = 0; g < weights.size(); ++g) {
      if (weights[g] == 0.0) continue;
      acc.add(weights[g] * kl_discrete(pmf_row(*p_model.mechanisms[j], g),
                                       pmf_row(*q_model.mechanisms[j], g))
                               .value);
    }
    out[j] = acc.value();
  }
  return out;
}

std::vector<double> row_weighted_contributions(const FittedModels& fm,
                                               const Table& weight_table,
                                               const AttributionConfig& cfg) {
  const Dag& dag = fm.base.dag;
  std::vector<double> out(dag.size(), 0.0);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < dag.size(); ++j)
    if (fm.player[j] != 0) active.push_back(j);
  parallel_for_indexed(active.size(), cfg.workers, [&](std::size_t i) {
    const std::size_t j = active[i];
    const auto& parents = dag.parents(j);
    std::vector<std::vector<double>> rows(weight_table.rows());
    for (std::size_t r = 0; r < weight_table.rows(); ++r) {
      rows[r].reserve(parents.size());
      for (std::size_t p : parents) rows[r].push_back(weight_table.real(p, r));
    }
    ConditionalKlOptions opt;
    opt.knn_k = cfg.divergence_knn_k;
    opt.max_rows = cfg.divergence_max_rows;
    opt.draws_per_row = cfg.divergence_draws_per_row;
    opt.seed = mix_key(cfg.seed, kDivergenceSalt, j);
    opt.reverse = cfg.reverse_kl;
    out[j] =
        conditional_kl(*fm.alt.mechanisms[j], *fm.base.mechanisms[j], rows, opt).clipped();
  });
  return out;
}

struct JointContributions {
  std::vector<double> phi;
  std::string path;
};

JointContributions joint_contributions(const FittedModels& fm, const Table& old_table,
                                       const Table& new_table,
                                       const AttributionConfig& cfg) {
  if (!cfg.force_sampling && enumerable_whole_joint(fm.base, kMaxEnumerationCells) &&
      enumerable_whole_joint(fm.alt, kMaxEnumerationCells)) {
    const Scm& p = cfg.reverse_kl ? fm.base : fm.alt;
    const Scm& q = cfg.reverse_kl ? fm.alt : fm.base;
    return {enumerated_contributions(p, q, &fm.player), "enumeration"};
  }
  const Table& weight_table = cfg.reverse_kl ? old_table : new_table;
  return {row_weighted_contributions(fm, weight_table, cfg), "data_rows"};
}

std::vector<double> smoothed_pmf(std::span<const double> codes, std::size_t n_categories) {
  std::vector<double> p(n_categories, 0.0);
  for (double c : codes) p[static_cast<std::size_t>(c)] += 1.0;
  const double denom =
      static_cast<double>(codes.size()) + 0.5 * static_cast<double>(n_categories);
  for (auto& x : p) x = (x + 0.5) / denom;
  return p;
}

std::vector<double> stride_thin(std::span<const double> xs, std::size_t cap) {
  if (xs.size() <= cap) return {xs.begin(), xs.end()};
  std::vector<double> out;
  out.reserve(cap);
  const double step = static_cast<double>(xs.size()) / static_cast<double>(cap);
  for (std::size_t i = 0; i < cap; ++i)
    out.push_back(xs[static_cast<std::size_t>(static_cast<double>(i) * step)]);
  return out;
}

// psi(P^T) for coalitions over the player nodes. Routes to the closed
// Gaussian form or exact enumeration when every hybrid admits one, else to
// ancestral sampling with a coalition-independent seed (common random
// numbers, so coalition differences stay low-variance).
class CoalitionPsi {
 public:
  enum class Path { ClosedForm, Enumeration, MonteCarlo };

  CoalitionPsi(const Scm& base, const Scm& alt, std::vector<std::size_t> players,
               std::size_t target, const Functional& f, const AttributionConfig& cfg)
      : base_(base),
        alt_(alt),
        players_(std::move(players)),
        target_(target),
        f_(f),
        knn_k_(cfg.kl_knn_k),
        draw_seed_(mix_key(cfg.seed, kDrawSalt)) {
    n_draws_ = f_.kind == Functional::Kind::KlToOld ? std::min(cfg.n_draws, kKlSampleCap)
                                                    : cfg.n_draws;
    if (!cfg.force_sampling && is_linear_gaussian_closure(base_, target_) &&
        is_linear_gaussian_closure(alt_, target_)) {
      path_ = Path::ClosedForm;
      base_moments_ = analytic_marginal_gaussian(base_, target_);
      return;
    }
    if (!cfg.force_sampling && is_enumerable_discrete(base_, target_) &&
        is_enumerable_discrete(alt_, target_)) {
      path_ = Path::Enumeration;
      base_pmf_ = enumerate_discrete_marginal(base_, target_);
      return;
    }
    path_ = Path::MonteCarlo;
    if (f_.kind == Functional::Kind::KlToOld) {
      const Table t = ancestral_sample(base_, n_draws_, mix_key(cfg.seed, kBaselineSalt));
      baseline_ = t.column(target_);
      if (categorical_target()) baseline_pmf_ = smoothed_pmf(baseline_, cardinality());
    }
  }

  Path path() const { return path_; }
  const char* path_name() const {
    switch (path_) {
      case Path::ClosedForm:
        return "closed_form";
      case Path::Enumeration:
        return "enumeration";
      case Path::MonteCarlo:
        return "monte_carlo";
    }
    return "";
  }

  double operator()(std::uint64_t mask) const {
    ChangeSet t = ChangeSet::none(base_.dag.size());
    for (std::size_t i = 0; i < players_.size(); ++i)
      if ((mask >> i) & 1u) t.add(players_[i]);
    const Scm hybrid = compose_hybrid(base_, alt_, t);
    switch (path_) {
      case Path::ClosedForm: {
        const GaussianMoments m = analytic_marginal_gaussian(hybrid, target_);
        switch (f_.kind) {
          case Functional::Kind::Mean:
          case Functional::Kind::Median:
            return m.mean;
          case Functional::Kind::Variance:
            return m.variance;
          case Functional::Kind::Quantile:
            return m.mean + normal_quantile(f_.level) * std::sqrt(m.variance);
          case Functional::Kind::KlToOld:
            return kl_gaussian(m.mean, m.variance, base_moments_.mean,
                               base_moments_.variance)
                .value;
        }
        break;
      }
      case Path::Enumeration: {
        // Only mean and kl reach here: an enumerable target is categorical,
        // which rules out the order-statistic functionals upstream.
        const std::vector<double> pmf = enumerate_discrete_marginal(hybrid, target_);
        if (f_.kind == Functional::Kind::KlToOld)
          return kl_discrete(pmf, base_pmf_).value;
        KahanSum m;
        for (std::size_t c = 0; c < pmf.size(); ++c)
          m.add(pmf[c] * static_cast<double>(c));
        return m.value();
      }
      case Path::MonteCarlo: {
        const Table s = ancestral_sample(hybrid, n_draws_, draw_seed_);
        const std::vector<double>& col = s.column(target_);
        if (f_.kind != Functional::Kind::KlToOld) return estimate_functional(col, f_);
        if (categorical_target())
          return kl_discrete(smoothed_pmf(col, cardinality()), baseline_pmf_).value;
        return kl_knn(col, baseline_, 1, knn_k_).value;
      }
    }
    throw InvalidArgument("unhandled functional kind");
  }

 private:
  bool categorical_target() const {
    return base_.dag.node(target_).kind == NodeKind::Categorical;
  }
  std::size_t cardinality() const { return base_.dag.node(target_).categories.size(); }

  const Scm& base_;
  const Scm& alt_;
  std::vector<std::size_t> players_;
  std::size_t target_;
  Functional f_;
  std::size_t n_draws_;
  int knn_k_;
  std::uint64_t draw_seed_;
  Path path_ = Path::MonteCarlo;
  GaussianMoments base_moments_;
  std::vector<double> base_pmf_;
  std::vector<double> baseline_;
  std::vector<double> baseline_pmf_;
};

struct MarginalRun {
  std::vector<double> phi;
  double total = 0.0;
  std::string path;
  std::vector<std::size_t> players;
  ShapleyResult shapley;
  bool has_shapley = false;
};

MarginalRun run_marginal(const FittedModels& fm, std::size_t target, const Functional& f,
                         const AttributionConfig& cfg) {
  MarginalRun out;
  out.phi.assign(fm.base.dag.size(), 0.0);
  for (std::size_t j = 0; j < fm.player.size(); ++j)
    if (fm.player[j] != 0) out.players.push_back(j);

  const CoalitionPsi psi(fm.base, fm.alt, out.players, target, f, cfg);
  out.path = psi.path_name();
  if (out.players.empty()) return out;  // nothing changed, nothing to split

  const SetFunction nu(out.players.size(),
                       [&psi](std::uint64_t mask) { return psi(mask); });
  ShapleyOptions so;
  so.exact_cap = cfg.exact_cap;
  so.workers = cfg.workers;
  const bool use_exact =
      cfg.shapley == ShapleyMode::Exact && out.players.size() <= cfg.exact_cap;
  if (cfg.shapley == ShapleyMode::Exact && !use_exact)
    warn("player count exceeds the exact coalition cap; using sampled shapley");
  out.shapley = use_exact ? exact_shapley(nu, so)
                          : sampled_shapley(nu, cfg.shapley_permutations,
                                            mix_key(cfg.seed, kShapleySalt), so);
  out.has_shapley = true;
  for (std::size_t i = 0; i < out.players.size(); ++i)
    out.phi[out.players[i]] = out.shapley.values[i];
  const std::uint64_t full = (std::uint64_t{1} << out.players.size()) - 1;
  out.total = nu.value(full);
  return out;
}

void fill_nodes(AttributionReport& rep, const Dag& dag, const FittedModels& fm,
                const std::vector<double>& phi) {
  rep.nodes.resize(dag.size());
  for (std::size_t j = 0; j < dag.size(); ++j) {
    NodeAttribution& node = rep.nodes[j];
    node.name = dag.node(j).name;
    node.phi = phi[j];
    node.raw_phi = phi[j];
    node.gated = fm.player[j] == 0;
    node.mechanism_family = family_name(fm.alt.mechanisms[j]->family());
    if (fm.detection_ran) {
      node.p_value = fm.p_value[j];
      node.has_p_value = true;
    }
  }
}

void fill_common_provenance(AttributionReport& rep, const AttributionConfig& cfg,
                            const FittedModels& fm) {
  rep.provenance.seed = cfg.seed;
  rep.provenance.gating = cfg.gating;
  rep.provenance.alpha = cfg.detect.alpha;
  rep.provenance.detect_permutations = fm.detection_ran ? cfg.detect.n_permutations : 0;
  rep.provenance.bootstrap_resamples = cfg.bootstrap_resamples;
  rep.provenance.bootstrap_level = cfg.bootstrap_level;
}

void fill_shapley_fields(AttributionReport& rep, const MarginalRun& run) {
  if (!run.has_shapley) {
    rep.provenance.shapley_method = "";
    return;
  }
  const bool sampled = run.shapley.method == ShapleyResult::Method::PermutationSampled;
  rep.provenance.shapley_method = sampled ? "sampled" : "exact";
  rep.provenance.shapley_permutations = sampled ? run.shapley.n_permutations : 0;
  rep.efficiency_residual = sampled ? run.shapley.efficiency_residual : 0.0;
  if (!sampled) return;
  for (std::size_t i = 0; i < run.players.size(); ++i) {
    NodeAttribution& node = rep.nodes[run.players[i]];
    node.raw_phi = run.shapley.raw_values[i];
    node.std_error = run.shapley.std_errors[i];
    node.has_std_error = true;
  }
}

double raw_marginal_delta(const Table& old_table, const Table& new_table, const Dag& dag,
                          std::size_t target, const Functional& f,
                          const AttributionConfig& cfg) {
  const auto& oc = old_table.column(target);
  const auto& nc = new_table.column(target);
  if (f.kind != Functional::Kind::KlToOld)
    return estimate_functional(nc, f) - estimate_functional(oc, f);
  if (dag.node(target).kind == NodeKind::Categorical) {
    const std::size_t k = dag.node(target).categories.size();
    return kl_discrete(smoothed_pmf(nc, k), smoothed_pmf(oc, k)).value;
  }
  return kl_knn(stride_thin(nc, kKlSampleCap), stride_thin(oc, kKlSampleCap), 1,
                cfg.kl_knn_k)
      .value;
}

Table resample_rows(const Table& t, Rng& rng) {
  std::vector<std::size_t> idx(t.rows());
  for (auto& i : idx) i = rng.uniform_int(t.rows());
  return t.select_rows(idx);
}

Table drop_block(const Table& t, std::size_t g, std::size_t groups) {
  const std::size_t m = t.rows();
  const std::size_t lo = g * m / groups;
  const std::size_t hi = (g + 1) * m / groups;
  std::vector<std::size_t> idx;
  idx.reserve(m - (hi - lo));
  for (std::size_t r = 0; r < m; ++r)
    if (r < lo || r >= hi) idx.push_back(r);
  return t.select_rows(idx);
}

// Resamples both tables, refits, and recomputes phi per resample with the
// point run's player flags held fixed; the acceleration constant comes from
// a grouped (leave-one-block-out) jackknife to keep the rerun count modest.
void bootstrap_tables(AttributionReport& rep, const Table& old_table,
                      const Table& new_table, const Dag& dag,
                      const AttributionConfig& cfg, const FittedModels& fm,
                      bool joint_mode, std::size_t target, const Functional& f) {
  const std::size_t n_resamples = cfg.bootstrap_resamples;
  AttributionConfig inner = cfg;
  inner.bootstrap_resamples = 0;
  inner.workers = 1;
  const std::vector<std::uint8_t> flags = fm.player;

  const auto phi_for = [&](const Table& ot, const Table& nt) {
    const FittedModels models = fit_models(ot, nt, dag, inner, &flags);
    if (joint_mode) return joint_contributions(models, ot, nt, inner).phi;
    return run_marginal(models, target, f, inner).phi;
  };

  std::vector<std::vector<double>> resamples(n_resamples);
  parallel_for_indexed(n_resamples, cfg.workers, [&](std::size_t b) {
    Rng r_old = Rng::stream(cfg.seed, kResampleSalt, b, 1);
    Rng r_new = Rng::stream(cfg.seed, kResampleSalt, b, 2);
    resamples[b] = phi_for(resample_rows(old_table, r_old), resample_rows(new_table, r_new));
  });

  const std::size_t groups =
      std::min({std::size_t{20}, old_table.rows(), new_table.rows()});
  std::vector<std::vector<double>> jackknife(groups);
  parallel_for_indexed(groups, cfg.workers, [&](std::size_t g) {
    jackknife[g] = phi_for(drop_block(old_table, g, groups), drop_block(new_table, g, groups));
  });

  std::vector<double> column(n_resamples);
  std::vector<double> jcolumn(groups);
  for (std::size_t j = 0; j < dag.size(); ++j) {
    for (std::size_t b = 0; b < n_resamples; ++b) column[b] = resamples[b][j];
    for (std::size_t g = 0; g < groups; ++g) jcolumn[g] = jackknife[g][j];
    const BcaInterval ci =
        bca_interval(column, rep.nodes[j].phi, cfg.bootstrap_level, jcolumn);
    rep.nodes[j].ci_lo = ci.lo;
    rep.nodes[j].ci_hi = ci.hi;
    rep.nodes[j].has_ci = true;
  }
}

void check_functional_kind(const Dag& dag, std::size_t target, const Functional& f) {
  if (target >= dag.size()) throw UnknownNode("target index out of range");
  if (dag.node(target).kind != NodeKind::Categorical) return;
  if (f.kind == Functional::Kind::Variance || f.kind == Functional::Kind::Median ||
      f.kind == Functional::Kind::Quantile)
    throw InvalidArgument("functional '" + f.name() + "' needs a continuous target");
}

}  // namespace

AttributionReport attribute_joint(const Table& old_table, const Table& new_table,
                                  const Dag& dag, const AttributionConfig& config) {
  validate_tables(old_table, new_table, dag);
  validate_config(config);

  const FittedModels fm = fit_models(old_table, new_table, dag, config, nullptr);
  const JointContributions contrib = joint_contributions(fm, old_table, new_table, config);

  AttributionReport rep;
  rep.mode = "joint";
  fill_nodes(rep, dag, fm, contrib.phi);
  KahanSum total;
  for (double c : contrib.phi) total.add(c);
  rep.total = total.value();
  fill_common_provenance(rep, config, fm);
  rep.provenance.evaluation_path = contrib.path;
  rep.provenance.divergence_direction = config.reverse_kl ? "old_vs_new" : "new_vs_old";
  rep.provenance.rows_old = old_table.rows();
  rep.provenance.rows_new = new_table.rows();

  if (config.bootstrap_resamples > 0)
    bootstrap_tables(rep, old_table, new_table, dag, config, fm, true, 0,
                     Functional::mean());
  return rep;
}

AttributionReport attribute_marginal(const Table& old_table, const Table& new_table,
                                     const Dag& dag, std::size_t target,
                                     const Functional& f, const AttributionConfig& config) {
  validate_tables(old_table, new_table, dag);
  validate_config(config);
  check_functional_kind(dag, target, f);

  const FittedModels fm = fit_models(old_table, new_table, dag, config, nullptr);
  const MarginalRun run = run_marginal(fm, target, f, config);

  AttributionReport rep;
  rep.mode = "marginal";
  rep.target = dag.node(target).name;
  rep.functional = f.name();
  rep.total = run.total;
  rep.raw_data_total = raw_marginal_delta(old_table, new_table, dag, target, f, config);
  rep.has_raw_data_total = true;
  fill_nodes(rep, dag, fm, run.phi);
  fill_shapley_fields(rep, run);
  fill_common_provenance(rep, config, fm);
  rep.provenance.evaluation_path = run.path;
  rep.provenance.n_draws = run.path == "monte_carlo" ? config.n_draws : 0;
  rep.provenance.rows_old = old_table.rows();
  rep.provenance.rows_new = new_table.rows();

  if (config.bootstrap_resamples > 0)
    bootstrap_tables(rep, old_table, new_table, dag, config, fm, false, target, f);
  return rep;
}

AttributionReport attribute_marginal_models(const Scm& old_scm, const Scm& new_scm,
                                            std::size_t target, const Functional& f,
                                            const AttributionConfig& config) {
  validate_config(config);
  if (!old_scm.dag.same_structure(new_scm.dag))
    throw GraphMismatch("models disagree on the graph");
  check_functional_kind(old_scm.dag, target, f);

  FittedModels fm;
  fm.base = old_scm;
  fm.alt = new_scm;
  fm.player.assign(old_scm.dag.size(), 1);
  fm.p_value.assign(old_scm.dag.size(), 1.0);

  const MarginalRun run = run_marginal(fm, target, f, config);

  AttributionReport rep;
  rep.mode = "marginal";
  rep.target = old_scm.dag.node(target).name;
  rep.functional = f.name();
  rep.total = run.total;
  fill_nodes(rep, old_scm.dag, fm, run.phi);
  fill_shapley_fields(rep, run);
  fill_common_provenance(rep, config, fm);
  rep.provenance.gating = false;
  rep.provenance.evaluation_path = run.path;
  rep.provenance.n_draws = run.path == "monte_carlo" ? config.n_draws : 0;

  // Fixed mechanisms leave nothing to resample; requested intervals collapse
  // onto the point values.
  if (config.bootstrap_resamples > 0) {
    for (auto& node : rep.nodes) {
      node.ci_lo = node.phi;
      node.ci_hi = node.phi;
      node.has_ci = true;
    }
  }
  return rep;
}

std::vector<double> exact_conditional_kl_contributions(const Scm& old_scm,
                                                       const Scm& new_scm) {
  if (!old_scm.dag.same_structure(new_scm.dag))
    throw GraphMismatch("models disagree on the graph");
  if (!enumerable_whole_joint(new_scm, kMaxEnumerationCells) ||
      !enumerable_whole_joint(old_scm, kMaxEnumerationCells))
    throw NotEnumerable("joint grid too large or not fully categorical");
  return enumerated_contributions(new_scm, old_scm, nullptr);
}

BcaInterval bca_interval(std::span<const double> resamples, double point_estimate,
                         double level, std::span<const double> jackknife_values) {
  if (resamples.empty()) throw EmptySample("no bootstrap resamples");
  if (!(level > 0.0 && level < 1.0))
    throw InvalidArgument("interval level must lie in (0, 1)");

  std::size_t below = 0;
  std::size_t tied = 0;
  for (double x : resamples) {
    if (x < point_estimate)
      ++below;
    else if (x == point_estimate)
      ++tied;
  }
  if (tied == resamples.size()) return {point_estimate, point_estimate, false};

  const double tail = (1.0 - level) / 2.0;
  BcaInterval out;
  // Midrank treatment of ties when locating the point estimate in the
  // resample distribution.
  const double frac = (static_cast<double>(below) + 0.5 * static_cast<double>(tied)) /
                      static_cast<double>(resamples.size());
  double a = 0.0;
  if (jackknife_values.size() >= 2) {
    const double jm = mean(jackknife_values);
    double s2 = 0.0;
    double s3 = 0.0;
    for (double x : jackknife_values) {
      const double d = jm - x;
      s2 += d * d;
      s3 += d * d * d;
    }
    if (s2 > 0.0) a = s3 / (6.0 * std::pow(s2, 1.5));
  }
  const double zlo = normal_quantile(tail);
  const double zhi = normal_quantile(1.0 - tail);
  bool fallback = frac <= 0.0 || frac >= 1.0;
  double a1 = tail;
  double a2 = 1.0 - tail;
  if (!fallback) {
    const double z0 = normal_quantile(frac);
    const double dlo = 1.0 - a * (z0 + zlo);
    const double dhi = 1.0 - a * (z0 + zhi);
    if (dlo <= 0.0 || dhi <= 0.0) {
      fallback = true;  // acceleration blew past the usable range
    } else {
      a1 = normal_cdf(z0 + (z0 + zlo) / dlo);
      a2 = normal_cdf(z0 + (z0 + zhi) / dhi);
    }
  }
  out.percentile_fallback = fallback;
  out.lo = quantile(resamples, a1);
  out.hi = quantile(resamples, a2);
  if (out.lo > out.hi) std::swap(out.lo, out.hi);
  return out;
}

}  // namespace causalattr
