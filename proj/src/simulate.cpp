#include "causalattr/simulate.hpp"

#include <bit>
#include <cmath>
#include <string>
#include <utility>

#include "causalattr/attribution.hpp"
#include "causalattr/engine.hpp"
#include "causalattr/errors.hpp"
#include "causalattr/parallel.hpp"
#include "causalattr/rng.hpp"
#include "causalattr/stats.hpp"

namespace causalattr {
namespace {

void validate(const SimConfig& cfg) {
  for (double l : cfg.lambdas) {
    if (l < 0.0) throw InvalidArgument("shift magnitude must be >= 0");
    if (l == 0.0)
      throw InvalidArgument(
          "a zero shift cannot change any mechanism, so the at-least-one-change "
          "rule can never accept; drop the lambda=0 cell");
  }
  if (cfg.lambdas.empty()) {
    if (cfg.lambda_lo < 0.0 || cfg.lambda_hi < cfg.lambda_lo)
      throw InvalidArgument("bad shift magnitude range");
    if (cfg.lambda_hi == 0.0)
      throw InvalidArgument(
          "a zero shift cannot change any mechanism, so the at-least-one-change "
          "rule can never accept; raise lambda_hi");
  }
  if (cfg.sample_sizes.empty()) throw InvalidArgument("no sample sizes given");
  for (std::size_t s : cfg.sample_sizes)
    if (s < 1) throw InvalidArgument("sample size must be >= 1");
  if (cfg.n_min < 2) throw InvalidArgument("need at least two nodes (one root, one sink)");
  if (cfg.n_max < cfg.n_min || cfg.n_max > 62)
    throw InvalidArgument("bad node count range");
  if (cfg.mu_hi < cfg.mu_lo) throw InvalidArgument("bad mean range");
  if (!(cfg.change_prob >= 0.0 && cfg.change_prob <= 1.0))
    throw InvalidArgument("change probability must lie in [0, 1]");
  if (cfg.change_prob == 0.0)
    throw InvalidArgument(
        "change probability 0 leaves every mechanism unchanged, so the "
        "at-least-one-change rule can never accept");
  if (cfg.n_scm_pairs < 1 || cfg.n_samples_per_pair < 1)
    throw InvalidArgument("trial counts must be >= 1");
  if (cfg.regressor != Family::LinearGaussianConditional &&
      cfg.regressor != Family::NearestNeighborConditional)
    throw InvalidArgument("sink regressor must be linear or nearest-neighbor");
  if (cfg.n_draws < 2) throw InvalidArgument("need at least two draws per coalition");
}

Scm star_scm(const Dag& dag, const std::vector<double>& means) {
  const std::size_t n = dag.size();
  std::vector<MechanismPtr> mechs(n);
  for (std::size_t w = 0; w + 1 < n; ++w)
    mechs[w] = std::make_shared<GaussianMarginal>(means[w], 1.0);
  mechs[n - 1] = std::make_shared<LinearGaussianConditional>(
      ParentLayout(n - 1, 0), std::vector<double>(n - 1, 1.0), means[n - 1], 1.0);
  return make_scm(dag, std::move(mechs));
}

double run_trial(const SimCell& cell, std::uint64_t pair_key, std::uint64_t sample_idx,
                 const SimConfig& cfg) {
  Rng scm_rng = Rng::stream(pair_key, 1);
  const std::size_t n =
      cfg.n_min + scm_rng.uniform_int(cfg.n_max - cfg.n_min + 1);
  std::vector<double> mu(n);
  for (auto& m : mu) m = scm_rng.uniform(cfg.mu_lo, cfg.mu_hi);
  const double magnitude = cell.lambda_lo == cell.lambda_hi
                               ? cell.lambda_lo
                               : scm_rng.uniform(cell.lambda_lo, cell.lambda_hi);

  // Redraw the changed subset until at least one mechanism actually changes.
  std::vector<double> shift(n, 0.0);
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100000)
      throw InvalidArgument("could not draw a changed subset; change_prob too small");
    bool any = false;
    for (std::size_t w = 0; w < n; ++w) {
      shift[w] = scm_rng.bernoulli(cfg.change_prob) ? magnitude : 0.0;
      any = any || shift[w] != 0.0;
    }
    if (any) break;
  }

  const Dag dag = star_dag(n);
  std::vector<double> mu_new(n);
  for (std::size_t w = 0; w < n; ++w) mu_new[w] = mu[w] + shift[w];
  const Scm old_scm = star_scm(dag, mu);
  const Scm new_scm = star_scm(dag, mu_new);

  const std::uint64_t trial_key = mix_key(pair_key, 2, sample_idx);
  const Table old_table = ancestral_sample(old_scm, cell.sample_size, mix_key(trial_key, 1));
  const Table new_table = ancestral_sample(new_scm, cell.sample_size, mix_key(trial_key, 2));

  AttributionConfig ac;
  ac.gating = false;
  ac.continuous_family = cfg.regressor;
  ac.shapley = ShapleyMode::Exact;
  ac.exact_cap = 62;
  ac.n_draws = cfg.n_draws;
  ac.seed = mix_key(trial_key, 3);
  ac.workers = 1;
  const AttributionReport report =
      attribute_marginal(old_table, new_table, dag, n - 1, Functional::mean(), ac);

  double l1 = 0.0;
  for (std::size_t w = 0; w < n; ++w) l1 += std::abs(report.nodes[w].phi - shift[w]);
  return l1;
}

SimCell run_cell(double lambda_lo, double lambda_hi, std::size_t sample_size,
                 const SimConfig& cfg) {
  SimCell cell;
  cell.lambda_lo = lambda_lo;
  cell.lambda_hi = lambda_hi;
  cell.sample_size = sample_size;
  cell.trials = cfg.n_scm_pairs * cfg.n_samples_per_pair;

  // Seeds key on the cell's parameters, not its position in the run, so a
  // cell reproduces bit-for-bit when run on its own.
  const std::uint64_t cell_key =
      mix_key(cfg.seed, std::bit_cast<std::uint64_t>(lambda_lo),
              std::bit_cast<std::uint64_t>(lambda_hi), sample_size);

  std::vector<double> l1(cell.trials);
  parallel_for_indexed(cell.trials, cfg.workers, [&](std::size_t t) {
    const std::size_t pair = t / cfg.n_samples_per_pair;
    const std::size_t sample = t % cfg.n_samples_per_pair;
    l1[t] = run_trial(cell, mix_key(cell_key, 1, pair), sample, cfg);
  });

  cell.mean_l1 = mean(l1);
  cell.std_error =
      cell.trials >= 2 ? stddev(l1) / std::sqrt(static_cast<double>(cell.trials)) : 0.0;
  return cell;
}

}  // namespace

Dag star_dag(std::size_t n_nodes) {
  if (n_nodes < 2) throw InvalidArgument("star graph needs at least two nodes");
  std::vector<NodeDecl> nodes(n_nodes);
  for (std::size_t w = 0; w < n_nodes; ++w)
    nodes[w] = {"X" + std::to_string(w + 1), NodeKind::Continuous, {}};
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t w = 0; w + 1 < n_nodes; ++w)
    edges.emplace_back(nodes[w].name, nodes[n_nodes - 1].name);
  return Dag(std::move(nodes), std::move(edges));
}

SimResult run_simulation(const SimConfig& config) {
  validate(config);
  SimResult result;
  if (config.lambdas.empty()) {
    for (std::size_t size : config.sample_sizes)
      result.cells.push_back(
          run_cell(config.lambda_lo, config.lambda_hi, size, config));
    return result;
  }
  for (double l : config.lambdas)
    for (std::size_t size : config.sample_sizes)
      result.cells.push_back(run_cell(l, l, size, config));
  return result;
}

}  // namespace causalattr
