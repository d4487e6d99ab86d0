#pragma once

#include <cstdint>
#include <vector>

#include "causalattr/graph.hpp"
#include "causalattr/mechanisms.hpp"

namespace causalattr {

// Benchmark harness over randomly drawn star models: independent Gaussian
// roots feeding one linear sink. The "new" regime shifts a random subset of
// node means by a common magnitude, the shifted amounts are the ground
// truth, and the score is the l1 distance between the attribution and that
// truth.
struct SimConfig {
  // Fixed shift magnitudes, one result cell each. Empty: a single cell
  // drawing the magnitude uniformly from [lambda_lo, lambda_hi] per model.
  std::vector<double> lambdas;
  double lambda_lo = 1.0;
  double lambda_hi = 5.0;

  std::vector<std::size_t> sample_sizes = {1000};

  // Node count drawn uniformly from [n_min, n_max] per model pair.
  std::size_t n_min = 2;
  std::size_t n_max = 5;

  // Node means drawn uniformly from [mu_lo, mu_hi].
  double mu_lo = -5.0;
  double mu_hi = 5.0;

  // Per-node probability of receiving the shift; all-unchanged draws are
  // rejected and redrawn.
  double change_prob = 0.5;

  std::size_t n_scm_pairs = 20;
  std::size_t n_samples_per_pair = 5;

  // Sink regressor fitted to the generated data: linear or nearest-neighbor.
  Family regressor = Family::LinearGaussianConditional;

  // Coalition draws when the fitted sink has no closed marginal.
  std::size_t n_draws = 2000;

  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct SimCell {
  double lambda_lo = 0.0;  // equal bounds for a fixed-magnitude cell
  double lambda_hi = 0.0;
  std::size_t sample_size = 0;
  std::size_t trials = 0;
  double mean_l1 = 0.0;
  double std_error = 0.0;
};

struct SimResult {
  std::vector<SimCell> cells;
};

// One cell per (shift magnitude, sample size) combination. Trial seeds hang
// off the cell parameters and the master seed alone, so a cell's numbers do
// not depend on which other cells run alongside it or on the worker count.
SimResult run_simulation(const SimConfig& config);

// The star graph the harness draws from: X1..X{n-1} are roots, Xn their sum
// plus noise. Exposed for tests that need the same shape.
Dag star_dag(std::size_t n_nodes);

}  // namespace causalattr
