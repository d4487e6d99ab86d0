#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace causalattr {

// A coalition payoff over players 0..n-1, memoized on the coalition
// bitmask. The raw evaluator's payoff at the empty coalition is subtracted
// from every value, so value(0) is 0 by construction. Evaluations are
// assumed pure; each coalition is evaluated at most once, which keeps
// Monte-Carlo payoffs coherent across the marginal contributions that
// reuse them.
class SetFunction {
 public:
  SetFunction(std::size_t n_players, std::function<double(uint64_t)> evaluator);

  std::size_t arity() const { return n_; }
  double value(uint64_t mask) const;

  // Evaluates any uncached masks concurrently; results are keyed by mask,
  // so downstream reductions are independent of scheduling.
  void prefetch(std::span<const uint64_t> masks, unsigned workers) const;

  std::size_t evaluation_count() const;

 private:
  double raw(uint64_t mask) const;

  std::size_t n_;
  std::function<double(uint64_t)> evaluator_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<uint64_t, double> memo_;
  mutable std::size_t evaluations_ = 0;
};

struct ShapleyResult {
  enum class Method { Exact, PermutationSampled };
  Method method = Method::Exact;
  // Efficiency-normalized values (equal to raw_values for the exact method).
  std::vector<double> values;
  // Plain permutation averages before the residual redistribution.
  std::vector<double> raw_values;
  // Across-permutation standard error per player (sampled method only).
  std::vector<double> std_errors;
  std::size_t n_permutations = 0;
  std::size_t evaluation_count = 0;
  // nu(full) - sum(raw values); zero for the exact method.
  double efficiency_residual = 0.0;
};

struct ShapleyOptions {
  std::size_t exact_cap = 12;
  unsigned workers = 1;
};

// Subset-weighted exact values: phi_j = sum over coalitions T without j of
// (n * binom(n-1, |T|))^-1 * (nu(T + j) - nu(T)). Evaluates all 2^n masks.
ShapleyResult exact_shapley(const SetFunction& nu, const ShapleyOptions& options = {});

// Average marginal contribution over uniformly drawn player orderings.
// Per-player standard errors come from the across-permutation variance;
// the efficiency residual is redistributed proportionally to them (kept
// separately in raw_values).
ShapleyResult sampled_shapley(const SetFunction& nu, std::size_t n_permutations,
                              uint64_t seed, const ShapleyOptions& options = {});

}  // namespace causalattr
