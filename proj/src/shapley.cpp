#include "causalattr/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "causalattr/errors.hpp"
#include "causalattr/parallel.hpp"
#include "causalattr/rng.hpp"
#include "causalattr/stats.hpp"

namespace causalattr {

SetFunction::SetFunction(std::size_t n_players, std::function<double(uint64_t)> evaluator)
    : n_(n_players), evaluator_(std::move(evaluator)) {
  if (n_ > 63) throw TooManyPlayers("coalition masks support at most 63 players");
  if (!evaluator_) throw InvalidArgument("null coalition evaluator");
}

double SetFunction::raw(uint64_t mask) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = memo_.find(mask);
    if (it != memo_.end()) return it->second;
  }
  const double v = evaluator_(mask);
  std::lock_guard<std::mutex> lock(mutex_);
  const auto [it, inserted] = memo_.emplace(mask, v);
  if (inserted) ++evaluations_;
  return it->second;
}

double SetFunction::value(uint64_t mask) const {
  if (mask >= (uint64_t{1} << n_))
    throw InvalidArgument("coalition mask has bits beyond the player count");
  const double at_mask = raw(mask);
  return at_mask - raw(0);
}

void SetFunction::prefetch(std::span<const uint64_t> masks, unsigned workers) const {
  std::vector<uint64_t> todo;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (uint64_t m : masks)
      if (!memo_.contains(m)) todo.push_back(m);
  }
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  if (todo.empty()) return;
  std::vector<double> results(todo.size());
  parallel_for_indexed(todo.size(), workers,
                       [&](std::size_t i) { results[i] = evaluator_(todo[i]); });
  std::lock_guard<std::mutex> lock(mutex_);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const auto [it, inserted] = memo_.emplace(todo[i], results[i]);
    if (inserted) ++evaluations_;
  }
}

std::size_t SetFunction::evaluation_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return evaluations_;
}

namespace {

uint64_t binom(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  uint64_t r = 1;
  for (std::size_t i = 0; i < std::min(k, n - k); ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

ShapleyResult exact_shapley(const SetFunction& nu, const ShapleyOptions& options) {
  const std::size_t n = nu.arity();
  if (n > options.exact_cap)
    throw TooManyPlayers("player count exceeds the exact enumeration cap");
  ShapleyResult result;
  result.method = ShapleyResult::Method::Exact;
  if (n == 0) return result;

  const uint64_t full = (uint64_t{1} << n) - 1;
  std::vector<uint64_t> masks(full + 1);
  std::iota(masks.begin(), masks.end(), uint64_t{0});
  nu.prefetch(masks, options.workers);

  // Weight by coalition size: 1 / (n * binom(n-1, t)).
  std::vector<double> weight(n);
  for (std::size_t t = 0; t < n; ++t)
    weight[t] = 1.0 / (static_cast<double>(n) * static_cast<double>(binom(n - 1, t)));

  result.values.assign(n, 0.0);
  std::vector<KahanSum> acc(n);
  for (uint64_t mask = 0; mask <= full; ++mask) {
    const auto t = static_cast<std::size_t>(std::popcount(mask));
    const double base = nu.value(mask);
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (uint64_t{1} << j)) continue;
      acc[j].add(weight[t] * (nu.value(mask | (uint64_t{1} << j)) - base));
    }
  }
  for (std::size_t j = 0; j < n; ++j) result.values[j] = acc[j].value();
  result.raw_values = result.values;
  result.evaluation_count = nu.evaluation_count();
  return result;
}

ShapleyResult sampled_shapley(const SetFunction& nu, std::size_t n_permutations,
                              uint64_t seed, const ShapleyOptions& options) {
  const std::size_t n = nu.arity();
  if (n_permutations < 2) throw InvalidArgument("need at least two permutations");
  ShapleyResult result;
  result.method = ShapleyResult::Method::PermutationSampled;
  result.n_permutations = n_permutations;
  if (n == 0) return result;

  // Draw all orderings up front, then evaluate the distinct prefix masks in
  // one deterministic batch.
  std::vector<std::vector<std::size_t>> perms(n_permutations);
  {
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    for (std::size_t p = 0; p < n_permutations; ++p) {
      perms[p] = identity;
      Rng rng = Rng::stream(seed, 0x7065726dULL, p);
      rng.shuffle(perms[p]);
    }
  }
  std::vector<uint64_t> masks{0};
  for (const auto& perm : perms) {
    uint64_t mask = 0;
    for (std::size_t j : perm) {
      mask |= uint64_t{1} << j;
      masks.push_back(mask);
    }
  }
  nu.prefetch(masks, options.workers);

  std::vector<KahanSum> sum(n), sum_sq(n);
  for (const auto& perm : perms) {
    uint64_t mask = 0;
    double prev = nu.value(0);
    for (std::size_t j : perm) {
      mask |= uint64_t{1} << j;
      const double cur = nu.value(mask);
      const double contribution = cur - prev;
      sum[j].add(contribution);
      sum_sq[j].add(contribution * contribution);
      prev = cur;
    }
  }

  const auto p = static_cast<double>(n_permutations);
  result.raw_values.assign(n, 0.0);
  result.std_errors.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double mean_c = sum[j].value() / p;
    result.raw_values[j] = mean_c;
    const double var = std::max(0.0, (sum_sq[j].value() - p * mean_c * mean_c) / (p - 1.0));
    result.std_errors[j] = std::sqrt(var / p);
  }

  // Redistribute the efficiency residual in proportion to each player's
  // uncertainty; noisier estimates absorb more of the correction.
  const uint64_t full = (uint64_t{1} << n) - 1;
  KahanSum raw_total;
  for (double v : result.raw_values) raw_total.add(v);
  const double residual = nu.value(full) - raw_total.value();
  result.efficiency_residual = residual;
  KahanSum se_total;
  for (double se : result.std_errors) se_total.add(se);
  result.values.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double share = se_total.value() > 1e-300
                             ? result.std_errors[j] / se_total.value()
                             : 1.0 / static_cast<double>(n);
    result.values[j] = result.raw_values[j] + residual * share;
  }
  result.evaluation_count = nu.evaluation_count();
  return result;
}

}  // namespace causalattr
