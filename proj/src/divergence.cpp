#include "causalattr/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>

#include "causalattr/errors.hpp"
#include "causalattr/rng.hpp"
#include "causalattr/stats.hpp"
#include "causalattr/warnings.hpp"

namespace causalattr {

KlEstimate kl_gaussian(double mean1, double var1, double mean0, double var0) {
  if (!(var1 > 0.0) || !(var0 > 0.0))
    throw NonPositiveVariance("kl_gaussian needs positive variances");
  const double d = mean1 - mean0;
  double v = 0.5 * std::log(var0 / var1) + (var1 + d * d) / (2.0 * var0) - 0.5;
  if (v < 0.0) v = 0.0;  // analytic value is >= 0; rounding can graze below
  return KlEstimate{v, KlEstimate::Method::GaussianClosedForm, 0};
}

KlEstimate kl_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw LengthMismatch("pmf lengths differ");
  if (p.empty()) throw LengthMismatch("empty pmf");
  KahanSum sp, sq;
  for (double x : p) {
    if (x < 0.0) throw InvalidArgument("negative probability in p");
    sp.add(x);
  }
  for (double x : q) {
    if (x < 0.0) throw InvalidArgument("negative probability in q");
    sq.add(x);
  }
  if (std::abs(sp.value() - 1.0) > 1e-6 || std::abs(sq.value() - 1.0) > 1e-6)
    throw InvalidArgument("pmf does not sum to 1");
  KahanSum acc;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0)
      throw AbsoluteContinuityViolation("p has mass where q has none");
    acc.add(p[i] * std::log(p[i] / q[i]));
  }
  double v = acc.value();
  if (v < 0.0) v = 0.0;
  return KlEstimate{v, KlEstimate::Method::DiscreteExact, 0};
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double d = 0.0;
  for (std::size_t f = 0; f < dim; ++f) {
    const double diff = a[f] - b[f];
    d += diff * diff;
  }
  return d;
}

// k-th smallest entry of scratch (1-based k).
double kth_smallest(std::vector<double>& scratch, int k) {
  auto nth = scratch.begin() + (k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

}  // namespace

KlEstimate kl_knn(std::span<const double> sample_p, std::span<const double> sample_q,
                  std::size_t dim, int k) {
  if (dim < 1) throw InvalidArgument("dimension must be >= 1");
  if (k < 1) throw InvalidArgument("neighbor count must be >= 1");
  if (sample_p.size() % dim != 0 || sample_q.size() % dim != 0)
    throw LengthMismatch("sample length is not a multiple of the dimension");
  const std::size_t np = sample_p.size() / dim;
  const std::size_t nq = sample_q.size() / dim;
  if (np <= static_cast<std::size_t>(k) || nq <= static_cast<std::size_t>(k))
    throw TooFewPoints("need more points than neighbors in both samples");

  // Deduplicate sample_p: repeated points make the within-sample neighbor
  // distance collapse to zero. The jitter is tiny, deterministic, and
  // scale-aware.
  std::vector<double> p(sample_p.begin(), sample_p.end());
  {
    double lo = p[0], hi = p[0];
    for (double x : p) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double scale = hi > lo ? hi - lo : 1.0;
    std::unordered_map<std::size_t, std::size_t> first_row;
    first_row.reserve(np * 2);
    Rng rng = Rng::stream(0x6a69747465726a6bULL, np, nq, static_cast<uint64_t>(k));
    std::size_t jittered = 0;
    std::hash<double> h;
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t sig = 0xcbf29ce484222325ULL;
      for (std::size_t f = 0; f < dim; ++f)
        sig = (sig ^ h(p[i * dim + f])) * 0x100000001b3ULL;
      auto [it, inserted] = first_row.emplace(sig, i);
      if (inserted) continue;
      if (sq_dist(p.data() + it->second * dim, p.data() + i * dim, dim) > 0.0) continue;
      for (std::size_t f = 0; f < dim; ++f)
        p[i * dim + f] += 1e-10 * scale * (2.0 * rng.uniform01() - 1.0);
      ++jittered;
    }
    if (jittered > 0)
      warn("jittered " + std::to_string(jittered) + " duplicate points for the k-NN estimator");
  }

  KahanSum acc;
  std::vector<double> within(np);
  std::vector<double> across(nq);
  for (std::size_t i = 0; i < np; ++i) {
    const double* xi = p.data() + i * dim;
    for (std::size_t j = 0; j < np; ++j)
      within[j] = j == i ? std::numeric_limits<double>::infinity()
                         : sq_dist(xi, p.data() + j * dim, dim);
    const double rho2 = kth_smallest(within, k);
    for (std::size_t j = 0; j < nq; ++j)
      across[j] = sq_dist(xi, sample_q.data() + j * dim, dim);
    const double nu2 = kth_smallest(across, k);
    if (nu2 == 0.0)
      throw ZeroDistance("a sample point coincides with its neighbor in the other sample");
    acc.add(0.5 * std::log(nu2 / rho2));
  }
  const double value =
      static_cast<double>(dim) / static_cast<double>(np) * acc.value() +
      std::log(static_cast<double>(nq) / static_cast<double>(np - 1));
  return KlEstimate{value, KlEstimate::Method::Knn, k};
}

namespace {

const LinearGaussianConditional* as_linear(const Mechanism& m) {
  return dynamic_cast<const LinearGaussianConditional*>(&m);
}
const GaussianMarginal* as_gaussian(const Mechanism& m) {
  return dynamic_cast<const GaussianMarginal*>(&m);
}
const DiscreteCpt* as_cpt(const Mechanism& m) {
  return dynamic_cast<const DiscreteCpt*>(&m);
}
const EmpiricalCategoricalMarginal* as_empirical(const Mechanism& m) {
  return dynamic_cast<const EmpiricalCategoricalMarginal*>(&m);
}

std::optional<std::span<const double>> root_pmf(const Mechanism& m) {
  if (const auto* e = as_empirical(m)) return std::span<const double>(e->probs());
  if (const auto* c = as_cpt(m); c && c->parent_count() == 0) return c->row(0);
  return std::nullopt;
}

}  // namespace

KlEstimate conditional_kl(const Mechanism& new_mech, const Mechanism& old_mech,
                          const std::vector<std::vector<double>>& parent_rows,
                          const ConditionalKlOptions& options) {
  if (new_mech.parent_layout() != old_mech.parent_layout())
    throw IncompatibleMechanisms("mechanisms have different parent layouts");
  if (new_mech.categorical_child() != old_mech.categorical_child())
    throw IncompatibleMechanisms("mechanisms model different child kinds");
  const Mechanism& a = options.reverse ? old_mech : new_mech;
  const Mechanism& b = options.reverse ? new_mech : old_mech;

  // Roots ignore the parent rows entirely.
  if (a.parent_count() == 0) {
    const auto* ga = as_gaussian(a);
    const auto* gb = as_gaussian(b);
    if (ga && gb)
      return kl_gaussian(ga->mean(), ga->variance(), gb->mean(), gb->variance());
    const auto pa = root_pmf(a);
    const auto pb = root_pmf(b);
    if (pa && pb) return kl_discrete(*pa, *pb);
  }

  const std::vector<std::vector<double>> root_row{{}};
  const auto& rows = a.parent_count() == 0 ? root_row : parent_rows;
  if (rows.empty()) throw InvalidArgument("conditional KL needs parent rows");

  const auto* lin_a = as_linear(a);
  const auto* lin_b = as_linear(b);
  if (lin_a && lin_b) {
    KahanSum acc;
    for (const auto& row : rows)
      acc.add(kl_gaussian(lin_a->conditional_mean(row), lin_a->noise_variance(),
                          lin_b->conditional_mean(row), lin_b->noise_variance())
                  .value);
    double v = acc.value() / static_cast<double>(rows.size());
    if (v < 0.0) v = 0.0;
    return KlEstimate{v, KlEstimate::Method::GaussianClosedForm, 0};
  }

  const auto* cpt_a = as_cpt(a);
  const auto* cpt_b = as_cpt(b);
  if (cpt_a && cpt_b) {
    KahanSum acc;
    for (const auto& row : rows) {
      const std::size_t g = cpt_a->config_index(row);
      acc.add(kl_discrete(cpt_a->row(g), cpt_b->row(g)).value);
    }
    double v = acc.value() / static_cast<double>(rows.size());
    if (v < 0.0) v = 0.0;
    return KlEstimate{v, KlEstimate::Method::DiscreteExact, 0};
  }

  if (a.categorical_child())
    throw IncompatibleMechanisms(
        "sample-based conditional KL supports continuous children only");

  // Sample-based fallback: per parent row, draw from both conditionals and
  // estimate the 1-D KL. Rows beyond the cap are thinned by stride so the
  // result stays deterministic.
  const std::size_t stride =
      rows.size() > options.max_rows
          ? (rows.size() + options.max_rows - 1) / options.max_rows
          : 1;
  std::vector<double> draws_a(options.draws_per_row);
  std::vector<double> draws_b(options.draws_per_row);
  KahanSum acc;
  std::size_t used = 0;
  for (std::size_t r = 0; r < rows.size(); r += stride) {
    const auto& row = rows[r];
    Rng rng_a = Rng::stream(options.seed, static_cast<uint64_t>(r), 1);
    Rng rng_b = Rng::stream(options.seed, static_cast<uint64_t>(r), 2);
    for (std::size_t i = 0; i < options.draws_per_row; ++i) {
      draws_a[i] = a.sample_one(row, rng_a);
      draws_b[i] = b.sample_one(row, rng_b);
    }
    acc.add(kl_knn(draws_a, draws_b, 1, options.knn_k).value);
    ++used;
  }
  return KlEstimate{acc.value() / static_cast<double>(used), KlEstimate::Method::Knn,
                    options.knn_k};
}

}  // namespace causalattr
