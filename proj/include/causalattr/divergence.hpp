#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "causalattr/mechanisms.hpp"

namespace causalattr {

// KL divergence result in nats. Closed-form methods are exactly
// nonnegative; the k-NN estimator can dip slightly below zero, so `value`
// keeps the raw estimate and reports clip through `clipped`.
struct KlEstimate {
  enum class Method { GaussianClosedForm, DiscreteExact, Knn };
  double value = 0.0;
  Method method = Method::GaussianClosedForm;
  int k = 0;

  double clipped() const { return value < 0.0 ? 0.0 : value; }
};

// D( N(mean1, var1) || N(mean0, var0) ).
KlEstimate kl_gaussian(double mean1, double var1, double mean0, double var0);

// D( p || q ) = sum p_i log(p_i / q_i), with 0 log(0/q) = 0.
KlEstimate kl_discrete(std::span<const double> p, std::span<const double> q);

// Wang-Kulkarni-Verdu k-NN estimator of D(P || Q) from samples, row-major
// with `dim` coordinates per point. Duplicate points inside sample_p are
// jittered deterministically (with a warning) so within-sample neighbor
// distances stay positive; a sample_p point that coincides with its k-th
// neighbor in sample_q is an error.
KlEstimate kl_knn(std::span<const double> sample_p, std::span<const double> sample_q,
                  std::size_t dim, int k);

struct ConditionalKlOptions {
  int knn_k = 5;
  // Sample-based path only: parent rows beyond max_rows are subsampled by
  // stride; each surviving row gets draws_per_row conditional draws.
  std::size_t max_rows = 200;
  std::size_t draws_per_row = 400;
  uint64_t seed = 0;
  // Swaps the divergence direction to D(old || new). The parent rows passed
  // in still define the weighting distribution.
  bool reverse = false;
};

// Average over the given parent rows of D(new(.|pa) || old(.|pa)): the
// per-node share of the joint KL. Uses the Gaussian or discrete closed form
// when both mechanisms admit one, otherwise draws from both conditionals
// and runs the k-NN estimator per row. Root mechanisms ignore the rows.
KlEstimate conditional_kl(const Mechanism& new_mech, const Mechanism& old_mech,
                          const std::vector<std::vector<double>>& parent_rows,
                          const ConditionalKlOptions& options = {});

}  // namespace causalattr
