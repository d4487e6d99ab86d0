#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalattr/graph.hpp"
#include "causalattr/tabular.hpp"

namespace causalattr {

struct NodeDetection {
  double p_value = 1.0;
  bool changed = false;
  std::string test;  // "kernel_ci" or "kernel_two_sample"
};

struct DetectionResult {
  std::vector<NodeDetection> nodes;
  double alpha = 0.05;
};

struct DetectOptions {
  double alpha = 0.05;
  std::size_t n_permutations = 500;
  uint64_t seed = 0;
  unsigned workers = 1;
  // Pooled rows beyond this cap are subsampled (proportionally per source)
  // before testing; kernel test cost grows too fast with m otherwise.
  std::size_t max_rows = 4000;
  // Low-rank Gram factorization controls.
  std::size_t max_rank = 128;
  double rank_tolerance = 1e-6;
  // Ridge on kernel-regression solves, scaled by the row count.
  double ridge_scale = 1e-3;
};

// Per-node test of whether the mechanism changed between the two samples,
// using the source marker as the test variable: root nodes get a kernel
// two-sample test across the sources, non-roots a conditional-independence
// test of the node against the marker given its parents (cross-covariance
// of kernel-regression residuals, permutation null). Gaussian kernels for
// continuous variables, indicator kernels for categorical ones.
DetectionResult detect_changes(const Table& old_table, const Table& new_table,
                               const Dag& dag, const DetectOptions& options = {});

}  // namespace causalattr
