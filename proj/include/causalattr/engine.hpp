#pragma once

#include <cstdint>
#include <vector>

#include "causalattr/graph.hpp"
#include "causalattr/mechanisms.hpp"
#include "causalattr/tabular.hpp"

namespace causalattr {

// Subset of node indices whose mechanisms get replaced when composing a
// hybrid model.
class ChangeSet {
 public:
  explicit ChangeSet(std::size_t n_nodes) : member_(n_nodes, 0) {}
  static ChangeSet none(std::size_t n_nodes) { return ChangeSet(n_nodes); }
  static ChangeSet all(std::size_t n_nodes) {
    ChangeSet t(n_nodes);
    for (auto& m : t.member_) m = 1;
    return t;
  }
  static ChangeSet of(std::size_t n_nodes, const std::vector<std::size_t>& members);

  std::size_t node_count() const { return member_.size(); }
  bool contains(std::size_t j) const { return member_[j] != 0; }
  void add(std::size_t j) { member_[j] = 1; }
  std::vector<std::size_t> members() const;
  std::size_t size() const;

 private:
  std::vector<uint8_t> member_;
};

// A causal model: graph plus one mechanism per node. Mechanisms are shared
// immutably, so hybrid composition is cheap.
struct Scm {
  Dag dag;
  std::vector<MechanismPtr> mechanisms;
};

// Validates that each mechanism's parent layout matches the graph.
Scm make_scm(Dag dag, std::vector<MechanismPtr> mechanisms);

// Node j takes new_scm's mechanism iff j is in t, old_scm's otherwise.
// Both models must share an identical graph.
Scm compose_hybrid(const Scm& old_scm, const Scm& new_scm, const ChangeSet& t);

// Draws n_draws joint rows by visiting nodes in topological order. Each
// (node, row) pair consumes its own rng stream derived from the seed, so a
// hybrid that swaps one node's mechanism reuses identical noise everywhere
// else — the common-random-numbers scheme the coalition differences rely on.
Table ancestral_sample(const Scm& scm, std::size_t n_draws, uint64_t seed);

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// True when every mechanism on the target's ancestral closure is a Gaussian
// root or a linear-Gaussian conditional with continuous parents.
bool is_linear_gaussian_closure(const Scm& scm, std::size_t target);

// Exact target moments by forward propagation of affine-Gaussian moments
// over the ancestral closure. Throws NonLinearGaussianModel otherwise.
GaussianMoments analytic_marginal_gaussian(const Scm& scm, std::size_t target);

inline constexpr std::size_t kMaxEnumerationCells = 4096;

// True when every node in the target's ancestral closure is categorical
// with an enumerable mechanism and the closure's joint grid fits the cap.
bool is_enumerable_discrete(const Scm& scm, std::size_t target,
                            std::size_t max_cells = kMaxEnumerationCells);

// Exact marginal pmf of the target by summing the factored joint over the
// ancestral closure. Throws NotEnumerable when the closure does not qualify.
std::vector<double> enumerate_discrete_marginal(const Scm& scm, std::size_t target,
                                                std::size_t max_cells = kMaxEnumerationCells);

// Joint pmf over an ancestrally closed node set, mixed-radix over the given
// nodes in ascending index order (first node varies slowest).
struct DiscreteJoint {
  std::vector<std::size_t> nodes;
  std::vector<int32_t> cards;
  std::vector<double> probs;
};

DiscreteJoint enumerate_discrete_joint(const Scm& scm,
                                       std::size_t max_cells = kMaxEnumerationCells);

// Marginal pmf of one member node of an enumerated joint.
std::vector<double> marginal_of(const DiscreteJoint& joint, std::size_t node);

// Joint pmf of a subset of member nodes, mixed-radix over the subset in the
// order given (first listed node varies slowest). An empty subset yields {1}.
std::vector<double> marginalize(const DiscreteJoint& joint,
                                const std::vector<std::size_t>& subset);

}  // namespace causalattr
