#include "causalattr/engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "causalattr/errors.hpp"
#include "causalattr/stats.hpp"

namespace causalattr {

ChangeSet ChangeSet::of(std::size_t n_nodes, const std::vector<std::size_t>& members) {
  ChangeSet t(n_nodes);
  for (std::size_t j : members) {
    if (j >= n_nodes) throw InvalidArgument("change-set member out of range");
    t.member_[j] = 1;
  }
  return t;
}

std::vector<std::size_t> ChangeSet::members() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < member_.size(); ++j)
    if (member_[j]) out.push_back(j);
  return out;
}

std::size_t ChangeSet::size() const {
  std::size_t n = 0;
  for (uint8_t m : member_) n += m;
  return n;
}

namespace {

void check_mechanism(const Dag& dag, std::size_t j, const Mechanism& mech) {
  const auto& decl = dag.node(j);
  if (mech.categorical_child() != (decl.kind == NodeKind::Categorical))
    throw IncompatibleFamily("mechanism child kind does not match node '" + decl.name + "'");
  const auto& parents = dag.parents(j);
  const auto& layout = mech.parent_layout();
  if (layout.size() != parents.size())
    throw IncompatibleFamily("mechanism parent count does not match node '" + decl.name + "'");
  for (std::size_t p = 0; p < parents.size(); ++p) {
    const auto& pd = dag.node(parents[p]);
    const int32_t card =
        pd.kind == NodeKind::Categorical ? static_cast<int32_t>(pd.categories.size()) : 0;
    if (layout[p] != card)
      throw IncompatibleFamily("mechanism parent layout does not match node '" + decl.name +
                               "'");
  }
}

}  // namespace

Scm make_scm(Dag dag, std::vector<MechanismPtr> mechanisms) {
  if (mechanisms.size() != dag.size())
    throw InvalidArgument("need exactly one mechanism per node");
  for (std::size_t j = 0; j < dag.size(); ++j) {
    if (!mechanisms[j]) throw InvalidArgument("null mechanism");
    check_mechanism(dag, j, *mechanisms[j]);
  }
  return Scm{std::move(dag), std::move(mechanisms)};
}

Scm compose_hybrid(const Scm& old_scm, const Scm& new_scm, const ChangeSet& t) {
  if (!old_scm.dag.same_structure(new_scm.dag))
    throw GraphMismatch("models have different graphs");
  if (t.node_count() != old_scm.dag.size())
    throw InvalidArgument("change set sized for a different graph");
  Scm out;
  out.dag = old_scm.dag;
  out.mechanisms.reserve(old_scm.mechanisms.size());
  for (std::size_t j = 0; j < old_scm.mechanisms.size(); ++j)
    out.mechanisms.push_back(t.contains(j) ? new_scm.mechanisms[j] : old_scm.mechanisms[j]);
  return out;
}

Table ancestral_sample(const Scm& scm, std::size_t n_draws, uint64_t seed) {
  if (n_draws < 1) throw InvalidArgument("need at least one draw");
  const Dag& dag = scm.dag;
  Table out(dag.nodes(), n_draws);
  const auto& order = dag.topological_order();
  std::vector<double> parent_values;
  for (std::size_t r = 0; r < n_draws; ++r) {
    for (std::size_t j : order) {
      const auto& parents = dag.parents(j);
      parent_values.clear();
      for (std::size_t p : parents) parent_values.push_back(out.real(p, r));
      Rng rng = Rng::stream(seed, static_cast<uint64_t>(j), static_cast<uint64_t>(r));
      out.set(j, r, scm.mechanisms[j]->sample_one(parent_values, rng));
    }
  }
  return out;
}

bool is_linear_gaussian_closure(const Scm& scm, std::size_t target) {
  if (target >= scm.dag.size()) return false;
  for (std::size_t j : scm.dag.ancestral_closure(target)) {
    const auto f = scm.mechanisms[j]->family();
    if (f == Family::GaussianMarginal) continue;
    if (f == Family::LinearGaussianConditional) {
      for (int32_t card : scm.mechanisms[j]->parent_layout())
        if (card != 0) return false;
      continue;
    }
    return false;
  }
  return true;
}

GaussianMoments analytic_marginal_gaussian(const Scm& scm, std::size_t target) {
  if (target >= scm.dag.size()) throw UnknownNode("target index out of range");
  if (!is_linear_gaussian_closure(scm, target))
    throw NonLinearGaussianModel("target's ancestry is not linear-Gaussian");

  const auto closure = scm.dag.ancestral_closure(target);
  std::vector<std::ptrdiff_t> pos(scm.dag.size(), -1);
  for (std::size_t i = 0; i < closure.size(); ++i) pos[closure[i]] = static_cast<std::ptrdiff_t>(i);

  const auto n = static_cast<Eigen::Index>(closure.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);

  // Visit in topological order restricted to the closure; every node is an
  // affine function of already-visited ones plus fresh Gaussian noise.
  for (std::size_t j : scm.dag.topological_order()) {
    if (pos[j] < 0) continue;
    const auto i = static_cast<Eigen::Index>(pos[j]);
    const auto* gauss = dynamic_cast<const GaussianMarginal*>(scm.mechanisms[j].get());
    if (gauss) {
      mu(i) = gauss->mean();
      cov(i, i) = gauss->variance();
      continue;
    }
    const auto* lin = dynamic_cast<const LinearGaussianConditional*>(scm.mechanisms[j].get());
    const auto& parents = scm.dag.parents(j);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    double m = lin->intercept();
    for (std::size_t p = 0; p < parents.size(); ++p) {
      const auto pi = static_cast<Eigen::Index>(pos[parents[p]]);
      w(pi) = lin->weights()[p];
      m += lin->weights()[p] * mu(pi);
    }
    mu(i) = m;
    const Eigen::VectorXd cross = cov * w;
    for (Eigen::Index q = 0; q < n; ++q) {
      cov(i, q) = cross(q);
      cov(q, i) = cross(q);
    }
    cov(i, i) = w.dot(cross) + lin->noise_variance();
  }
  const auto ti = static_cast<Eigen::Index>(pos[target]);
  return GaussianMoments{mu(ti), cov(ti, ti)};
}

namespace {

bool enumerable_mechanism(const Mechanism& mech) {
  return mech.family() == Family::DiscreteCpt ||
         mech.family() == Family::EmpiricalCategoricalMarginal;
}

DiscreteJoint enumerate_over(const Scm& scm, const std::vector<std::size_t>& nodes,
                             std::size_t max_cells) {
  DiscreteJoint joint;
  joint.nodes = nodes;
  std::size_t cells = 1;
  for (std::size_t j : nodes) {
    const auto& decl = scm.dag.node(j);
    if (decl.kind != NodeKind::Categorical)
      throw NotEnumerable("node '" + decl.name + "' is not categorical");
    if (!enumerable_mechanism(*scm.mechanisms[j]))
      throw NotEnumerable("node '" + decl.name + "' has no enumerable mechanism");
    joint.cards.push_back(static_cast<int32_t>(decl.categories.size()));
    cells *= decl.categories.size();
    if (cells > max_cells) throw NotEnumerable("joint grid exceeds the enumeration cap");
  }
  std::vector<std::ptrdiff_t> pos(scm.dag.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<std::ptrdiff_t>(i);
  for (std::size_t j : nodes)
    for (std::size_t p : scm.dag.parents(j))
      if (pos[p] < 0) throw NotEnumerable("node set is not ancestrally closed");

  // Order nodes topologically for the factored product.
  std::vector<std::size_t> order;
  for (std::size_t j : scm.dag.topological_order())
    if (pos[j] >= 0) order.push_back(j);

  joint.probs.assign(cells, 0.0);
  std::vector<double> assignment(nodes.size(), 0.0);
  std::vector<double> parent_values;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    // Decode mixed-radix cell index (first node varies slowest).
    std::size_t rem = cell;
    for (std::size_t i = nodes.size(); i-- > 0;) {
      assignment[i] = static_cast<double>(rem % static_cast<std::size_t>(joint.cards[i]));
      rem /= static_cast<std::size_t>(joint.cards[i]);
    }
    double logp = 0.0;
    for (std::size_t j : order) {
      parent_values.clear();
      for (std::size_t p : scm.dag.parents(j))
        parent_values.push_back(assignment[static_cast<std::size_t>(pos[p])]);
      logp += scm.mechanisms[j]->log_density(assignment[static_cast<std::size_t>(pos[j])],
                                             parent_values);
      if (!std::isfinite(logp)) break;
    }
    joint.probs[cell] = std::isfinite(logp) ? std::exp(logp) : 0.0;
  }
  return joint;
}

}  // namespace

bool is_enumerable_discrete(const Scm& scm, std::size_t target, std::size_t max_cells) {
  if (target >= scm.dag.size()) return false;
  std::size_t cells = 1;
  for (std::size_t j : scm.dag.ancestral_closure(target)) {
    const auto& decl = scm.dag.node(j);
    if (decl.kind != NodeKind::Categorical) return false;
    if (!enumerable_mechanism(*scm.mechanisms[j])) return false;
    cells *= decl.categories.size();
    if (cells > max_cells) return false;
  }
  return true;
}

std::vector<double> enumerate_discrete_marginal(const Scm& scm, std::size_t target,
                                                std::size_t max_cells) {
  if (target >= scm.dag.size()) throw UnknownNode("target index out of range");
  const DiscreteJoint joint =
      enumerate_over(scm, scm.dag.ancestral_closure(target), max_cells);
  return marginal_of(joint, target);
}

DiscreteJoint enumerate_discrete_joint(const Scm& scm, std::size_t max_cells) {
  std::vector<std::size_t> nodes(scm.dag.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) nodes[j] = j;
  return enumerate_over(scm, nodes, max_cells);
}

std::vector<double> marginal_of(const DiscreteJoint& joint, std::size_t node) {
  const auto it = std::find(joint.nodes.begin(), joint.nodes.end(), node);
  if (it == joint.nodes.end()) throw UnknownNode("node not part of the enumerated joint");
  const std::size_t i = static_cast<std::size_t>(it - joint.nodes.begin());

  std::size_t stride = 1;
  for (std::size_t q = joint.nodes.size(); q-- > i + 1;)
    stride *= static_cast<std::size_t>(joint.cards[q]);
  const auto card = static_cast<std::size_t>(joint.cards[i]);

  std::vector<KahanSum> sums(card);
  for (std::size_t cell = 0; cell < joint.probs.size(); ++cell)
    sums[(cell / stride) % card].add(joint.probs[cell]);
  std::vector<double> out(card);
  for (std::size_t c = 0; c < card; ++c) out[c] = sums[c].value();
  return out;
}

std::vector<double> marginalize(const DiscreteJoint& joint,
                                const std::vector<std::size_t>& subset) {
  if (subset.empty()) return {1.0};

  std::vector<std::size_t> pos(subset.size());
  std::vector<std::size_t> stride(subset.size());
  std::vector<std::size_t> card(subset.size());
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const auto it = std::find(joint.nodes.begin(), joint.nodes.end(), subset[s]);
    if (it == joint.nodes.end())
      throw UnknownNode("node not part of the enumerated joint");
    pos[s] = static_cast<std::size_t>(it - joint.nodes.begin());
    card[s] = static_cast<std::size_t>(joint.cards[pos[s]]);
    stride[s] = 1;
    for (std::size_t q = joint.nodes.size(); q-- > pos[s] + 1;)
      stride[s] *= static_cast<std::size_t>(joint.cards[q]);
  }

  std::size_t total = 1;
  for (std::size_t c : card) total *= c;
  std::vector<KahanSum> sums(total);
  for (std::size_t cell = 0; cell < joint.probs.size(); ++cell) {
    std::size_t idx = 0;
    for (std::size_t s = 0; s < subset.size(); ++s)
      idx = idx * card[s] + (cell / stride[s]) % card[s];
    sums[idx].add(joint.probs[cell]);
  }
  std::vector<double> out(total);
  for (std::size_t c = 0; c < total; ++c) out[c] = sums[c].value();
  return out;
}

}  // namespace causalattr
