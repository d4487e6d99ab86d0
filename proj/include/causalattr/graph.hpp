#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace causalattr {

enum class NodeKind { Continuous, Categorical };

struct NodeDecl {
  std::string name;
  NodeKind kind = NodeKind::Continuous;
  // Category labels, in declaration order. Empty for continuous nodes.
  std::vector<std::string> categories;
};

// Directed acyclic graph over named nodes. Node indices follow declaration
// order and are stable for the lifetime of the object.
class Dag {
 public:
  Dag() = default;
  Dag(std::vector<NodeDecl> nodes, std::vector<std::pair<std::string, std::string>> edges);

  std::size_t size() const { return nodes_.size(); }
  const NodeDecl& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<NodeDecl>& nodes() const { return nodes_; }

  // Throws UnknownNode if absent.
  std::size_t index_of(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;

  // Parent indices in declaration order of the parent nodes.
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }
  bool is_root(std::size_t i) const { return parents_[i].empty(); }

  // Kahn order; ties broken by declaration index so the order is unique.
  const std::vector<std::size_t>& topological_order() const { return topo_; }

  // i plus everything i depends on, as sorted node indices.
  std::vector<std::size_t> ancestral_closure(std::size_t i) const;

  bool same_structure(const Dag& other) const;

 private:
  std::vector<NodeDecl> nodes_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
};

// Text format, one declaration per line:
//   node <name> continuous
//   node <name> categorical <c1,c2,...>
//   <parent> -> <child>
// Blank lines and lines starting with '#' are skipped. Edges may reference
// only declared nodes; duplicates of either kind are rejected.
Dag parse_graph(std::istream& in);
Dag load_graph(const std::string& path);
void render_graph(const Dag& dag, std::ostream& out);
std::string render_graph(const Dag& dag);

}  // namespace causalattr
