#include "causalattr/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "causalattr/errors.hpp"

namespace causalattr {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  return out;
}

}  // namespace

Dag::Dag(std::vector<NodeDecl> nodes,
         std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)) {
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!by_name.emplace(nodes_[i].name, i).second)
      throw DuplicateNode("duplicate node '" + nodes_[i].name + "'");
  }
  parents_.assign(nodes_.size(), {});
  children_.assign(nodes_.size(), {});
  std::unordered_set<std::string> seen_edges;
  for (const auto& [from, to] : edges) {
    const auto f = by_name.find(from);
    const auto t = by_name.find(to);
    if (f == by_name.end())
      throw DanglingEdge("edge references undeclared node '" + from + "'");
    if (t == by_name.end())
      throw DanglingEdge("edge references undeclared node '" + to + "'");
    if (!seen_edges.insert(from + "\x1f" + to).second)
      throw DanglingEdge("duplicate edge '" + from + " -> " + to + "'");
    if (f->second == t->second)
      throw CycleDetected("self-loop on '" + from + "'");
    parents_[t->second].push_back(f->second);
    children_[f->second].push_back(t->second);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  for (auto& c : children_) std::sort(c.begin(), c.end());

  // Kahn's algorithm; the min-heap makes the order deterministic.
  std::vector<std::size_t> indegree(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) indegree[i] = parents_[i].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (indegree[i] == 0) ready.push(i);
  topo_.reserve(nodes_.size());
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    topo_.push_back(i);
    for (std::size_t c : children_[i])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (topo_.size() != nodes_.size()) throw CycleDetected("graph contains a cycle");
}

std::size_t Dag::index_of(const std::string& name) const {
  const auto i = find(name);
  if (!i) throw UnknownNode("unknown node '" + name + "'");
  return *i;
}

std::optional<std::size_t> Dag::find(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::size_t> Dag::ancestral_closure(std::size_t i) const {
  std::vector<bool> in(nodes_.size(), false);
  std::vector<std::size_t> stack{i};
  in[i] = true;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for (std::size_t p : parents_[cur]) {
      if (!in[p]) {
        in[p] = true;
        stack.push_back(p);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < nodes_.size(); ++j)
    if (in[j]) out.push_back(j);
  return out;
}

bool Dag::same_structure(const Dag& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name != other.nodes_[i].name) return false;
    if (nodes_[i].kind != other.nodes_[i].kind) return false;
    if (nodes_[i].categories != other.nodes_[i].categories) return false;
    if (parents_[i] != other.parents_[i]) return false;
  }
  return true;
}

Dag parse_graph(std::istream& in) {
  std::vector<NodeDecl> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("node ", 0) == 0) {
      std::stringstream ss(line);
      std::string kw, name, kind;
      ss >> kw >> name >> kind;
      if (name.empty() || kind.empty())
        throw ParseError(lineno, "node line needs a name and a kind");
      NodeDecl decl;
      decl.name = name;
      if (kind == "continuous") {
        decl.kind = NodeKind::Continuous;
        std::string rest;
        if (ss >> rest)
          throw ParseError(lineno, "continuous node takes no category list");
      } else if (kind == "categorical") {
        decl.kind = NodeKind::Categorical;
        std::string rest;
        std::getline(ss, rest);
        rest = trim(rest);
        if (rest.empty())
          throw ParseError(lineno, "categorical node needs a category list");
        decl.categories = split_commas(rest);
        for (const auto& c : decl.categories)
          if (c.empty()) throw ParseError(lineno, "empty category label");
        std::unordered_set<std::string> uniq(decl.categories.begin(),
                                             decl.categories.end());
        if (uniq.size() != decl.categories.size())
          throw ParseError(lineno, "repeated category label");
        if (decl.categories.size() < 2)
          throw ParseError(lineno, "categorical node needs at least two categories");
      } else {
        throw ParseError(lineno, "kind must be continuous or categorical");
      }
      nodes.push_back(std::move(decl));
      continue;
    }
    const auto arrow = line.find("->");
    if (arrow == std::string::npos)
      throw ParseError(lineno, "expected a node declaration or an edge");
    const std::string from = trim(line.substr(0, arrow));
    const std::string to = trim(line.substr(arrow + 2));
    if (from.empty() || to.empty())
      throw ParseError(lineno, "edge needs a node on both sides");
    // Declaration-before-use is a file-format rule, so report it with the
    // offending line rather than deferring to the Dag constructor.
    for (const auto& name : {from, to}) {
      bool declared = false;
      for (const auto& n : nodes)
        if (n.name == name) declared = true;
      if (!declared)
        throw ParseError(lineno, "edge references undeclared node '" + name + "'");
    }
    edges.emplace_back(from, to);
  }
  return Dag(std::move(nodes), std::move(edges));
}

Dag load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file '" + path + "'");
  return parse_graph(in);
}

void render_graph(const Dag& dag, std::ostream& out) {
  for (std::size_t i = 0; i < dag.size(); ++i) {
    const auto& n = dag.node(i);
    out << "node " << n.name << ' ';
    if (n.kind == NodeKind::Continuous) {
      out << "continuous\n";
    } else {
      out << "categorical ";
      for (std::size_t c = 0; c < n.categories.size(); ++c) {
        if (c) out << ',';
        out << n.categories[c];
      }
      out << '\n';
    }
  }
  for (std::size_t i = 0; i < dag.size(); ++i)
    for (std::size_t c : dag.children(i))
      out << dag.node(i).name << " -> " << dag.node(c).name << '\n';
}

std::string render_graph(const Dag& dag) {
  std::ostringstream ss;
  render_graph(dag, ss);
  return ss.str();
}

}  // namespace causalattr
