#pragma once

// Typed, directed, provenance-tagged concept graph.

#include <algorithm>
#include <cassert>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gpfo/reasoning_format.hpp"
#include "gpfo/text.hpp"

namespace gpfo {

/// Normalized concept label (lowercased, trimmed, markup stripped).
struct NodeId {
  std::string key;

  static NodeId from_label(std::string_view label) { return NodeId{text::label_key(label)}; }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// Which session and growth step introduced an element.
struct StepRef {
  std::string session_id;
  std::uint32_t step_index = 0;

  friend auto operator<=>(const StepRef&, const StepRef&) = default;
  friend bool operator==(const StepRef&, const StepRef&) = default;
};

using Provenance = std::set<StepRef>;

struct Node {
  NodeId id;
  std::string display;
  Provenance provenance;

  friend bool operator==(const Node&, const Node&) = default;
};

struct EdgeKey {
  NodeId src;
  NodeId dst;
  std::string relation;

  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
};

struct Edge {
  NodeId src;
  NodeId dst;
  std::string relation;
  std::string note;
  Provenance provenance;

  EdgeKey key() const { return EdgeKey{src, dst, relation}; }
  bool self_loop() const { return src == dst; }

  friend bool operator==(const Edge&, const Edge&) = default;
};

class KnowledgeGraph {
 public:
  using NodeMap = std::map<NodeId, Node>;
  using EdgeMap = std::map<EdgeKey, Edge>;

  /// Inserts or merges a node. The first display label wins.
  const Node& add_node(std::string_view label, const Provenance& provenance) {
    auto id = NodeId::from_label(label);
    auto [it, inserted] = nodes_.try_emplace(id, Node{id, text::display_label(label), {}});
    it->second.provenance.insert(provenance.begin(), provenance.end());
    return it->second;
  }

  /// Inserts a node under an explicit id, for readers that persist ids.
  const Node& add_node(const NodeId& id, std::string_view display, const Provenance& provenance) {
    auto [it, inserted] = nodes_.try_emplace(id, Node{id, std::string(display), {}});
    it->second.provenance.insert(provenance.begin(), provenance.end());
    return it->second;
  }

  /// Inserts or merges an edge between existing or new nodes. A note is kept
  /// from the first insertion that carried one.
  const Edge& add_edge(std::string_view src_label, std::string_view relation,
                       std::string_view dst_label, std::string_view note,
                       const Provenance& provenance) {
    const auto& s = add_node(src_label, provenance);
    const auto& d = add_node(dst_label, provenance);
    return add_edge(s.id, d.id, relation, note, provenance);
  }

  const Edge& add_edge(const NodeId& src, const NodeId& dst, std::string_view relation,
                       std::string_view note, const Provenance& provenance) {
    assert(nodes_.count(src) && nodes_.count(dst));
    EdgeKey key{src, dst, text::canonical_relation(relation)};
    auto [it, inserted] = edges_.try_emplace(key, Edge{src, dst, key.relation, std::string(note), {}});
    if (it->second.note.empty() && !note.empty()) it->second.note = std::string(note);
    it->second.provenance.insert(provenance.begin(), provenance.end());
    debug_check();
    return it->second;
  }

  void insert(const Triple& t, const StepRef& step) {
    add_edge(t.subject, t.relation, t.object, t.note, Provenance{step});
  }

  /// Unites `incoming` into this graph: nodes by id, edges by
  /// (src, dst, relation), provenance sets united.
  void merge_in(const KnowledgeGraph& incoming) {
    for (const auto& [id, node] : incoming.nodes_) add_node(id, node.display, node.provenance);
    for (const auto& [key, edge] : incoming.edges_) {
      auto [it, inserted] = edges_.try_emplace(key, edge);
      if (!inserted) {
        if (it->second.note.empty()) it->second.note = edge.note;
        it->second.provenance.insert(edge.provenance.begin(), edge.provenance.end());
      }
    }
    debug_check();
  }

  const NodeMap& nodes() const { return nodes_; }
  const EdgeMap& edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  const Node* find_node(const NodeId& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }
  const Node* find_node(std::string_view label) const { return find_node(NodeId::from_label(label)); }

  std::vector<const Edge*> self_loops() const {
    std::vector<const Edge*> out;
    for (const auto& [k, e] : edges_)
      if (e.self_loop()) out.push_back(&e);
    return out;
  }

  /// No dangling edges, and every element carries provenance.
  bool check_invariants() const {
    for (const auto& [id, n] : nodes_)
      if (n.provenance.empty() || !(n.id == id)) return false;
    for (const auto& [k, e] : edges_) {
      if (!nodes_.count(e.src) || !nodes_.count(e.dst)) return false;
      if (e.provenance.empty() || !(e.key() == k)) return false;
    }
    return true;
  }

  /// Every step that contributed to the graph.
  Provenance steps() const {
    Provenance out;
    for (const auto& [id, n] : nodes_) out.insert(n.provenance.begin(), n.provenance.end());
    for (const auto& [k, e] : edges_) out.insert(e.provenance.begin(), e.provenance.end());
    return out;
  }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  void debug_check() const {
#ifndef NDEBUG
    for (const auto& [k, e] : edges_) assert(nodes_.count(e.src) && nodes_.count(e.dst));
#endif
  }

  NodeMap nodes_;
  EdgeMap edges_;
};

/// One node per distinct normalized label, one edge per distinct
/// (src, dst, relation); every element tagged with `step`.
inline KnowledgeGraph from_triples(std::span<const Triple> triples, const StepRef& step) {
  KnowledgeGraph g;
  for (const auto& t : triples) g.insert(t, step);
  return g;
}

inline KnowledgeGraph merge(const KnowledgeGraph& base, const KnowledgeGraph& incoming) {
  KnowledgeGraph out = base;
  out.merge_in(incoming);
  return out;
}

/// The elements carrying `step`, with provenance narrowed to that step.
inline KnowledgeGraph filter_by_step(const KnowledgeGraph& g, const StepRef& step) {
  KnowledgeGraph out;
  Provenance only{step};
  for (const auto& [id, n] : g.nodes())
    if (n.provenance.count(step)) out.add_node(id, n.display, only);
  for (const auto& [k, e] : g.edges())
    if (e.provenance.count(step)) out.add_edge(e.src, e.dst, e.relation, e.note, only);
  return out;
}

/// Equality on node ids, edge keys and provenance; display labels and notes
/// are ignored (they follow first-writer-wins and so depend on merge order).
inline bool same_structure(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  if (a.node_count() != b.node_count() || a.edge_count() != b.edge_count()) return false;
  for (auto ia = a.nodes().begin(), ib = b.nodes().begin(); ia != a.nodes().end(); ++ia, ++ib) {
    if (!(ia->first == ib->first) || ia->second.provenance != ib->second.provenance) return false;
  }
  for (auto ia = a.edges().begin(), ib = b.edges().begin(); ia != a.edges().end(); ++ia, ++ib) {
    if (!(ia->first == ib->first) || ia->second.provenance != ib->second.provenance) return false;
  }
  return true;
}

/// Simple undirected view: one link per unordered node pair joined by at
/// least one directed edge. Self-loops are excluded and listed.
struct UndirectedView {
  std::vector<NodeId> nodes;                      // sorted by id
  std::vector<std::vector<std::size_t>> adjacency;  // sorted neighbor indices
  std::size_t link_count = 0;
  std::vector<NodeId> self_loops;  // nodes whose self-loops were dropped

  std::size_t size() const { return nodes.size(); }
  std::size_t degree(std::size_t v) const { return adjacency[v].size(); }

  std::optional<std::size_t> index_of(const NodeId& id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || !(*it == id)) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  }
};

inline UndirectedView induced_undirected(const KnowledgeGraph& g) {
  UndirectedView view;
  view.nodes.reserve(g.node_count());
  for (const auto& [id, n] : g.nodes()) view.nodes.push_back(id);
  view.adjacency.resize(view.nodes.size());
  std::set<std::pair<std::size_t, std::size_t>> links;
  std::set<NodeId> loops;
  for (const auto& [k, e] : g.edges()) {
    if (e.self_loop()) {
      loops.insert(e.src);
      continue;
    }
    auto a = *view.index_of(e.src);
    auto b = *view.index_of(e.dst);
    links.emplace(std::min(a, b), std::max(a, b));
  }
  for (auto [a, b] : links) {
    view.adjacency[a].push_back(b);
    view.adjacency[b].push_back(a);
  }
  for (auto& adj : view.adjacency) std::sort(adj.begin(), adj.end());
  view.link_count = links.size();
  view.self_loops.assign(loops.begin(), loops.end());
  return view;
}

/// Directed simple adjacency (parallel relations collapsed), indices aligned
/// with the sorted node order. Self-loops are kept.
struct DirectedView {
  std::vector<NodeId> nodes;
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::vector<std::size_t>> in;

  std::size_t size() const { return nodes.size(); }
};

inline DirectedView directed_view(const KnowledgeGraph& g) {
  DirectedView view;
  std::map<NodeId, std::size_t> index;
  for (const auto& [id, n] : g.nodes()) {
    index.emplace(id, view.nodes.size());
    view.nodes.push_back(id);
  }
  view.out.resize(view.nodes.size());
  view.in.resize(view.nodes.size());
  std::set<std::pair<std::size_t, std::size_t>> arcs;
  for (const auto& [k, e] : g.edges()) arcs.emplace(index.at(e.src), index.at(e.dst));
  for (auto [a, b] : arcs) {
    view.out[a].push_back(b);
    view.in[b].push_back(a);
  }
  return view;
}

}  // namespace gpfo
