#pragma once

// Analysis suite over a KnowledgeGraph. PageRank, prestige and the in/out
// degrees use directed edges; everything else runs on the undirected view.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpfo/graph.hpp"

namespace gpfo {

class EmptyGraph : public std::invalid_argument {
 public:
  EmptyGraph() : std::invalid_argument("graph has no nodes") {}
};

struct MetricReport {
  std::string metric;
  std::map<NodeId, double> values;
  std::vector<std::pair<NodeId, double>> top_k;  // descending, ties by NodeId
  bool converged = true;                         // PageRank only
  std::size_t iterations = 0;                    // PageRank only

  double at(std::string_view label) const { return values.at(NodeId::from_label(label)); }
};

/// Full descending order, ties broken by NodeId ascending.
inline std::vector<std::pair<NodeId, double>> ranked(const std::map<NodeId, double>& values) {
  std::vector<std::pair<NodeId, double>> out(values.begin(), values.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

inline MetricReport make_report(std::string metric, std::map<NodeId, double> values, std::size_t k = 10) {
  MetricReport r{std::move(metric), std::move(values), {}};
  r.top_k = ranked(r.values);
  if (r.top_k.size() > k) r.top_k.resize(k);
  return r;
}

namespace detail {

inline std::map<NodeId, double> by_id(const std::vector<NodeId>& ids, const std::vector<double>& v) {
  std::map<NodeId, double> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], v[i]);
  return out;
}

}  // namespace detail

// Degree ---------------------------------------------------------------------

inline MetricReport degree(const KnowledgeGraph& g, std::size_t k = 10) {
  auto v = induced_undirected(g);
  std::vector<double> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = static_cast<double>(v.degree(i));
  return make_report("degree", detail::by_id(v.nodes, d), k);
}

inline MetricReport in_degree(const KnowledgeGraph& g, std::size_t k = 10) {
  std::map<NodeId, double> values;
  for (const auto& [id, n] : g.nodes()) values[id] = 0;
  for (const auto& [key, e] : g.edges()) values[e.dst] += 1;
  return make_report("in_degree", std::move(values), k);
}

inline MetricReport out_degree(const KnowledgeGraph& g, std::size_t k = 10) {
  std::map<NodeId, double> values;
  for (const auto& [id, n] : g.nodes()) values[id] = 0;
  for (const auto& [key, e] : g.edges()) values[e.src] += 1;
  return make_report("out_degree", std::move(values), k);
}

// PageRank -------------------------------------------------------------------

struct PageRankOptions {
  double damping = 0.85;
  double tol = 1e-9;
  std::size_t max_iters = 100;
};

/// Power iteration with uniform teleportation. Dangling mass is spread
/// uniformly each sweep. Parallel relations between one ordered pair count
/// as one link.
inline MetricReport pagerank(const KnowledgeGraph& g, const PageRankOptions& opt = {}, std::size_t k = 10) {
  if (g.empty()) throw EmptyGraph();
  if (!(opt.damping > 0 && opt.damping < 1)) throw std::invalid_argument("damping must be in (0,1)");
  if (!(opt.tol > 0)) throw std::invalid_argument("tol must be positive");
  auto v = directed_view(g);
  const std::size_t n = v.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> x(n, inv_n), next(n);
  bool converged = false;
  std::size_t it = 0;
  while (it < opt.max_iters) {
    ++it;
    double dangling = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (v.out[i].empty()) dangling += x[i];
    const double base = (1.0 - opt.damping) * inv_n + opt.damping * dangling * inv_n;
    std::fill(next.begin(), next.end(), base);
    for (std::size_t i = 0; i < n; ++i) {
      if (v.out[i].empty()) continue;
      const double share = opt.damping * x[i] / static_cast<double>(v.out[i].size());
      for (auto j : v.out[i]) next[j] += share;
    }
    double delta = 0;
    for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - x[i]);
    x.swap(next);
    if (delta < opt.tol) {
      converged = true;
      break;
    }
  }
  double sum = 0;
  for (double xi : x) sum += xi;
  for (double& xi : x) xi /= sum;
  auto r = make_report("pagerank", detail::by_id(v.nodes, x), k);
  r.converged = converged;
  r.iterations = it;
  return r;
}

// Bridging coefficient -------------------------------------------------------

/// BC(v) = (1/deg v) / sum over neighbours u of (1/deg u); 0 when isolated.
inline MetricReport bridging_coefficient(const KnowledgeGraph& g, std::size_t k = 10) {
  auto v = induced_undirected(g);
  std::vector<double> bc(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.degree(i) == 0) continue;
    double denom = 0;
    for (auto u : v.adjacency[i]) denom += 1.0 / static_cast<double>(v.degree(u));
    bc[i] = (1.0 / static_cast<double>(v.degree(i))) / denom;
  }
  return make_report("bridging", detail::by_id(v.nodes, bc), k);
}

// Domain prestige ------------------------------------------------------------

/// Fraction of the other nodes from which v is reachable along directed edges.
inline MetricReport domain_prestige(const KnowledgeGraph& g, std::size_t k = 10) {
  auto v = directed_view(g);
  const std::size_t n = v.size();
  std::vector<double> p(n, 0.0);
  if (n >= 2) {
    std::vector<char> seen(n);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
      std::fill(seen.begin(), seen.end(), 0);
      seen[s] = 1;
      stack.assign(1, s);
      std::size_t reached = 0;
      while (!stack.empty()) {
        auto w = stack.back();
        stack.pop_back();
        for (auto u : v.in[w]) {
          if (seen[u]) continue;
          seen[u] = 1;
          ++reached;
          stack.push_back(u);
        }
      }
      p[s] = static_cast<double>(reached) / static_cast<double>(n - 1);
    }
  }
  return make_report("prestige", detail::by_id(v.nodes, p), k);
}

// Clustering -----------------------------------------------------------------

inline MetricReport clustering_coefficients(const KnowledgeGraph& g, std::size_t k = 10) {
  auto v = induced_undirected(g);
  std::vector<double> c(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& adj = v.adjacency[i];
    const auto d = adj.size();
    if (d < 2) continue;
    std::size_t links = 0;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a + 1; b < d; ++b)
        if (std::binary_search(v.adjacency[adj[a]].begin(), v.adjacency[adj[a]].end(), adj[b])) ++links;
    c[i] = 2.0 * static_cast<double>(links) / static_cast<double>(d * (d - 1));
  }
  return make_report("clustering", detail::by_id(v.nodes, c), k);
}

// Betweenness ----------------------------------------------------------------

/// Brandes accumulation on the undirected view, unnormalized; each unordered
/// pair contributes once.
inline MetricReport betweenness(const KnowledgeGraph& g, std::size_t k = 10) {
  auto v = induced_undirected(g);
  const std::size_t n = v.size();
  std::vector<double> cb(n, 0.0);
  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  std::vector<std::size_t> order;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    for (auto& p : pred) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    order.clear();
    sigma[s] = 1;
    dist[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      auto w = queue.front();
      queue.pop_front();
      order.push_back(w);
      for (auto u : v.adjacency[w]) {
        if (dist[u] < 0) {
          dist[u] = dist[w] + 1;
          queue.push_back(u);
        }
        if (dist[u] == dist[w] + 1) {
          sigma[u] += sigma[w];
          pred[u].push_back(w);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto w = *it;
      for (auto p : pred[w]) delta[p] += sigma[p] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  for (double& x : cb) x /= 2.0;
  return make_report("betweenness", detail::by_id(v.nodes, cb), k);
}

// Components and paths -------------------------------------------------------

namespace detail {

/// Component index lists over the undirected view, largest first, ties by
/// smallest member.
inline std::vector<std::vector<std::size_t>> component_indices(const UndirectedView& v) {
  std::vector<std::vector<std::size_t>> comps;
  std::vector<char> seen(v.size(), 0);
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp{s};
    seen[s] = 1;
    for (std::size_t h = 0; h < comp.size(); ++h)
      for (auto u : v.adjacency[comp[h]])
        if (!seen[u]) {
          seen[u] = 1;
          comp.push_back(u);
        }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

inline std::vector<NodeId> ids_of(const UndirectedView& v, const std::vector<std::size_t>& idx) {
  std::vector<NodeId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v.nodes[i]);
  return out;
}

}  // namespace detail

inline std::vector<std::vector<NodeId>> connected_components(const KnowledgeGraph& g) {
  auto v = induced_undirected(g);
  std::vector<std::vector<NodeId>> out;
  for (const auto& c : detail::component_indices(v)) out.push_back(detail::ids_of(v, c));
  return out;
}

/// Hop count -> number of unordered node pairs at that distance, within the
/// largest connected component.
inline std::map<std::size_t, std::size_t> path_length_histogram(const KnowledgeGraph& g) {
  auto v = induced_undirected(g);
  std::map<std::size_t, std::size_t> hist;
  auto comps = detail::component_indices(v);
  if (comps.empty()) return hist;
  const auto& comp = comps.front();
  std::vector<long> dist(v.size());
  for (auto s : comp) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      auto w = queue.front();
      queue.pop_front();
      for (auto u : v.adjacency[w])
        if (dist[u] < 0) {
          dist[u] = dist[w] + 1;
          queue.push_back(u);
        }
    }
    for (auto t : comp)
      if (t > s) ++hist[static_cast<std::size_t>(dist[t])];
  }
  return hist;
}

// Communities ----------------------------------------------------------------

struct Community {
  std::vector<NodeId> members;  // sorted
  NodeId central;               // highest degree, ties by NodeId

  friend bool operator==(const Community&, const Community&) = default;
};

namespace detail {

inline double modularity_of(const UndirectedView& v, const std::vector<std::size_t>& label) {
  if (v.link_count == 0) return 0.0;
  const double two_m = 2.0 * static_cast<double>(v.link_count);
  std::map<std::size_t, double> inside, total;
  for (std::size_t i = 0; i < v.size(); ++i) {
    total[label[i]] += static_cast<double>(v.degree(i));
    for (auto j : v.adjacency[i])
      if (label[i] == label[j]) inside[label[i]] += 1.0;
  }
  double q = 0;
  for (const auto& [c, t] : total) q += inside[c] / two_m - (t / two_m) * (t / two_m);
  return q;
}

/// Greedy agglomeration (Clauset-Newman-Moore): repeatedly merge the pair of
/// adjacent communities with the largest modularity gain
/// dQ = 2 (e_ij - a_i a_j); ties go to the lexicographically smallest pair of
/// community ids. A community's id is its smallest member index.
inline std::vector<std::size_t> greedy_modularity_labels(const UndirectedView& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  if (v.link_count == 0) return label;
  const double two_m = 2.0 * static_cast<double>(v.link_count);
  std::map<std::size_t, std::map<std::size_t, double>> e;  // e[i][j], i != j
  std::map<std::size_t, double> a;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<double>(v.degree(i)) / two_m;
    for (auto j : v.adjacency[i]) e[i][j] += 1.0 / two_m;
  }
  while (true) {
    double best = 0;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (const auto& [i, row] : e)
      for (const auto& [j, eij] : row) {
        if (j <= i) continue;
        double dq = 2.0 * (eij - a[i] * a[j]);
        if (dq > best + 1e-15) {
          best = dq;
          bi = i;
          bj = j;
          found = true;
        }
      }
    if (!found) break;
    // fold bj into bi
    auto row_j = std::move(e[bj]);
    e.erase(bj);
    for (const auto& [k, ejk] : row_j) {
      if (k == bi) continue;
      e[bi][k] += ejk;
      e[k][bi] += ejk;
      e[k].erase(bj);
    }
    e[bi].erase(bj);
    a[bi] += a[bj];
    a.erase(bj);
    for (auto& l : label)
      if (l == bj) l = bi;
  }
  return label;
}

}  // namespace detail

/// Modularity of a node partition on the undirected view.
inline double modularity(const KnowledgeGraph& g, const std::vector<std::vector<NodeId>>& partition) {
  auto v = induced_undirected(g);
  std::vector<std::size_t> label(v.size(), 0);
  for (std::size_t c = 0; c < partition.size(); ++c)
    for (const auto& id : partition[c]) label.at(*v.index_of(id)) = c;
  return detail::modularity_of(v, label);
}

/// Deterministic greedy modularity communities. When the greedy partition
/// scores below the connected-component partition, the latter is returned.
inline std::vector<Community> communities(const KnowledgeGraph& g) {
  auto v = induced_undirected(g);
  auto label = detail::greedy_modularity_labels(v);
  std::vector<std::size_t> comp_label(v.size());
  {
    auto comps = detail::component_indices(v);
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (auto i : comps[c]) comp_label[i] = comps[c].front();
  }
  if (detail::modularity_of(v, label) < detail::modularity_of(v, comp_label)) label = comp_label;

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < v.size(); ++i) groups[label[i]].push_back(i);
  std::vector<std::vector<std::size_t>> ordered;
  for (auto& [l, members] : groups) ordered.push_back(std::move(members));
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<Community> out;
  for (const auto& members : ordered) {
    std::size_t central = members.front();
    for (auto i : members)
      if (v.degree(i) > v.degree(central)) central = i;
    out.push_back(Community{detail::ids_of(v, members), v.nodes[central]});
  }
  return out;
}

// Summary ----------------------------------------------------------------------

inline constexpr std::size_t kClusteringBins = 10;

struct GraphSummary {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::map<std::size_t, std::size_t> degree_histogram;
  std::vector<std::size_t> clustering_histogram;  // kClusteringBins bins over [0,1]; empty for an empty graph
  MetricReport betweenness;
  std::map<std::size_t, std::size_t> path_length_histogram;
  std::vector<std::vector<NodeId>> components;
  std::vector<Community> communities;
};

inline std::size_t clustering_bin(double c) {
  auto b = static_cast<std::size_t>(std::floor(c * static_cast<double>(kClusteringBins)));
  return std::min(b, kClusteringBins - 1);
}

inline GraphSummary summarize(const KnowledgeGraph& g, std::size_t k = 10) {
  GraphSummary s;
  s.node_count = g.node_count();
  s.edge_count = g.edge_count();
  for (const auto& [id, d] : degree(g).values) ++s.degree_histogram[static_cast<std::size_t>(d)];
  if (!g.empty()) {
    s.clustering_histogram.assign(kClusteringBins, 0);
    for (const auto& [id, c] : clustering_coefficients(g).values) ++s.clustering_histogram[clustering_bin(c)];
  }
  s.betweenness = betweenness(g, k);
  s.path_length_histogram = path_length_histogram(g);
  s.components = connected_components(g);
  s.communities = communities(g);
  return s;
}

// Serialization ------------------------------------------------------------------

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [id, x] : r.values) values[id.key] = x;
  auto top = nlohmann::json::array();
  for (const auto& [id, x] : r.top_k) top.push_back({{"node", id.key}, {"value", x}});
  nlohmann::json j{{"metric", r.metric}, {"values", std::move(values)}, {"top_k", std::move(top)}};
  if (r.metric == "pagerank") {
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
  }
  return j;
}

inline nlohmann::json to_json(const GraphSummary& s) {
  auto hist = [](const std::map<std::size_t, std::size_t>& h) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, c] : h) j[std::to_string(k)] = c;
    return j;
  };
  auto ids = [](const std::vector<NodeId>& v) {
    auto j = nlohmann::json::array();
    for (const auto& id : v) j.push_back(id.key);
    return j;
  };
  auto comps = nlohmann::json::array();
  for (const auto& c : s.components) comps.push_back(ids(c));
  auto comms = nlohmann::json::array();
  for (const auto& c : s.communities) comms.push_back({{"members", ids(c.members)}, {"central", c.central.key}});
  return {{"node_count", s.node_count},
          {"edge_count", s.edge_count},
          {"degree_histogram", hist(s.degree_histogram)},
          {"clustering_histogram", s.clustering_histogram},
          {"betweenness", to_json(s.betweenness)},
          {"path_length_histogram", hist(s.path_length_histogram)},
          {"components", std::move(comps)},
          {"communities", std::move(comms)}};
}

/// Plain-text table: one column per metric, one row per rank, cells are
/// display labels.
inline std::string format_table(const KnowledgeGraph& g, const std::vector<MetricReport>& reports,
                                bool with_values = false) {
  std::vector<std::vector<std::string>> cols;
  std::size_t rows = 0;
  for (const auto& r : reports) {
    std::vector<std::string> col{r.metric};
    for (const auto& [id, x] : r.top_k) {
      const auto* n = g.find_node(id);
      std::string cell = n ? n->display : id.key;
      if (with_values) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " (%.4g)", x);
        cell += buf;
      }
      col.push_back(std::move(cell));
    }
    rows = std::max(rows, col.size());
    cols.push_back(std::move(col));
  }
  std::vector<std::size_t> width;
  for (const auto& c : cols) {
    std::size_t w = 0;
    for (const auto& cell : c) w = std::max(w, text::utf8_count(cell));
    width.push_back(w);
  }
  std::string out;
  auto rule = [&] {
    out += '+';
    for (auto w : width) out += std::string(w + 2, '-') + '+';
    out += '\n';
  };
  rule();
  for (std::size_t r = 0; r < rows; ++r) {
    out += '|';
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string cell = r < cols[c].size() ? cols[c][r] : std::string{};
      out += ' ' + cell + std::string(width[c] - text::utf8_count(cell), ' ') + " |";
    }
    out += '\n';
    if (r == 0) rule();
  }
  rule();
  return out;
}

}  // namespace gpfo
