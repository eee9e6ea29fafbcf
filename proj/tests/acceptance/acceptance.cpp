// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gpfo/cli.hpp"
#include "gpfo/engine.hpp"
#include "gpfo/garden.hpp"
#include "gpfo/gin.hpp"
#include "gpfo/graph_io.hpp"
#include "gpfo/metrics.hpp"
#include "support/gin_support.hpp"
#include "support/metric_oracles.hpp"
#include "support/parser_golden.hpp"
#include "support/random_graph.hpp"
#include "support/session_fixture.hpp"

using namespace gpfo;
using namespace gpfo::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

Outcome parser_golden() {
  Outcome o;
  auto t0 = Clock::now();
  auto triples = parse_graph_block(read_fixture("fixtures/music_graph_block.txt"));
  auto pattern = parse_pattern_block(read_fixture("fixtures/song_pattern_block.txt"));
  double dt = seconds_since(t0);
  auto golden = golden_music_triples();
  o.require(triples == golden, "music triples differ from the golden set (" + std::to_string(triples.size()) + " vs " +
                                   std::to_string(golden.size()) + ")");
  auto c = count_relations(pattern);
  o.require(c.arrows == 8 && c.conditionals == 1 && c.not_equal == 1,
            "song pattern counts " + std::to_string(c.arrows) + "/" + std::to_string(c.conditionals) + "/" +
                std::to_string(c.not_equal));
  o.require(dt < 1.0, "parse took " + fmt("%.3f s", dt));
  if (o.pass)
    o.detail = std::to_string(triples.size()) + " triples exact; 8 ARROW, 1 conditional, 1 NOT-EQUAL; " + fmt("%.4f s", dt);
  return o;
}

Outcome gin_iteration0() {
  Outcome o;
  std::ostringstream out, err;
  int code = cli::dispatch({"gin-demo", "--seed", "2"}, out, err);
  auto golden = read_fixture("golden/gin_demo_iteration0.txt");
  o.require(code == 0, "gin-demo exited " + std::to_string(code));
  o.require(out.str().compare(0, golden.size(), golden) == 0, "iteration-0 table differs from the published one");
  if (o.pass) o.detail = "10 rows identical to the published table";
  return o;
}

Outcome gin_alignment() {
  Outcome o;
  auto t0 = Clock::now();
  auto [g1, g2] = gin::build_equation_graphs();
  gin::FitResult fit;
  try {
    fit = gin::fit_alignment(g1, g2, gin::equation_matching(), gin::FitOptions{});
  } catch (const gin::BudgetExhausted& e) {
    o.require(false, "no seed converged; best residual " + fmt("%.3e", e.best().residual));
    return o;
  }
  double dt = seconds_since(t0);
  auto t1 = gin::gin_step(g1, fit.model, gin::initial_table(g1));
  auto t2 = gin::gin_step(g2, fit.model, gin::initial_table(g2));
  double gdiff = std::sqrt(gin::squared_distance(t1.graph_embedding, t2.graph_embedding));
  o.require(fit.residual < 1e-2, "residual " + fmt("%.3e", fit.residual));
  o.require(gdiff < 2e-2, "graph-embedding difference " + fmt("%.3e", gdiff));
  o.require(dt < 60.0, "fit took " + fmt("%.1f s", dt));
  if (o.pass)
    o.detail = "seed " + std::to_string(fit.seed) + ", residual " + fmt("%.2e", fit.residual) + ", |dG| " +
               fmt("%.2e", gdiff) + ", " + fmt("%.1f s", dt);
  return o;
}

/// Isomorphism classes of every graph on n nodes by orbit enumeration under
/// all n! relabelings.
std::vector<int> orbit_classes(std::size_t n) {
  const std::size_t pairs = n * (n - 1) / 2;
  const std::uint32_t masks = 1u << pairs;
  std::vector<std::vector<std::size_t>> bit(n, std::vector<std::size_t>(n, 0));
  std::size_t b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++b) bit[i][j] = bit[j][i] = b;
  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    std::vector<std::size_t> map(pairs);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) map[bit[i][j]] = bit[perm[i]][perm[j]];
    perms.push_back(std::move(map));
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<int> cls(masks, -1);
  int next = 0;
  for (std::uint32_t m = 0; m < masks; ++m) {
    if (cls[m] >= 0) continue;
    for (const auto& map : perms) {
      std::uint32_t image = 0;
      for (std::size_t k = 0; k < pairs; ++k)
        if (m & (1u << k)) image |= 1u << map[k];
      cls[image] = next;
    }
    ++next;
  }
  return cls;
}

Outcome wl_gin_soundness() {
  Outcome o;
  std::mt19937_64 rng(2025);
  const int pairs = 600;
  for (int trial = 0; trial < pairs && o.pass; ++trial) {
    std::size_t n = 1 + trial % 8;
    auto g = random_gin_graph(rng, n, 0.1 + 0.1 * (trial % 7));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto h = relabel(g, perm);
    o.require(wl_refinement(g, n) == wl_refinement(h, n), "WL separated a relabeled pair at trial " + std::to_string(trial));
    auto model = random_model(rng);
    auto a = gin::gin_step(g, model, gin::initial_table(g)).node;
    auto c = gin::gin_step(h, model, gin::initial_table(h)).node;
    std::sort(a.begin(), a.end());
    std::sort(c.begin(), c.end());
    double worst = 0;
    for (std::size_t v = 0; v < n; ++v) worst = std::max(worst, gin::squared_distance(a[v], c[v]));
    o.require(worst < 1e-24, "GIN multisets differ at trial " + std::to_string(trial));
  }
  std::size_t classes_total = 0, graphs_total = 0, split = 0;
  for (std::size_t n = 1; n <= 6 && o.pass; ++n) {
    auto cls = orbit_classes(n);
    std::map<int, std::vector<std::uint64_t>> colour_of_class;
    std::map<std::vector<std::uint64_t>, std::set<int>> classes_of_colour;
    for (std::uint32_t m = 0; m < cls.size(); ++m) {
      auto colours = wl_refinement(graph_from_mask(n, m), n);
      auto [it, fresh] = colour_of_class.emplace(cls[m], colours);
      o.require(fresh || it->second == colours,
                "WL separated isomorphic graphs on " + std::to_string(n) + " nodes (mask " + std::to_string(m) + ")");
      classes_of_colour[colours].insert(cls[m]);
    }
    for (const auto& [c, set] : classes_of_colour)
      if (set.size() > 1) split += set.size() - 1;
    classes_total += colour_of_class.size();
    graphs_total += cls.size();
  }
  // the brute-force oracle itself agrees with the orbit classes on sampled pairs
  std::uniform_int_distribution<std::uint32_t> pick(0, (1u << 10) - 1);
  auto cls5 = orbit_classes(5);
  for (int k = 0; k < 300 && o.pass; ++k) {
    auto a = pick(rng), b = pick(rng);
    o.require(isomorphic_bruteforce(graph_from_mask(5, a), graph_from_mask(5, b)) == (cls5[a] == cls5[b]),
              "brute-force permutation search disagrees with orbit classes");
  }
  if (o.pass)
    o.detail = std::to_string(pairs) + " relabeled pairs (n<=8); all " + std::to_string(graphs_total) +
               " graphs with n<=6 in " + std::to_string(classes_total) + " isomorphism classes, no class split; " +
               std::to_string(split) + " WL collisions between non-isomorphic classes";
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  auto t0 = Clock::now();
  std::mt19937_64 rng(42);
  int pr_graphs = 0, prestige_graphs = 0, btw_graphs = 0, bridge_graphs = 0;
  double worst_pr = 0, worst_sum = 0;
  for (int trial = 0; trial < 250; ++trial, ++pr_graphs) {
    std::size_t n = 1 + trial % 10;
    auto g = random_digraph(rng, n, 0.1 + 0.05 * (trial % 9), true);
    auto r = pagerank(g, {0.85, 1e-13, 2000});
    auto oracle = pagerank_oracle(adjacency_matrix(g, n), 0.85);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = r.values.at(NodeId{vname(i)});
      worst_pr = std::max(worst_pr, std::abs(x - oracle[i]));
      sum += x;
    }
    auto defaults = pagerank(g);
    double dsum = 0;
    for (const auto& [id, x] : defaults.values) dsum += x;
    worst_sum = std::max({worst_sum, std::abs(sum - 1.0), std::abs(dsum - 1.0)});
  }
  o.require(worst_pr <= 1e-8, "pagerank deviates from the dense solve by " + fmt("%.2e", worst_pr));
  o.require(worst_sum <= 1e-9, "pagerank sum off by " + fmt("%.2e", worst_sum));

  for (int trial = 0; trial < 1200; ++trial, ++prestige_graphs) {
    std::size_t n = 1 + trial % 8;
    auto g = random_digraph(rng, n, 0.05 + 0.05 * (trial % 8), true);
    auto oracle = prestige_oracle(adjacency_matrix(g, n));
    auto r = domain_prestige(g);
    for (std::size_t i = 0; i < n; ++i)
      o.require(r.values.at(NodeId{vname(i)}) == oracle[i], "prestige mismatch at trial " + std::to_string(trial));
  }

  double worst_btw = 0;
  for (int trial = 0; trial < 400; ++trial, ++btw_graphs) {
    std::size_t n = 1 + trial % 7;
    auto g = random_digraph(rng, n, 0.15 + 0.05 * (trial % 6));
    auto oracle = betweenness_oracle(adjacency_matrix(g, n));
    auto r = betweenness(g);
    for (std::size_t i = 0; i < n; ++i)
      worst_btw = std::max(worst_btw, std::abs(r.values.at(NodeId{vname(i)}) - oracle[i]));
  }
  o.require(worst_btw <= 1e-12, "betweenness deviates by " + fmt("%.2e", worst_btw));

  double worst_bridge = 0;
  for (int trial = 0; trial < 300; ++trial, ++bridge_graphs) {
    std::size_t n = 1 + trial % 10;
    auto g = random_digraph(rng, n, 0.25);
    auto oracle = bridging_oracle(adjacency_matrix(g, n));
    auto r = bridging_coefficient(g);
    for (std::size_t i = 0; i < n; ++i)
      worst_bridge = std::max(worst_bridge, std::abs(r.values.at(NodeId{vname(i)}) - oracle[i]));
  }
  o.require(worst_bridge <= 1e-12, "bridging deviates by " + fmt("%.2e", worst_bridge));
  double dt = seconds_since(t0);
  o.require(dt < 30.0, "metric suite took " + fmt("%.1f s", dt));
  if (o.pass)
    o.detail = "pagerank " + std::to_string(pr_graphs) + " graphs (max err " + fmt("%.1e", worst_pr) + "), prestige " +
               std::to_string(prestige_graphs) + " exact, betweenness " + std::to_string(btw_graphs) + ", bridging " +
               std::to_string(bridge_graphs) + "; " + fmt("%.2f s", dt);
  return o;
}

Outcome recursive_transcript() {
  Outcome o;
  auto fx = load_script_fixture("fixtures/session_n3_script.json");
  llm::ScriptedMock mock(fx.script);
  SessionConfig cfg;
  cfg.iterations = 3;
  cfg.integrate = true;
  cfg.reasoner.model_name = "graph-reasoner";
  cfg.critic.model_name = "general-critic";
  auto s = run_session(fx.task, cfg, mock);
  auto requests = mock.requests();
  o.require(requests.size() == 11, std::to_string(requests.size()) + " gateway calls");
  if (!o.pass) return o;
  using K = CallKind;
  const std::vector<K> order{K::Initial, K::Critique, K::Improve,    K::Regenerate, K::Critique, K::Improve,
                             K::Regenerate, K::Critique, K::Improve, K::Regenerate, K::Integrate};
  for (std::size_t i = 0; i < order.size(); ++i) o.require(s.transcript[i].kind == order[i], "call order differs");
  const auto& names = session_n3_golden_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    o.require(render_messages(requests[i]) == read_fixture("golden/session_n3/" + names[i] + ".txt"),
              "prompt " + names[i] + " differs from its golden file");
  const auto& integration = requests.back().messages[0].content;
  for (int k = 0; k <= 3; ++k)
    o.require(count_of(integration, "ANSWER #" + std::to_string(k) + ":") == 1, "ANSWER #" + std::to_string(k));
  o.require(count_of(integration, "ANSWER #4") == 0, "unexpected ANSWER #4");
  if (o.pass) o.detail = "11 calls in order, 11 prompts byte-exact, ANSWER #0..#3";
  return o;
}

Outcome garden_shape() {
  Outcome o;
  llm::SyntheticReasoner gw;
  auto s = garden::run_autonomous("accept", "How can music inform the design of tougher spider silk?", 12,
                                  garden::GardenConfig{}, gw);
  o.require(s.steps.size() == 13, std::to_string(s.steps.size()) + " steps");
  KnowledgeGraph fold;
  std::size_t prev_nodes = 0, prev_edges = 0;
  for (const auto& st : s.steps) {
    fold = merge(fold, st.subgraph);
    o.require(fold.node_count() >= prev_nodes && fold.edge_count() >= prev_edges,
              "integrated graph shrank at step " + std::to_string(st.index));
    prev_nodes = fold.node_count();
    prev_edges = fold.edge_count();
    o.require(filter_by_step(s.integrated, StepRef{"accept", st.index}) == st.subgraph,
              "provenance filter differs at step " + std::to_string(st.index));
  }
  o.require(fold == s.integrated, "fold of step subgraphs differs from the integrated graph");
  if (o.pass)
    o.detail = "13 steps, " + std::to_string(s.steps[0].subgraph.node_count()) + " -> " +
               std::to_string(s.integrated.node_count()) + " nodes, every step reconstructed";
  return o;
}

Outcome graphml_round_trip() {
  Outcome o;
  std::mt19937_64 rng(500);
  const int graphs = 600;
  for (int i = 0; i < graphs && o.pass; ++i) {
    auto g = random_graph(rng, 14, 3, 5);
    auto xml = to_graphml(g);
    auto errors = validate_graphml(xml);
    o.require(errors.empty(), "graph " + std::to_string(i) + " fails validation: " + (errors.empty() ? "" : errors[0]));
    auto back = from_graphml(xml);
    o.require(back == g, "graph " + std::to_string(i) + " changed in a round trip");
    o.require(to_graphml(back) == xml, "graph " + std::to_string(i) + " re-serializes differently");
  }
  if (o.pass) o.detail = std::to_string(graphs) + " random graphs identical after a round trip; all validate";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parser golden files", parser_golden},
      {"gin-demo iteration-0 embeddings", gin_iteration0},
      {"GIN alignment fit", gin_alignment},
      {"WL/GIN soundness", wl_gin_soundness},
      {"metric oracles", metric_oracles},
      {"N=3 recursive transcript", recursive_transcript},
      {"garden shape (12 autonomous iterations)", garden_shape},
      {"GraphML round trip", graphml_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
