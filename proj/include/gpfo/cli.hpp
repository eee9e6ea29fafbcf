#pragma once

// Command-line front end. dispatch() returns 0 on success, 1 on usage errors
// (synopsis on the error stream) and 2 on runtime errors.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gpfo/engine.hpp"
#include "gpfo/garden.hpp"
#include "gpfo/gateway.hpp"
#include "gpfo/gin.hpp"
#include "gpfo/graph_io.hpp"
#include "gpfo/metrics.hpp"
#include "gpfo/service.hpp"

namespace gpfo::cli {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"degree",     "in-degree",  "out-degree",  "pagerank", "bridging",
                                              "prestige",   "clustering", "betweenness", "summary",  "all"};
  return names;
}

inline MetricReport compute_metric(const KnowledgeGraph& g, const std::string& name, std::size_t k) {
  if (name == "degree") return degree(g, k);
  if (name == "in-degree") return in_degree(g, k);
  if (name == "out-degree") return out_degree(g, k);
  if (name == "pagerank") return pagerank(g, {}, k);
  if (name == "bridging") return bridging_coefficient(g, k);
  if (name == "prestige") return domain_prestige(g, k);
  if (name == "clustering") return clustering_coefficients(g, k);
  if (name == "betweenness") return betweenness(g, k);
  throw UsageError("unknown metric " + name);
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

inline std::string fmt_vec(const gin::Vec& v, const char* spec) {
  std::string out = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v[i]);
    if (i) out += ", ";
    out += buf;
  }
  return out + ")";
}

inline std::string pad(const std::string& s, std::size_t w) {
  auto n = text::utf8_count(s);
  return n >= w ? s : s + std::string(w - n, ' ');
}

}  // namespace detail

struct Options {
  std::string store_dir;
  std::string config_path;
  std::string trace_path;
  bool json = false;
};

class Runner {
 public:
  Runner(Options opt, std::ostream& out, std::ostream& err) : opt_(std::move(opt)), out_(out), err_(err) {}

  llm::GatewayConfig gateway_config() const {
    auto cfg = opt_.config_path.empty() ? llm::GatewayConfig{} : llm::GatewayConfig::load(opt_.config_path);
    cfg.apply_environment();
    return cfg;
  }

  std::shared_ptr<llm::Gateway> gateway(const llm::GatewayConfig& cfg) const {
    auto gw = llm::make_gateway(cfg);
    if (!opt_.trace_path.empty()) gw = std::make_shared<llm::TracingGateway>(gw, opt_.trace_path);
    return gw;
  }

  garden::GardenStore store() const { return garden::GardenStore(opt_.store_dir); }

  garden::GardenConfig garden_config(const llm::GatewayConfig& g, int iterations) const {
    garden::GardenConfig c;
    c.session = SessionConfig::from_gateway(g);
    c.session.iterations = iterations;
    return c;
  }

  // reason ----------------------------------------------------------------------

  struct ReasonArgs {
    std::string task;
    int iterations = 3;
    bool integrate = false;
    bool include_initial = true;
    std::string improver = "critic";
    std::string save_transcript;
    std::string save_session;
  };

  int reason(const ReasonArgs& a) {
    auto gcfg = gateway_config();
    auto cfg = SessionConfig::from_gateway(gcfg);
    cfg.iterations = a.iterations;
    cfg.integrate = a.integrate;
    cfg.integrate_include_initial = a.include_initial;
    cfg.improver = agent_from_string(a.improver);
    auto gw = gateway(gcfg);
    ReasoningSession s;
    try {
      s = run_session(a.task, cfg, *gw, StepRef{"cli", 0});
    } catch (const SessionAborted& e) {
      if (!a.save_transcript.empty()) detail::write_file(a.save_transcript, render_transcript(e.partial().transcript));
      throw;
    }
    if (!a.save_transcript.empty()) detail::write_file(a.save_transcript, render_transcript(s.transcript));
    if (!a.save_session.empty()) detail::write_file(a.save_session, to_jsonl(s));
    if (opt_.json) {
      out_ << to_json(s).dump(2) << "\n";
    } else {
      for (const auto& r : s.records)
        for (const auto& w : r.warnings) err_ << "warning: record " << r.index << ": " << w << "\n";
      out_ << s.final_answer << "\n";
    }
    return 0;
  }

  // garden --------------------------------------------------------------------

  void print_step(const garden::GardenSession& s, const garden::GrowthStep& st) {
    for (const auto& w : st.warnings) err_ << "warning: step " << st.index << ": " << w << "\n";
    if (opt_.json) return;
    out_ << "step " << st.index << " [" << garden::to_string(st.source) << "] " << st.prompt << "\n";
    out_ << "  answer: " << st.session.final_answer << "\n";
    out_ << "  integrated: " << s.integrated.node_count() << " nodes, " << s.integrated.edge_count() << " edges\n";
  }

  nlohmann::json session_json(const garden::GardenSession& s) {
    auto j = garden::metadata_json(s);
    j["top_degree"] = service::top_degree_json(s.integrated);
    return j;
  }

  int garden_new(const std::string& seed, const std::string& mode, std::size_t max_steps, std::string id,
                 int iterations) {
    auto gcfg = gateway_config();
    auto st = store();
    if (id.empty()) id = st.next_id();
    auto gw = gateway(gcfg);
    auto s = garden::new_session(id, seed, garden::mode_from_string(mode), max_steps, garden_config(gcfg, iterations),
                                 *gw, &st);
    print_step(s, s.steps.back());
    if (opt_.json) out_ << session_json(s).dump(2) << "\n";
    else out_ << "created " << s.id << "\n";
    return 0;
  }

  garden::GardenSession load_session(const garden::GardenStore& st, const std::string& id) {
    if (!st.exists(id)) throw std::runtime_error("no garden session " + id + " in " + st.root().string());
    return st.load(id);
  }

  int garden_step(const std::string& id, const std::optional<std::string>& prompt, int iterations) {
    auto gcfg = gateway_config();
    auto st = store();
    auto s = load_session(st, id);
    auto gw = gateway(gcfg);
    garden::grow_step(s, prompt, garden_config(gcfg, iterations), *gw, &st);
    print_step(s, s.steps.back());
    if (opt_.json) out_ << session_json(s).dump(2) << "\n";
    return 0;
  }

  int garden_auto(const std::string& id, int steps, int iterations) {
    if (steps < 1) throw UsageError("--steps must be >= 1");
    auto gcfg = gateway_config();
    auto st = store();
    auto s = load_session(st, id);
    auto gw = gateway(gcfg);
    auto cfg = garden_config(gcfg, iterations);
    for (int i = 0; i < steps; ++i) {
      garden::grow_step(s, std::nullopt, cfg, *gw, &st);
      print_step(s, s.steps.back());
    }
    if (opt_.json) out_ << session_json(s).dump(2) << "\n";
    return 0;
  }

  int garden_list() {
    auto st = store();
    auto arr = nlohmann::json::array();
    for (const auto& id : st.list()) {
      auto s = st.load(id);
      if (opt_.json) arr.push_back(session_json(s));
      else
        out_ << id << "  " << garden::to_string(s.mode) << "  " << s.steps.size() << "/" << s.max_steps << " steps  "
             << s.integrated.node_count() << " nodes\n";
    }
    if (opt_.json) out_ << arr.dump(2) << "\n";
    return 0;
  }

  // analyze / export --------------------------------------------------------------

  KnowledgeGraph load_graph(const std::string& target) {
    std::filesystem::path p(target);
    if (std::filesystem::is_regular_file(p)) {
      auto content = detail::read_file(target);
      if (p.extension() == ".json") return graph_from_json_text(content);
      return from_graphml(content);
    }
    auto st = store();
    return load_session(st, target).integrated;
  }

  int analyze(const std::string& target, const std::string& metric, std::size_t top) {
    if (std::find(metric_names().begin(), metric_names().end(), metric) == metric_names().end())
      throw UsageError("unknown metric " + metric);
    auto g = load_graph(target);
    if (metric == "summary") {
      auto s = summarize(g, top);
      if (opt_.json) {
        out_ << to_json(s).dump(2) << "\n";
      } else {
        out_ << "nodes " << s.node_count << ", edges " << s.edge_count << ", components " << s.components.size()
             << ", communities " << s.communities.size() << "\n";
        out_ << format_table(g, {s.betweenness}, true);
      }
      return 0;
    }
    std::vector<MetricReport> reports;
    if (metric == "all") {
      for (const char* m : {"degree", "pagerank", "bridging", "prestige"}) reports.push_back(compute_metric(g, m, top));
    } else {
      reports.push_back(compute_metric(g, metric, top));
    }
    if (opt_.json) {
      if (reports.size() == 1) {
        out_ << to_json(reports[0]).dump(2) << "\n";
      } else {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& r : reports) j[r.metric] = to_json(r);
        out_ << j.dump(2) << "\n";
      }
    } else {
      out_ << format_table(g, reports, reports.size() == 1);
    }
    return 0;
  }

  int export_graph(const std::string& id, const std::string& format, const std::string& output) {
    auto g = load_graph(id);
    std::string doc;
    if (format == "graphml") doc = to_graphml(g);
    else if (format == "json") doc = to_json(g).dump(2) + "\n";
    else throw UsageError("unknown export format " + format);
    if (output.empty()) out_ << doc;
    else detail::write_file(output, doc);
    return 0;
  }

  // gin-demo --------------------------------------------------------------------

  int gin_demo(std::optional<std::uint64_t> seed, std::size_t budget) {
    auto [g1, g2] = gin::build_equation_graphs();
    const std::vector<std::pair<std::string, const gin::GinGraph*>> graphs{{"G1", &g1}, {"G2", &g2}};
    nlohmann::json j;
    j["iteration0"] = nlohmann::json::array();
    if (!opt_.json) out_ << "Iteration 0 embeddings\n" << detail::pad("node", 6) << detail::pad("graph", 7) << "h(0)\n";
    for (const auto& [name, g] : graphs) {
      for (std::size_t v = 0; v < g->size(); ++v) {
        const auto& h = g->initial_embeddings[v];
        if (opt_.json) j["iteration0"].push_back({{"node", g->node_labels[v]}, {"graph", name}, {"h", h}});
        else
          out_ << detail::pad(g->node_labels[v], 6) << detail::pad(name, 7) << detail::fmt_vec(h, "%g") << "\n";
      }
    }

    gin::FitOptions opt;
    opt.budget = budget;
    if (seed) opt.seeds = {*seed};
    gin::FitResult fit;
    bool converged = true;
    try {
      fit = gin::fit_alignment(g1, g2, gin::equation_matching(), opt);
    } catch (const gin::BudgetExhausted& e) {
      fit = e.best();
      converged = false;
    }
    auto t1 = gin::gin_step(g1, fit.model, gin::initial_table(g1));
    auto t2 = gin::gin_step(g2, fit.model, gin::initial_table(g2));
    double gdiff = std::sqrt(gin::squared_distance(t1.graph_embedding, t2.graph_embedding));
    const auto& ref = gin::reference_iteration1();
    const auto matching = gin::equation_matching();

    if (opt_.json) {
      j["fit"] = {{"seed", fit.seed},
                  {"converged", converged},
                  {"residual", fit.residual},
                  {"separation", fit.separation},
                  {"iterations", fit.iterations},
                  {"graph_embedding_difference", gdiff},
                  {"model", gin::to_json(fit.model)}};
      j["iteration1"] = nlohmann::json::array();
      for (std::size_t v = 0; v < g1.size(); ++v)
        j["iteration1"].push_back({{"node", g1.node_labels[v]}, {"graph", "G1"}, {"fitted", t1.node[v]}, {"published", ref[v]}});
      for (std::size_t v = 0; v < g1.size(); ++v) {
        auto w = matching[v];
        j["iteration1"].push_back({{"node", g2.node_labels[w]}, {"graph", "G2"}, {"fitted", t2.node[w]}, {"published", ref[v]}});
      }
      out_ << j.dump(2) << "\n";
    } else {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "\nFitted GIN update (seed %llu, %zu optimizer steps, %s)\n"
                    "alignment residual %.3e, separation penalty %.3e, graph-embedding difference %.3e\n",
                    static_cast<unsigned long long>(fit.seed), fit.iterations, converged ? "converged" : "NOT converged",
                    fit.residual, fit.separation, gdiff);
      out_ << buf;
      out_ << "\nIteration 1 embeddings\n"
           << detail::pad("node", 6) << detail::pad("graph", 7) << detail::pad("fitted h(1)", 22) << "published h(1)\n";
      for (std::size_t v = 0; v < g1.size(); ++v)
        out_ << detail::pad(g1.node_labels[v], 6) << detail::pad("G1", 7)
             << detail::pad(detail::fmt_vec(t1.node[v], "%.4f"), 22) << detail::fmt_vec(ref[v], "%.2f") << "\n";
      for (std::size_t v = 0; v < g1.size(); ++v) {
        auto w = matching[v];
        out_ << detail::pad(g2.node_labels[w], 6) << detail::pad("G2", 7)
             << detail::pad(detail::fmt_vec(t2.node[w], "%.4f"), 22) << detail::fmt_vec(ref[v], "%.2f") << "\n";
      }
    }
    return converged ? 0 : 2;
  }

  // serve -----------------------------------------------------------------------

  int serve(const std::string& host, int port, int iterations) {
    auto gcfg = gateway_config();
    service::Service svc(store(), gateway(gcfg), garden_config(gcfg, iterations));
    if (!svc.bind(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    err_ << "serving on http://" << host << ":" << port << "\n";
    svc.listen_after_bind();
    return 0;
  }

 private:
  Options opt_;
  std::ostream& out_;
  std::ostream& err_;
};

inline std::string default_store_dir() {
  if (const char* s = std::getenv("GPFO_STORE"); s && *s) return s;
  return "gardens";
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured reasoning, knowledge-garden growth and graph analysis", "gpfo"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  opt.store_dir = default_store_dir();
  app.add_option("--store", opt.store_dir, "Garden session directory (env GPFO_STORE)");
  app.add_option("--config", opt.config_path, "Gateway config JSON");
  app.add_option("--trace", opt.trace_path, "Append gateway requests/responses as JSON lines");
  app.add_flag("--json", opt.json, "Machine-readable output");

  Runner::ReasonArgs ra;
  auto* reason = app.add_subcommand("reason", "Run a recursive reasoning session on a task");
  reason->add_option("task", ra.task, "Task text")->required();
  reason->add_option("--iterations,-n", ra.iterations, "Refinement rounds")->check(CLI::NonNegativeNumber);
  reason->add_flag("--integrate", ra.integrate, "Integrate all responses instead of taking the last");
  reason->add_option("--integrate-include-initial", ra.include_initial, "Include the initial response when integrating");
  reason->add_option("--improver", ra.improver, "Agent that rewrites the thinking")
      ->check(CLI::IsMember({"reasoner", "critic"}));
  reason->add_option("--save-transcript", ra.save_transcript, "Write every prompt and reply to FILE");
  reason->add_option("--save-session", ra.save_session, "Write the session as JSON lines to FILE");

  auto* gardencmd = app.add_subcommand("garden", "Grow knowledge gardens");
  gardencmd->require_subcommand(1);
  gardencmd->fallthrough();
  int garden_iterations = 0;
  gardencmd->add_option("--iterations,-n", garden_iterations, "Refinement rounds per step")
      ->check(CLI::NonNegativeNumber);
  std::string seed, mode = "autonomous", gid;
  std::size_t max_steps = 13;
  auto* gnew = gardencmd->add_subcommand("new", "Create a garden and run its seed step");
  gnew->add_option("seed", seed, "Seed prompt")->required();
  gnew->add_option("--mode", mode, "autonomous or steered")->check(CLI::IsMember({"autonomous", "steered"}));
  gnew->add_option("--max-steps", max_steps, "Step limit including the seed")->check(CLI::PositiveNumber);
  gnew->add_option("--id", gid, "Session id (default garden-NNNN)");
  std::string step_id;
  std::optional<std::string> step_prompt;
  auto* gstep = gardencmd->add_subcommand("step", "Grow one step");
  gstep->add_option("id", step_id, "Session id")->required();
  gstep->add_option("--prompt", step_prompt, "Operator prompt (steered gardens)");
  std::string auto_id;
  int auto_steps = 0;
  auto* gauto = gardencmd->add_subcommand("auto", "Grow several autonomous steps");
  gauto->add_option("id", auto_id, "Session id")->required();
  gauto->add_option("--steps", auto_steps, "Number of steps")->required()->check(CLI::PositiveNumber);
  auto* glist = gardencmd->add_subcommand("list", "List stored gardens");

  std::string target, metric = "all";
  std::size_t top = 10;
  auto* analyze = app.add_subcommand("analyze", "Graph metrics for a stored garden or a GraphML/JSON file");
  analyze->add_option("target", target, "Session id or graph file")->required();
  analyze->add_option("--metric", metric, "degree|in-degree|out-degree|pagerank|bridging|prestige|clustering|"
                                          "betweenness|summary|all");
  analyze->add_option("--top", top, "Ranked entries per metric")->check(CLI::PositiveNumber);

  std::string export_id, export_format = "graphml", export_output;
  auto* exportcmd = app.add_subcommand("export", "Export a garden's integrated graph");
  exportcmd->add_option("id", export_id, "Session id or graph file")->required();
  exportcmd->add_option("--format", export_format, "graphml or json")->check(CLI::IsMember({"graphml", "json"}));
  exportcmd->add_option("--output,-o", export_output, "Output file (default standard output)");

  std::optional<std::uint64_t> gin_seed;
  std::size_t gin_budget = gin::FitOptions{}.budget;
  auto* gindemo = app.add_subcommand("gin-demo", "Equation-graph GIN alignment demonstration");
  gindemo->add_option("--seed", gin_seed, "Single restart seed (default: seeds 1..8)");
  gindemo->add_option("--budget", gin_budget, "Optimizer steps per seed")->check(CLI::PositiveNumber);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  Runner run(opt, out, err);
  try {
    if (*reason) return run.reason(ra);
    if (*gnew) return run.garden_new(seed, mode, max_steps, gid, garden_iterations);
    if (*gstep) return run.garden_step(step_id, step_prompt, garden_iterations);
    if (*gauto) return run.garden_auto(auto_id, auto_steps, garden_iterations);
    if (*glist) return run.garden_list();
    if (*analyze) return run.analyze(target, metric, top);
    if (*exportcmd) return run.export_graph(export_id, export_format, export_output);
    if (*gindemo) return run.gin_demo(gin_seed, gin_budget);
    if (*serve) return run.serve(host, port, garden_iterations);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

inline int dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, out, err);
}

}  // namespace gpfo::cli
